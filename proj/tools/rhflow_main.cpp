#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "rhflow/io.hpp"

namespace {

int dispatch(const std::string& command, const std::string& config_path,
             const std::string& out_dir, int refine_override) {
    rhflow::RunConfig cfg = rhflow::parse_config(config_path);
    if (refine_override > 0) cfg.refine = refine_override;
    if (command == "run") return rhflow::command_run(cfg, out_dir);
    if (command == "functionals") return rhflow::command_functionals(cfg, out_dir);
    if (command == "reduced-volume") return rhflow::command_reduced_volume(cfg, out_dir);
    if (command == "verify") return rhflow::command_verify(cfg, out_dir);
    std::fprintf(stderr, "unknown command: %s\n", command.c_str());
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rhflow: coupled Ricci / harmonic-map flow laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    int refine = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON configuration file")->required();
        sub->add_option("--out", out_dir, "output directory");
    };
    CLI::App* run = app.add_subcommand("run", "integrate a configured flow and emit series");
    add_common(run);
    CLI::App* verify = app.add_subcommand("verify", "run verification suites");
    add_common(verify);
    verify->add_option("--refine", refine, "number of grid levels for refinement checks");
    CLI::App* functionals = app.add_subcommand("functionals", "evaluate functional reports");
    add_common(functionals);
    CLI::App* rv = app.add_subcommand("reduced-volume", "reduced distance / volume reports");
    add_common(rv);

    CLI11_PARSE(app, argc, argv);

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return dispatch(command, config_path, out_dir, refine);
    } catch (const rhflow::ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
