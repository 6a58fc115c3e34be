#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rhflow/io.hpp"

using namespace rhflow;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "rhflow_io_test";
    std::filesystem::create_directories(dir);
    return dir.string();
}

} // namespace

TEST_CASE("config: defaults echoed, unknown keys and bad values rejected") {
    json minimal = {{"scenario", "homogeneous"},
                    {"alpha", 0.5},
                    {"homogeneous", {{"model", "sphere2"}, {"t_end", 1.5}}}};
    RunConfig cfg = parse_config_json(minimal);
    CHECK(cfg.hom_dt == 1e-3); // default filled
    CHECK(cfg.resolved["homogeneous"]["dt"] == 1e-3);
    CHECK(cfg.resolved["homogeneous"]["t_end"] == 1.5);

    CHECK_THROWS_AS(parse_config_json(json{{"scenario", "homogeneous"}, {"alpha", -0.2}}),
                    ConfigError);
    try {
        parse_config_json(json{{"scenario", "homogeneous"}, {"alpha", -0.2}});
    } catch (const ConfigError& e) {
        CHECK(e.key == ".alpha");
    }

    CHECK_THROWS_AS(parse_config_json(json{{"scenario", "homogeneous"}, {"bogus", 1}}),
                    ConfigError);

    // increasing schedule with monotonicity checks requested: rejected citing
    // the non-increasing requirement
    json increasing = {{"scenario", "homogeneous"},
                       {"monotonicity_checks", true},
                       {"alpha_schedule", {{0.0, 0.5}, {1.0, 2.0}}}};
    CHECK_THROWS_WITH_AS(parse_config_json(increasing),
                         doctest::Contains("non-increasing"), ConfigError);
}

TEST_CASE("csv header is frozen") {
    CHECK(series_csv_header(false, false) ==
          "t,vol,S_min,S_max,sup_grad_phi2,sup_Rm,F,lambda,lambda_bar");
    CHECK(series_csv_header(true, true) ==
          "t,vol,S_min,S_max,sup_grad_phi2,sup_Rm,F,lambda,lambda_bar,mu,W");
}

TEST_CASE("homogeneous run: singularity exit code and byte-identical reruns") {
    json j = {{"scenario", "homogeneous"},
              {"alpha", 0.5},
              {"seed", 99},
              {"homogeneous",
               {{"model", "sphere2"}, {"t_end", 2.0}, {"dt", 1e-3}, {"sample_stride", 100}}}};
    RunConfig cfg = parse_config_json(j);
    const std::string dir = temp_dir();
    const int code = command_run(cfg, dir + "/hom_a");
    CHECK(code == 3); // extinction before t_end
    CHECK(std::filesystem::exists(dir + "/hom_a/singularity.json"));
    json sing = json::parse(slurp(dir + "/hom_a/singularity.json"));
    CHECK(std::abs(sing["t_sing"].get<double>() - 1.0) <= 1e-6);

    command_run(cfg, dir + "/hom_b");
    CHECK(slurp(dir + "/hom_a/series.csv") == slurp(dir + "/hom_b/series.csv"));
    CHECK(!slurp(dir + "/hom_a/series.csv").empty());

    // resolved config echoed next to results
    CHECK(std::filesystem::exists(dir + "/hom_a/resolved_config.json"));
}

TEST_CASE("checkpoint: byte-exact roundtrip and corruption errors") {
    const std::string dir = temp_dir();
    Checkpoint ck;
    ck.kind = 1;
    ck.seed = 777;
    ck.schedule_knots = {{0.0, 1.0}, {1.0, 0.5}};
    ck.model = ModelKind::ProductS2L;
    ck.normalized = true;
    ck.hom.t = 0.25;
    ck.hom.c = 0.8;
    ck.hom.d = 1.25;
    ck.hom.alpha = 0.75;
    const std::string p1 = dir + "/a.rhck";
    const std::string p2 = dir + "/b.rhck";
    save_checkpoint(p1, ck);
    Checkpoint loaded = load_checkpoint(p1);
    CHECK(loaded.hom.c == 0.8);
    CHECK(loaded.schedule_knots.size() == 2);
    save_checkpoint(p2, loaded);
    CHECK(slurp(p1) == slurp(p2));

    // wrong version
    std::string bytes = slurp(p1);
    bytes[4] = 9;
    std::ofstream(dir + "/bad_version.rhck", std::ios::binary) << bytes;
    CHECK_THROWS_AS(load_checkpoint(dir + "/bad_version.rhck"), CheckpointError);

    // empty file
    std::ofstream(dir + "/empty.rhck", std::ios::binary).flush();
    CHECK_THROWS_AS(load_checkpoint(dir + "/empty.rhck"), CheckpointError);

    // truncated payload reports an offset
    std::ofstream(dir + "/trunc.rhck", std::ios::binary)
        << bytes.substr(0, bytes.size() / 2);
    try {
        load_checkpoint(dir + "/trunc.rhck");
        CHECK(false);
    } catch (const CheckpointError& e) {
        CHECK(e.offset > 0);
    }
}

TEST_CASE("hom checkpoint continuation matches an uninterrupted run") {
    const CouplingSchedule sched = CouplingSchedule::constant(2.0);
    HomTrajectory full = integrate_model(ModelKind::ProductS2L, sched, 1.0, 1e-3, true);

    HomTrajectory half = integrate_model(ModelKind::ProductS2L, sched, 0.5, 1e-3, true);
    Checkpoint ck;
    ck.kind = 1;
    ck.model = ModelKind::ProductS2L;
    ck.normalized = true;
    ck.hom = half.samples.back();
    const std::string p = temp_dir() + "/cont.rhck";
    save_checkpoint(p, ck);
    Checkpoint loaded = load_checkpoint(p);

    HomogeneousState s = loaded.hom;
    while (s.t < 1.0 - 1e-12) s = hom_step(ModelKind::ProductS2L, sched, s,
                                           std::min(1e-3, 1.0 - s.t), true);
    CHECK(std::abs(s.c - full.samples.back().c) <= 1e-12);
    CHECK(std::abs(s.d - full.samples.back().d) <= 1e-12);
}

TEST_CASE("pde run writes the frozen header and sampled rows") {
    json j = {{"scenario", "pde"},
              {"seed", 5},
              {"alpha", 1.0},
              {"pde",
               {{"nodes_per_axis", 16},
                {"target", {{"kind", "flat-scalar"}}},
                {"initial", {{"metric", "bumpy"}, {"metric_amplitude", 0.03},
                             {"map", "smooth-scalar"}, {"map_amplitude", 0.1}}},
                {"t_end", 0.01},
                {"dt_policy", "fixed"},
                {"dt", 0.001},
                {"sample_stride", 5}}}};
    RunConfig cfg = parse_config_json(j);
    const std::string dir = temp_dir() + "/pde";
    const int code = command_run(cfg, dir);
    CHECK(code == 0);
    const std::string csv = slurp(dir + "/series.csv");
    CHECK(csv.rfind("t,vol,S_min,S_max,sup_grad_phi2,sup_Rm,F,lambda,lambda_bar\n", 0) == 0);
    // header + t=0 + samples at steps 5 and 10
    int lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == 4);
}
