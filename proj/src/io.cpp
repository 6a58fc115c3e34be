#include "rhflow/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "rhflow/fixtures.hpp"
#include "rhflow/functionals.hpp"
#include "rhflow/monitors.hpp"
#include "rhflow/reduced_volume.hpp"
#include "rhflow/util.hpp"
#include "rhflow/verify.hpp"

namespace rhflow {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::string& scope,
                         std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError(scope + "." + it.key(), "unknown key");
    }
}

double get_number(const json& j, const std::string& scope, const char* key, double dflt,
                  double lo, double hi) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_number()) throw ConfigError(scope + "." + key, "expected a number");
    const double v = j[key].get<double>();
    if (v < lo || v > hi)
        throw ConfigError(scope + "." + key,
                          "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
}

int get_int(const json& j, const std::string& scope, const char* key, int dflt, int lo, int hi) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_number_integer()) throw ConfigError(scope + "." + key, "expected an integer");
    const int v = j[key].get<int>();
    if (v < lo || v > hi) throw ConfigError(scope + "." + key, "out of range");
    return v;
}

bool get_bool(const json& j, const std::string& scope, const char* key, bool dflt) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_boolean()) throw ConfigError(scope + "." + key, "expected a boolean");
    return j[key].get<bool>();
}

std::string get_string(const json& j, const std::string& scope, const char* key,
                       const std::string& dflt, std::initializer_list<const char*> allowed) {
    std::string v = dflt;
    if (j.contains(key)) {
        if (!j[key].is_string()) throw ConfigError(scope + "." + key, "expected a string");
        v = j[key].get<std::string>();
    }
    for (const char* a : allowed)
        if (v == a) return v;
    std::string opts;
    for (const char* a : allowed) opts += std::string(a) + " ";
    throw ConfigError(scope + "." + key, "must be one of: " + opts);
}

CouplingSchedule parse_schedule(const json& j, const std::string& scope) {
    if (j.contains("alpha") && j.contains("alpha_schedule"))
        throw ConfigError(scope + ".alpha", "give either alpha or alpha_schedule, not both");
    if (j.contains("alpha_schedule")) {
        if (!j["alpha_schedule"].is_array())
            throw ConfigError(scope + ".alpha_schedule", "expected an array of [t, alpha] pairs");
        std::vector<std::pair<double, double>> knots;
        for (const auto& e : j["alpha_schedule"]) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                throw ConfigError(scope + ".alpha_schedule", "entries must be [t, alpha] pairs");
            knots.emplace_back(e[0].get<double>(), e[1].get<double>());
            if (knots.back().second < 0.0)
                throw ConfigError(scope + ".alpha_schedule", "alpha must be >= 0");
        }
        try {
            return CouplingSchedule::piecewise_linear(knots);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(scope + ".alpha_schedule", e.what());
        }
    }
    const double a = get_number(j, scope, "alpha", 1.0, 0.0, 1e6);
    return CouplingSchedule::constant(a);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

RunConfig parse_config_json(const json& j) {
    if (!j.is_object()) throw ConfigError("", "top level must be an object");
    reject_unknown_keys(j, "", {"scenario", "seed", "monotonicity_checks", "alpha",
                                "alpha_schedule", "homogeneous", "pde", "reduced_volume",
                                "verify"});
    RunConfig cfg;
    cfg.scenario = get_string(j, "", "scenario", "homogeneous",
                              {"homogeneous", "pde", "functionals", "reduced-volume", "verify"});
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            throw ConfigError("seed", "expected an integer");
        cfg.seed = j["seed"].get<uint64_t>();
    }
    cfg.monotonicity_checks = get_bool(j, "", "monotonicity_checks", false);
    cfg.schedule = parse_schedule(j, "");
    if (cfg.monotonicity_checks && !cfg.schedule.non_increasing())
        throw ConfigError("alpha_schedule",
                          "monotonicity checks require a non-increasing coupling schedule");

    if (j.contains("homogeneous")) {
        cfg.has_homogeneous = true;
        const json& h = j["homogeneous"];
        reject_unknown_keys(h, "homogeneous",
                            {"model", "normalized", "t_end", "dt", "sample_stride",
                             "renormalize", "breather_scan"});
        const std::string model =
            get_string(h, "homogeneous", "model", "sphere2", {"sphere2", "product-s2l"});
        cfg.model = model == "sphere2" ? ModelKind::Sphere2 : ModelKind::ProductS2L;
        cfg.normalized = get_bool(h, "homogeneous", "normalized", false);
        cfg.hom_t_end = get_number(h, "homogeneous", "t_end", 1.0, 1e-9, 1e6);
        cfg.hom_dt = get_number(h, "homogeneous", "dt", 1e-3, 1e-12, 1.0);
        cfg.hom_sample_stride = get_int(h, "homogeneous", "sample_stride", 1, 1, 1 << 20);
        cfg.do_renormalize = get_bool(h, "homogeneous", "renormalize", false);
        cfg.do_breather_scan = get_bool(h, "homogeneous", "breather_scan", false);
    }

    if (j.contains("pde")) {
        cfg.has_pde = true;
        const json& p = j["pde"];
        reject_unknown_keys(p, "pde",
                            {"nodes_per_axis", "dim", "period", "target", "initial", "t_end",
                             "dt_policy", "dt", "cfl_safety", "sample_stride",
                             "diagnostics_stride", "checkpoint_stride", "report", "t_star"});
        cfg.nodes_per_axis = get_int(p, "pde", "nodes_per_axis", 32, 8, 4096);
        cfg.dim = get_int(p, "pde", "dim", 2, 1, 2);
        cfg.period = get_number(p, "pde", "period", two_pi, 1e-9, 1e9);
        if (p.contains("target")) {
            const json& t = p["target"];
            reject_unknown_keys(t, "pde.target", {"kind", "radius"});
            const std::string kind =
                get_string(t, "pde.target", "kind", "flat-scalar", {"flat-scalar", "sphere"});
            if (kind == "sphere")
                cfg.target = TargetSpec::sphere(2, get_number(t, "pde.target", "radius", 1.0,
                                                              1e-9, 1e9));
            else
                cfg.target = TargetSpec::flat_scalar();
        }
        if (p.contains("initial")) {
            const json& in = p["initial"];
            reject_unknown_keys(in, "pde.initial",
                                {"metric", "metric_amplitude", "map", "map_amplitude"});
            cfg.initial_metric = get_string(in, "pde.initial", "metric", "flat",
                                            {"flat", "conformal", "bumpy"});
            cfg.metric_amplitude =
                get_number(in, "pde.initial", "metric_amplitude", 0.05, 0.0, 0.45);
            cfg.initial_map =
                get_string(in, "pde.initial", "map", "constant",
                           {"constant", "equator", "perturbed-equator", "smooth-scalar"});
            cfg.map_amplitude = get_number(in, "pde.initial", "map_amplitude", 0.1, 0.0, 10.0);
        }
        cfg.pde_t_end = get_number(p, "pde", "t_end", 0.5, 0.0, 1e6);
        const std::string pol = get_string(p, "pde", "dt_policy", "auto", {"auto", "fixed"});
        cfg.dt_policy = pol == "auto" ? DtPolicy::Auto : DtPolicy::Fixed;
        cfg.pde_dt = get_number(p, "pde", "dt", 0.0, 0.0, 1.0);
        if (cfg.dt_policy == DtPolicy::Fixed && !(cfg.pde_dt > 0.0))
            throw ConfigError("pde.dt", "fixed dt policy requires dt > 0");
        cfg.cfl_safety = get_number(p, "pde", "cfl_safety", 0.2, 1e-4, 0.25);
        cfg.sample_stride = get_int(p, "pde", "sample_stride", 10, 1, 1 << 20);
        cfg.diagnostics_stride = get_int(p, "pde", "diagnostics_stride", 1, 1, 1 << 20);
        cfg.checkpoint_stride = get_int(p, "pde", "checkpoint_stride", 0, 0, 1 << 20);
        cfg.t_star = get_number(p, "pde", "t_star", cfg.pde_t_end + 0.5, 0.0, 1e9);
        if (p.contains("report")) {
            const json& r = p["report"];
            reject_unknown_keys(r, "pde.report", {"mu", "W"});
            cfg.report_mu = get_bool(r, "pde.report", "mu", false);
            cfg.report_W = get_bool(r, "pde.report", "W", false);
        }
    }

    if (j.contains("reduced_volume")) {
        const json& r = j["reduced_volume"];
        reject_unknown_keys(r, "reduced_volume",
                            {"base", "nodes_per_axis", "tau_values", "segments", "endpoints"});
        cfg.rv_base = get_string(r, "reduced_volume", "base", "static-flat",
                                 {"static-flat", "sphere2-shrinking"});
        cfg.nodes_per_axis = get_int(r, "reduced_volume", "nodes_per_axis", 32, 8, 4096);
        cfg.rv_segments = get_int(r, "reduced_volume", "segments", 16, 16, 4096);
        cfg.rv_endpoints = get_int(r, "reduced_volume", "endpoints", 100, 1, 1 << 20);
        if (r.contains("tau_values")) {
            if (!r["tau_values"].is_array())
                throw ConfigError("reduced_volume.tau_values", "expected an array");
            for (const auto& e : r["tau_values"]) {
                if (!e.is_number() || e.get<double>() <= 0.0)
                    throw ConfigError("reduced_volume.tau_values", "entries must be positive");
                cfg.tau_values.push_back(e.get<double>());
            }
        }
        if (cfg.tau_values.empty()) cfg.tau_values = {0.05, 0.1, 0.2, 0.4};
    }

    if (j.contains("verify")) {
        const json& v = j["verify"];
        reject_unknown_keys(v, "verify", {"suite", "refine"});
        cfg.suite = get_string(v, "verify", "suite", "all",
                               {"all", "homogeneous", "gauge", "evolution", "variation",
                                "monotonicity", "bounds", "bochner", "reduced-volume",
                                "persistence"});
        cfg.refine = get_int(v, "verify", "refine", 2, 1, 3);
    }

    // resolved-config echo
    json res;
    res["scenario"] = cfg.scenario;
    res["seed"] = cfg.seed;
    res["monotonicity_checks"] = cfg.monotonicity_checks;
    json knots = json::array();
    for (auto& [t, a] : cfg.schedule.knots()) knots.push_back({t, a});
    res["alpha_schedule"] = knots;
    res["homogeneous"] = {{"model", cfg.model == ModelKind::Sphere2 ? "sphere2" : "product-s2l"},
                          {"normalized", cfg.normalized},
                          {"t_end", cfg.hom_t_end},
                          {"dt", cfg.hom_dt},
                          {"sample_stride", cfg.hom_sample_stride},
                          {"renormalize", cfg.do_renormalize},
                          {"breather_scan", cfg.do_breather_scan}};
    res["pde"] = {{"nodes_per_axis", cfg.nodes_per_axis},
                  {"dim", cfg.dim},
                  {"period", cfg.period},
                  {"target",
                   {{"kind", cfg.target.is_sphere() ? "sphere" : "flat-scalar"},
                    {"radius", cfg.target.radius}}},
                  {"initial",
                   {{"metric", cfg.initial_metric},
                    {"metric_amplitude", cfg.metric_amplitude},
                    {"map", cfg.initial_map},
                    {"map_amplitude", cfg.map_amplitude}}},
                  {"t_end", cfg.pde_t_end},
                  {"dt_policy", cfg.dt_policy == DtPolicy::Auto ? "auto" : "fixed"},
                  {"dt", cfg.pde_dt},
                  {"cfl_safety", cfg.cfl_safety},
                  {"sample_stride", cfg.sample_stride},
                  {"diagnostics_stride", cfg.diagnostics_stride},
                  {"checkpoint_stride", cfg.checkpoint_stride},
                  {"t_star", cfg.t_star},
                  {"report", {{"mu", cfg.report_mu}, {"W", cfg.report_W}}}};
    res["reduced_volume"] = {{"base", cfg.rv_base},
                             {"nodes_per_axis", cfg.nodes_per_axis},
                             {"tau_values", cfg.tau_values},
                             {"segments", cfg.rv_segments},
                             {"endpoints", cfg.rv_endpoints}};
    res["verify"] = {{"suite", cfg.suite}, {"refine", cfg.refine}};
    cfg.resolved = res;
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path, std::string("JSON parse error: ") + e.what());
    }
    return parse_config_json(j);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr uint32_t ck_magic = 0x4b434852u; // "RHCK" little-endian
constexpr uint32_t ck_version = 1u;

struct Writer {
    std::vector<unsigned char> buf;
    void raw(const void* p, size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void u32(uint32_t v) { raw(&v, 4); }
    void u64(uint64_t v) { raw(&v, 8); }
    void u8(uint8_t v) { raw(&v, 1); }
    void f64(double v) { raw(&v, 8); }
    void doubles(const std::vector<double>& v) {
        u64(v.size());
        raw(v.data(), v.size() * 8);
    }
};

struct Reader {
    const std::vector<unsigned char>& buf;
    size_t off = 0;
    explicit Reader(const std::vector<unsigned char>& b) : buf(b) {}
    void raw(void* p, size_t n) {
        if (off + n > buf.size()) throw CheckpointError("truncated checkpoint", off);
        std::memcpy(p, buf.data() + off, n);
        off += n;
    }
    uint32_t u32() {
        uint32_t v;
        raw(&v, 4);
        return v;
    }
    uint64_t u64() {
        uint64_t v;
        raw(&v, 8);
        return v;
    }
    uint8_t u8() {
        uint8_t v;
        raw(&v, 1);
        return v;
    }
    double f64() {
        double v;
        raw(&v, 8);
        return v;
    }
    std::vector<double> doubles() {
        const uint64_t n = u64();
        if (off + n * 8 > buf.size()) throw CheckpointError("field overruns file", off);
        std::vector<double> v(n);
        raw(v.data(), n * 8);
        return v;
    }
};

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    Writer w;
    w.u32(ck_magic);
    w.u32(ck_version);
    w.u8(ck.kind);
    w.u64(ck.seed);
    w.u64(ck.schedule_knots.size());
    for (auto& [t, a] : ck.schedule_knots) {
        w.f64(t);
        w.f64(a);
    }
    if (ck.kind == 0) {
        const FlowState& s = ck.flow;
        w.u32(static_cast<uint32_t>(s.g.grid.dim));
        w.u32(static_cast<uint32_t>(s.g.grid.nodes_per_axis));
        w.f64(s.g.grid.period);
        w.u8(s.target.is_sphere() ? 1 : 0);
        w.u32(static_cast<uint32_t>(s.target.embedding_dim));
        w.f64(s.target.radius);
        w.f64(s.t);
        w.doubles(s.g.data);
        w.doubles(s.phi.data);
        w.doubles(s.background.data);
    } else {
        w.u8(ck.model == ModelKind::Sphere2 ? 0 : 1);
        w.u8(ck.normalized ? 1 : 0);
        w.f64(ck.hom.t);
        w.f64(ck.hom.c);
        w.f64(ck.hom.d);
        w.f64(ck.hom.alpha);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path, 0);
    out.write(reinterpret_cast<const char*>(w.buf.data()),
              static_cast<std::streamsize>(w.buf.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path, 0);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (buf.empty()) throw CheckpointError("empty checkpoint file", 0);
    Reader r(buf);
    if (r.u32() != ck_magic) throw CheckpointError("bad magic", 0);
    const uint32_t ver = r.u32();
    if (ver != ck_version)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(ver), 4);
    Checkpoint ck;
    ck.kind = r.u8();
    ck.seed = r.u64();
    const uint64_t nk = r.u64();
    for (uint64_t k = 0; k < nk; ++k) {
        const double t = r.f64();
        const double a = r.f64();
        ck.schedule_knots.emplace_back(t, a);
    }
    if (ck.kind == 0) {
        const int dim = static_cast<int>(r.u32());
        const int n = static_cast<int>(r.u32());
        const double period = r.f64();
        const bool sphere = r.u8() != 0;
        const int ed = static_cast<int>(r.u32());
        const double radius = r.f64();
        GridGeometry grid(dim, n, period);
        ck.flow.t = r.f64();
        ck.flow.target = sphere ? TargetSpec::sphere(ed - 1, radius) : TargetSpec::flat_scalar();
        ck.flow.g = MetricField(grid);
        ck.flow.g.data = r.doubles();
        ck.flow.phi = MapField(grid, ed);
        ck.flow.phi.data = r.doubles();
        ck.flow.background = MetricField(grid);
        ck.flow.background.data = r.doubles();
        if (ck.flow.g.data.size() != static_cast<size_t>(grid.node_count()) * dim * dim)
            throw CheckpointError("metric payload has wrong length", r.off);
        if (ck.flow.phi.data.size() != static_cast<size_t>(grid.node_count()) * ed)
            throw CheckpointError("map payload has wrong length", r.off);
    } else if (ck.kind == 1) {
        ck.model = r.u8() == 0 ? ModelKind::Sphere2 : ModelKind::ProductS2L;
        ck.normalized = r.u8() != 0;
        ck.hom.t = r.f64();
        ck.hom.c = r.f64();
        ck.hom.d = r.f64();
        ck.hom.alpha = r.f64();
    } else {
        throw CheckpointError("unknown checkpoint kind", 8);
    }
    if (r.off != buf.size()) throw CheckpointError("trailing bytes after payload", r.off);
    return ck;
}

// ---------------------------------------------------------------------------
// Runner

FlowState build_initial_state(const RunConfig& cfg) {
    GridGeometry grid(cfg.dim, cfg.nodes_per_axis, cfg.period);
    FlowState s;
    s.t = 0.0;
    s.background = MetricField::flat(grid);
    s.target = cfg.target;
    if (cfg.initial_metric == "flat")
        s.g = MetricField::flat(grid);
    else if (cfg.initial_metric == "conformal")
        s.g = fixtures::conformal_metric(grid, cfg.metric_amplitude, cfg.seed);
    else
        s.g = fixtures::bumpy_metric(grid, cfg.metric_amplitude, cfg.seed);

    if (cfg.target.is_sphere()) {
        if (cfg.initial_map == "constant")
            s.phi = fixtures::constant_sphere_map(grid, cfg.target.radius);
        else if (cfg.initial_map == "equator")
            s.phi = fixtures::equator_map(grid, cfg.target.radius);
        else
            s.phi = fixtures::perturbed_equator_map(grid, cfg.map_amplitude,
                                                    mix_seed(cfg.seed, 7), cfg.target.radius);
    } else {
        if (cfg.initial_map == "constant")
            s.phi = MapField(grid, 1, 0.0);
        else
            s.phi = fixtures::smooth_scalar_map(grid, cfg.map_amplitude, mix_seed(cfg.seed, 7));
    }
    return s;
}

std::string series_csv_header(bool with_mu, bool with_W) {
    std::string h = "t,vol,S_min,S_max,sup_grad_phi2,sup_Rm,F,lambda,lambda_bar";
    if (with_mu) h += ",mu";
    if (with_W) h += ",W";
    return h;
}

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

json report_to_json(const MonitorReport& rep) {
    json checks = json::array();
    for (const auto& c : rep.checks) {
        json e = {{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance},
                  {"pass", c.pass}};
        if (!c.details.empty()) e["details"] = c.details;
        checks.push_back(e);
    }
    return {{"checks", checks}, {"all_pass", rep.all_pass()}};
}

json report_to_json(const FunctionalReport& rep) {
    json checks = json::array();
    for (const auto& c : rep.checks)
        checks.push_back({{"name", c.name},
                          {"verdict", c.verdict == Verdict::Pass   ? "PASS"
                                      : c.verdict == Verdict::Warn ? "WARN"
                                                                   : "FAIL"},
                          {"worst_violation", c.worst_violation},
                          {"tolerance", c.tolerance},
                          {"offending_index", c.offending_index}});
    json out = {{"t", rep.t},         {"F", rep.F},   {"lambda", rep.lambda},
                {"lambda_bar", rep.lambda_bar},       {"checks", checks},
                {"all_pass", rep.all_pass()}};
    if (!rep.W.empty()) out["W"] = rep.W;
    if (!rep.mu.empty()) out["mu"] = rep.mu;
    return out;
}

} // namespace

int command_run(const RunConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    write_text(out_dir + "/resolved_config.json", cfg.resolved.dump(2) + "\n");

    std::string csv = series_csv_header(cfg.report_mu, cfg.report_W) + "\n";
    json report;
    int exit_code = 0;

    if (cfg.scenario == "homogeneous") {
        HomTrajectory traj =
            integrate_model(cfg.model, cfg.schedule, cfg.hom_t_end, cfg.hom_dt, cfg.normalized);
        const int m = model_dim(cfg.model);
        for (size_t k = 0; k < traj.samples.size(); k += cfg.hom_sample_stride) {
            const HomogeneousState& s = traj.samples[k];
            const HomGeometry geo = hom_geometry(cfg.model, s);
            csv += format_double(s.t) + "," + format_double(geo.volume) + "," +
                   format_double(geo.S) + "," + format_double(geo.S) + "," +
                   format_double(geo.energy_density) + "," + format_double(geo.sup_riemann) +
                   "," + format_double(geo.S) + "," + format_double(geo.S) + "," +
                   format_double(geo.S * std::pow(geo.volume, 2.0 / m));
            if (cfg.report_mu) csv += ",nan";
            if (cfg.report_W) {
                const double tau = cfg.hom_t_end + 0.5 - s.t;
                csv += "," + format_double((tau * geo.S - m) *
                                           std::pow(4.0 * M_PI * tau, -0.5 * m) * geo.volume);
            }
            csv += "\n";
        }
        report["model"] = cfg.model == ModelKind::Sphere2 ? "sphere2" : "product-s2l";
        if (traj.singularity) {
            json sing = {{"t_extinct", traj.singularity->t_extinct},
                         {"t_sing", traj.singularity->t_sing},
                         {"factor", traj.singularity->factor}};
            report["singularity"] = sing;
            write_text(out_dir + "/singularity.json", sing.dump(2) + "\n");
            exit_code = 3;
        }
        if (cfg.do_breather_scan) {
            const BreatherReport br = breather_scan(traj);
            report["breather_pairs"] = br.pairs.size();
            report["breather_pairs_tested"] = br.pairs_tested;
            if (!br.pairs.empty()) report["breather_kind"] = br.pairs.front().kind;
        }
        if (cfg.do_renormalize) {
            const HomTrajectory renorm = renormalize(traj);
            double worst = 0.0;
            for (const auto& s : renorm.samples) {
                const HomGeometry geo = hom_geometry(cfg.model, s);
                worst = std::max(worst, std::abs(geo.volume - 1.0));
            }
            report["renormalized_volume_error"] = worst;
        }
        if (cfg.monotonicity_checks) {
            HomFunctionalOptions opts;
            const FunctionalReport frep = monotonicity_series(traj, opts);
            report["functionals"] = report_to_json(frep);
            if (!frep.all_pass()) exit_code = std::max(exit_code, 4);

            MonitorReport bounds = max_principle_bounds(bound_series(traj), {1e-8, {}, {}});
            MonitorReport evo = evolution_residuals_hom(traj, 1e-8);
            bounds.checks.insert(bounds.checks.end(), evo.checks.begin(), evo.checks.end());
            report["monitors"] = report_to_json(bounds);
            if (!bounds.all_pass()) exit_code = std::max(exit_code, 4);
        }
    } else if (cfg.scenario == "pde") {
        FlowState initial = build_initial_state(cfg);
        RunOptions opts;
        opts.t_end = cfg.pde_t_end;
        opts.dt_policy = cfg.dt_policy;
        opts.dt = cfg.pde_dt;
        opts.cfl_safety = cfg.cfl_safety;
        opts.sample_stride = cfg.sample_stride;
        opts.diagnostics_stride = cfg.diagnostics_stride;
        if (cfg.checkpoint_stride > 0) {
            opts.on_sample = [&](const FlowState& s, int index) {
                if (index % cfg.checkpoint_stride != 0) return;
                Checkpoint ck;
                ck.kind = 0;
                ck.seed = cfg.seed;
                ck.schedule_knots = cfg.schedule.knots();
                ck.flow = s;
                char name[64];
                std::snprintf(name, sizeof(name), "/checkpoint_%06d.rhck", index);
                save_checkpoint(out_dir + name, ck);
            };
        }
        Trajectory traj = run_flow(initial, cfg.schedule, opts);

        for (const FlowState& s : traj.samples) {
            const double alpha = cfg.schedule.value(s.t);
            const StateDiagnostics d = state_diagnostics(s, alpha);
            ScalarField f(s.g.grid, std::log(d.vol));
            const double F = energy_F(s.g, s.phi, s.target, f, alpha);
            const EigenResult eig = lambda_alpha(s.g, s.phi, s.target, alpha);
            csv += format_double(s.t) + "," + format_double(d.vol) + "," +
                   format_double(d.s_min) + "," + format_double(d.s_max) + "," +
                   format_double(d.sup_grad_phi2) + "," + format_double(d.sup_riemann) + "," +
                   format_double(F) + "," + format_double(eig.value) + "," +
                   format_double(eig.value_scaled);
            if (cfg.report_mu) {
                const EigenResult mu = mu_alpha(s.g, s.phi, s.target, cfg.t_star - s.t, alpha,
                                                1e-7, 20000, static_cast<unsigned>(cfg.seed));
                csv += "," + format_double(mu.value);
            }
            if (cfg.report_W) {
                ScalarField zero(s.g.grid, 0.0);
                csv += "," + format_double(entropy_W(s.g, s.phi, s.target, zero,
                                                     cfg.t_star - s.t, alpha));
            }
            csv += "\n";
        }
        if (traj.singularity) {
            json sing = {{"t", traj.singularity->t},
                         {"reason", traj.singularity->reason},
                         {"sup_riemann", traj.singularity->sup_riemann},
                         {"sup_energy", traj.singularity->sup_energy}};
            report["singularity"] = sing;
            write_text(out_dir + "/singularity.json", sing.dump(2) + "\n");
            exit_code = 3;
        }
        if (cfg.monotonicity_checks) {
            GridFunctionalOptions fopts;
            fopts.with_mu = cfg.report_mu;
            fopts.mu_t_star = cfg.t_star;
            const FunctionalReport frep = monotonicity_series(traj, fopts);
            report["functionals"] = report_to_json(frep);
            if (!frep.all_pass()) exit_code = std::max(exit_code, 4);
        }
        {
            const MonitorReport bounds =
                max_principle_bounds(bound_series(traj), {1e-5, {}, {}});
            report["monitors"] = report_to_json(bounds);
            if (!bounds.all_pass()) exit_code = std::max(exit_code, 4);
        }
    } else {
        throw ConfigError("scenario", "command_run handles homogeneous and pde scenarios");
    }

    write_text(out_dir + "/series.csv", csv);
    write_text(out_dir + "/report.json", report.dump(2) + "\n");
    return exit_code;
}

int command_functionals(const RunConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    write_text(out_dir + "/resolved_config.json", cfg.resolved.dump(2) + "\n");

    json report;
    int exit_code = 0;
    if (cfg.has_pde) {
        FlowState initial = build_initial_state(cfg);
        RunOptions opts;
        opts.t_end = cfg.pde_t_end;
        opts.dt_policy = cfg.dt_policy;
        opts.dt = cfg.pde_dt;
        opts.cfl_safety = cfg.cfl_safety;
        opts.sample_stride = cfg.sample_stride;
        opts.diagnostics_stride = 1 << 20;
        Trajectory traj = run_flow(initial, cfg.schedule, opts);
        GridFunctionalOptions fopts;
        fopts.with_mu = cfg.report_mu;
        fopts.mu_t_star = cfg.t_star;
        fopts.mu_seed = static_cast<unsigned>(cfg.seed);
        const FunctionalReport frep = monotonicity_series(traj, fopts);
        report = report_to_json(frep);
        if (!frep.all_pass()) exit_code = 4;
    } else {
        HomTrajectory traj =
            integrate_model(cfg.model, cfg.schedule, cfg.hom_t_end, cfg.hom_dt, cfg.normalized);
        HomFunctionalOptions opts;
        opts.adjoint_W = !cfg.normalized;
        opts.t_star = cfg.hom_t_end + 0.5;
        const FunctionalReport frep = monotonicity_series(traj, opts);
        report = report_to_json(frep);
        if (!frep.all_pass()) exit_code = 4;
    }
    write_text(out_dir + "/report.json", report.dump(2) + "\n");
    return exit_code;
}

int command_reduced_volume(const RunConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    write_text(out_dir + "/resolved_config.json", cfg.resolved.dump(2) + "\n");

    json report;
    int exit_code = 0;
    if (cfg.rv_base == "static-flat") {
        GridGeometry grid(2, cfg.nodes_per_axis, cfg.period);
        FlowState s;
        s.g = MetricField::flat(grid);
        s.phi = MapField(grid, 1, 0.0);
        s.background = MetricField::flat(grid);
        s.target = TargetSpec::flat_scalar();
        Trajectory traj;
        traj.target = s.target;
        traj.background = s.background;
        traj.schedule = cfg.schedule;
        traj.samples.push_back(s);
        GridReducedVolume rv(traj, 0, {0.0, 0.0});
        json values = json::array();
        double prev = std::numeric_limits<double>::infinity();
        bool monotone = true;
        for (double tau : cfg.tau_values) {
            const double v = rv.reduced_volume(tau, cfg.rv_segments,
                                               static_cast<unsigned>(cfg.seed));
            values.push_back({{"tau", tau}, {"reduced_volume", v}});
            if (v > prev + 1e-4) monotone = false;
            prev = v;
        }
        report["values"] = values;
        report["non_increasing"] = monotone;
        if (!monotone) exit_code = 4;
    } else {
        // shrinking Sphere2 soliton run
        HomTrajectory traj = integrate_model(ModelKind::Sphere2, cfg.schedule, cfg.hom_t_end,
                                             cfg.hom_dt, false);
        const double t_base = traj.samples.back().t;
        SphereReducedVolume rv(traj, t_base);
        json values = json::array();
        double prev = std::numeric_limits<double>::infinity();
        bool monotone = true;
        for (double tau : cfg.tau_values) {
            if (tau > rv.max_tau()) continue;
            const double v = rv.reduced_volume(tau, cfg.rv_segments);
            values.push_back({{"tau", tau}, {"reduced_volume", v}});
            if (v > prev + 1e-4) monotone = false;
            prev = v;
        }
        report["values"] = values;
        report["non_increasing"] = monotone;
        if (!monotone) exit_code = 4;
    }
    write_text(out_dir + "/report.json", report.dump(2) + "\n");
    return exit_code;
}

int command_verify(const RunConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    write_text(out_dir + "/resolved_config.json", cfg.resolved.dump(2) + "\n");

    const std::vector<CriterionResult> results =
        run_acceptance_suite(cfg.suite, cfg.refine, out_dir);
    json arr = json::array();
    bool all = true;
    for (const auto& r : results) {
        arr.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
        all = all && r.pass;
    }
    json report = {{"criteria", arr}, {"all_pass", all}};
    write_text(out_dir + "/report.json", report.dump(2) + "\n");
    return all ? 0 : 4;
}

} // namespace rhflow
