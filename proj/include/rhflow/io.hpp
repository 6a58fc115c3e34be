#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rhflow/flow.hpp"
#include "rhflow/homogeneous.hpp"

namespace rhflow {

struct ConfigError : std::runtime_error {
    std::string key;
    ConfigError(const std::string& key_, const std::string& what)
        : std::runtime_error("config error at '" + key_ + "': " + what), key(key_) {}
};

// Fully resolved run configuration. Unknown keys are rejected; the resolved
// form (defaults filled in) is echoed next to every run's outputs.
struct RunConfig {
    std::string scenario = "homogeneous";
    uint64_t seed = 1234;
    bool monotonicity_checks = false;
    CouplingSchedule schedule{1.0};
    bool has_pde = false;         // which sections the config actually carried
    bool has_homogeneous = false;

    // homogeneous
    ModelKind model = ModelKind::Sphere2;
    bool normalized = false;
    double hom_t_end = 1.0;
    double hom_dt = 1e-3;
    int hom_sample_stride = 1;
    bool do_renormalize = false;
    bool do_breather_scan = false;

    // pde
    int nodes_per_axis = 32;
    int dim = 2;
    double period = two_pi;
    TargetSpec target = TargetSpec::flat_scalar();
    std::string initial_metric = "flat"; // flat | conformal | bumpy
    double metric_amplitude = 0.05;
    std::string initial_map = "constant"; // constant | equator | perturbed-equator | smooth-scalar
    double map_amplitude = 0.1;
    double pde_t_end = 0.5;
    DtPolicy dt_policy = DtPolicy::Auto;
    double pde_dt = 0.0;
    double cfl_safety = 0.2;
    int sample_stride = 10;
    int diagnostics_stride = 1;
    int checkpoint_stride = 0;
    bool report_mu = false;
    bool report_W = false;
    double t_star = 0.0; // tau = t_star - t for mu / W columns

    // reduced-volume
    std::string rv_base = "static-flat"; // static-flat | sphere2-shrinking
    std::vector<double> tau_values;
    int rv_segments = 16;
    int rv_endpoints = 100;

    // verify
    std::string suite = "all";
    int refine = 2;

    nlohmann::json resolved;
};

RunConfig parse_config_json(const nlohmann::json& j);
RunConfig parse_config(const std::string& path); // throws ConfigError

// ---------------------------------------------------------------------------
// Checkpoints: small framed binary (magic, version, kind, length-prefixed
// fields). save -> load -> save is byte-identical.

struct CheckpointError : std::runtime_error {
    size_t offset;
    CheckpointError(const std::string& what, size_t off)
        : std::runtime_error(what + " (offset " + std::to_string(off) + ")"), offset(off) {}
};

struct Checkpoint {
    uint8_t kind = 0; // 0 = flow state, 1 = homogeneous state
    uint64_t seed = 0;
    std::vector<std::pair<double, double>> schedule_knots;
    // kind 0
    FlowState flow;
    // kind 1
    ModelKind model = ModelKind::Sphere2;
    bool normalized = false;
    HomogeneousState hom;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Scenario orchestration. Artifacts land in out_dir:
//   resolved_config.json, series.csv, report.json, checkpoint_*.rhck,
//   singularity.json (when a run ends in a singularity).
// Exit codes: 0 success, 2 config error (thrown before this), 3 singularity,
// 4 monitor/functional FAIL.

int command_run(const RunConfig& cfg, const std::string& out_dir);
int command_functionals(const RunConfig& cfg, const std::string& out_dir);
int command_reduced_volume(const RunConfig& cfg, const std::string& out_dir);
int command_verify(const RunConfig& cfg, const std::string& out_dir);

// Initial data builders shared by the runner and tests.
FlowState build_initial_state(const RunConfig& cfg);

// CSV writing (frozen column order; see README).
std::string series_csv_header(bool with_mu, bool with_W);

} // namespace rhflow
