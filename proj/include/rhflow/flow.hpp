#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rhflow/map_calculus.hpp"
#include "rhflow/schedule.hpp"

namespace rhflow {

// State of the gauged flow: evolving metric and map over a fixed flat
// background metric (spatially constant, Gamma(g0) = 0, curvature 0).
struct FlowState {
    double t = 0.0;
    MetricField g;
    MapField phi;
    MetricField background;
    TargetSpec target;
};

// DeTurck vector V^l = g^{ij} (Gamma^l_ij(g) - Gamma^l_ij(g0)).
VectorField deturck_vector(const MetricField& g, const MetricField& g0);

struct FlowRhs {
    SymTensorField g_dot;
    MapField phi_dot; // tangent to the target at phi
};

// Strictly parabolic right-hand side over a flat background:
//   dg_ij = g^{kl} d_k d_l g_ij + 2a d_i phi . d_j phi
//           + 1/2 g^{kl} g^{pq} ( d_i g_pk d_j g_ql + 2 d_k g_ip d_q g_jl
//                                 - 2 d_k g_ip d_l g_jq - 4 d_i g_pk d_l g_jq )
//   dphi  = tangential projection of g^{kl} d_k d_l phi
// Requires a spatially constant background.
FlowRhs flow_rhs(const FlowState& state, double alpha);

// The same motion written geometrically: -2 Ric + 2a outer + L_V g for the
// metric and tau phi + dphi(V) for the map, with V the DeTurck vector. Equal
// to flow_rhs up to discretization error; the gauge-identity tests compare
// the two.
FlowRhs geometric_rhs(const FlowState& state, double alpha);

// Explicit stability limit dt = safety * h^2 / max_node(largest eigenvalue of g^{kl}).
double cfl_dt(const MetricField& g, double safety = 0.2);

struct StepRejected : std::runtime_error {
    double suggested_dt;
    StepRejected(const std::string& what, double dt) : std::runtime_error(what), suggested_dt(dt) {}
};

// One classical RK4 step; phi is reprojected onto the sphere at the end of the
// step. Throws StepRejected (suggesting dt/2) if the metric loses positivity.
FlowState flow_step(const FlowState& state, double dt, const CouplingSchedule& schedule);

struct SingularityReport {
    double t = 0.0;
    std::string reason;       // "spd-loss" | "riemann-blowup" | "energy-blowup"
    double sup_riemann = 0.0;
    double sup_energy = 0.0;
};

struct DiagnosticsSeries {
    std::vector<double> t;
    std::vector<double> vol;
    std::vector<double> s_min;
    std::vector<double> s_max;
    std::vector<double> sup_grad_phi2;
    std::vector<double> sup_riemann;
    std::vector<double> sup_hess_phi2;
};

enum class DtPolicy { Auto, Fixed };

struct RunOptions {
    double t_end = 1.0;
    DtPolicy dt_policy = DtPolicy::Auto;
    double dt = 0.0;            // required for Fixed
    double cfl_safety = 0.2;
    int sample_stride = 10;     // store full state every k steps
    int diagnostics_stride = 1; // record scalar diagnostics every k steps
    double riemann_blowup = 1e8;
    double energy_blowup = 1e8;
    // invoked on every stored sample (checkpointing hook)
    std::function<void(const FlowState&, int sample_index)> on_sample;
};

struct Trajectory {
    TargetSpec target;
    MetricField background;
    CouplingSchedule schedule;
    RunOptions options;
    double dt_used = 0.0; // step actually taken (Fixed) or initial CFL (Auto)
    std::vector<FlowState> samples;
    DiagnosticsSeries diagnostics;
    std::optional<SingularityReport> singularity;
};

// Integrates to t_end or a singularity; samples and diagnostics per options.
Trajectory run_flow(const FlowState& initial, const CouplingSchedule& schedule,
                    const RunOptions& options);

// Scalar diagnostics of one state (shared by run_flow and the CSV writer).
struct StateDiagnostics {
    double vol, s_min, s_max, sup_grad_phi2, sup_riemann, sup_hess_phi2;
};
StateDiagnostics state_diagnostics(const FlowState& state, double alpha);

} // namespace rhflow
