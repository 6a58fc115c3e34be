#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rhflow/flow.hpp"
#include "rhflow/functionals.hpp"
#include "rhflow/homogeneous.hpp"

namespace rhflow {

struct MonitorCheck {
    std::string name;
    double value = 0.0;     // residual sup-norm or worst bound violation
    double tolerance = 0.0;
    bool pass = true;
    std::map<std::string, double> details;
};

struct MonitorReport {
    std::vector<MonitorCheck> checks;
    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

// ---------------------------------------------------------------------------
// Evolution-equation residuals

struct EvolutionResidualOptions {
    // The gauged flow satisfies d_t q = (printed rhs) + <grad q, V>; dropping
    // the advection term is a negative control and must break convergence.
    bool gauge_correction = true;
    // Evaluate the right-hand sides with alpha shifted by this amount
    // (another negative control; 0 for the real check).
    double alpha_offset = 0.0;
    double tolerance = 1e-3; // callers doing refinement runs compare values instead
};

// Residuals of the energy-density equation and the scalar S equation measured
// at interior stored samples by 2nd-order central time differences.
// Requires uniformly spaced samples.
MonitorReport evolution_residuals(const Trajectory& traj,
                                  const EvolutionResidualOptions& options = {});

// Homogeneous runs: both sides closed-form, residuals at roundoff. Includes the
// tensor equation per factor (V = 0 on homogeneous trajectories).
MonitorReport evolution_residuals_hom(const HomTrajectory& traj, double tolerance = 1e-8);

// ---------------------------------------------------------------------------
// Maximum-principle bounds

// Scalar series extracted from either trajectory flavour.
struct BoundSeries {
    int dim = 2;
    double c0 = 0.0;        // target sectional curvature bound
    double alpha_min = 0.0; // min alpha over the run
    bool alpha_non_increasing = true;
    std::vector<double> t;
    std::vector<double> s_min;
    std::vector<double> sup_energy;
    std::vector<double> sup_scalar_curv; // sup R per time (supplies the R0 bound)
};

BoundSeries bound_series(const Trajectory& traj);
BoundSeries bound_series(const HomTrajectory& traj);

struct MaxPrincipleOptions {
    double tolerance = 1e-8;
    // Negative-control overrides: pretend the initial values were different.
    std::optional<double> override_s_min0;
    std::optional<double> override_energy0;
};

// Checks, per sample time:
//   S_min(t) >= S_min(0) / (1 - (2t/m) S_min(0))      (while defined)
//   S_min(t) >= -m/(2t)
//   sup|grad phi|^2 <= R0/alpha_min + m/(2 alpha_min t)   (alpha_min > 0)
//   the applicable case of the energy-density estimates:
//     i)  c0 - alpha/m <= 0:        sup e(t) <= sup e(0)
//     ii) c0 = 0, alpha_min > 0:    sup e(t) <= m/(2 alpha_min t)
//     iii) general:                 sup e(t) <= 2 sup e(0) for t < T*
//          with T* = min(T, (4 c0 sup e(0))^{-1})
MonitorReport max_principle_bounds(const BoundSeries& series,
                                   const MaxPrincipleOptions& options = {});

// ---------------------------------------------------------------------------
// Bochner identity

struct BochnerResult {
    MonitorReport report;
    ScalarField residual;
    // term-by-term sup norms for fixture tables
    double sup_lap_energy = 0.0;
    double sup_grad_dot_grad_tension = 0.0;
    double sup_hessian_norm2 = 0.0;
    double sup_ricci_outer = 0.0;
    double sup_target_term = 0.0;
};

// residual = Lap |grad phi|^2 - ( 2 <grad phi, grad tau phi> + 2 |hess phi|^2
//            + 2 <Ric, outer> - 2 target_term )
// flip_target_sign is a deliberate negative control: with the target term
// entering with the wrong sign the identity must fail on curved-target maps.
BochnerResult bochner_residual(const MetricField& g, const MapField& phi,
                               const TargetSpec& target, double tolerance,
                               bool flip_target_sign = false);

// ---------------------------------------------------------------------------
// Soliton residuals

struct SolitonData {
    ScalarField f;
    double sigma = 0.0;
};

struct SolitonResult {
    MonitorReport report;
    double tensor_residual = 0.0;   // sup | Ric - a outer + Hess f + sigma g |_g
    double map_residual = 0.0;      // sup | tau phi - <grad phi, grad f> |
    double first_integral_std = 0.0; // dV-weighted std of R - a|dphi|^2 + |df|^2 + 2 sigma f
};

SolitonResult soliton_residual(const MetricField& g, const MapField& phi,
                               const TargetSpec& target, const SolitonData& data, double alpha,
                               double tolerance);

// Homogeneous variant with constant potential f.
SolitonResult soliton_residual_hom(ModelKind model, const HomogeneousState& state,
                                   double f_const, double sigma, double tolerance);

// ---------------------------------------------------------------------------
// D-quantity (reduced-volume monotonicity integrand)

struct DQuantityResult {
    ScalarField value;            // 2a |tau phi - grad_X phi|^2 - adot |grad phi|^2
    ScalarField identity_residual; // direct assembly minus the closed form
    double min_value = 0.0;
    double sup_residual = 0.0;
};

DQuantityResult d_quantity(const MetricField& g, const MapField& phi, const TargetSpec& target,
                           const VectorField& X, double alpha, double alpha_dot);

// Homogeneous variant: X given by per-factor squared g-norms.
struct HomDQuantityResult {
    double value = 0.0;
    double identity_residual = 0.0;
};

HomDQuantityResult d_quantity_hom(ModelKind model, const HomogeneousState& state,
                                  double xi_c, double xi_d, double alpha_dot);

// ---------------------------------------------------------------------------
// Gradient-estimate series (recorded quantities of the interior estimates)

struct GradientEstimateSeries {
    std::vector<double> t;
    std::vector<double> t_sup_energy;   // t * sup |grad phi|^2
    std::vector<double> t_sup_riemann;  // t * sup |Rm|
    std::vector<double> t2_combined;    // t^2 (sup|Rm|^2 + sup|hess phi|^2)
    double max_t_sup_energy = 0.0;
    double max_t_sup_riemann = 0.0;
    double max_t2_combined = 0.0;
    double trend_slope = 0.0; // least-squares slope of t_sup_riemann over the window
};

GradientEstimateSeries gradient_estimate_series(const Trajectory& traj, double t_min = 0.0);
GradientEstimateSeries gradient_estimate_series(const HomTrajectory& traj, double t_min,
                                                double t_max);

} // namespace rhflow
