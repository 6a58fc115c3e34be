#pragma once

#include <optional>
#include <vector>

#include "rhflow/flow.hpp"
#include "rhflow/homogeneous.hpp"

namespace rhflow {

// Energy functional  F(g, phi, f) = int (R + |grad f|^2 - a |grad phi|^2) e^{-f} dV.
double energy_F(const MetricField& g, const MapField& phi, const TargetSpec& target,
                const ScalarField& f, double alpha);

// Entropy functional
//   W(g, phi, f, tau) = int ( tau (R + |grad f|^2 - a |grad phi|^2) + f - m )
//                            (4 pi tau)^{-m/2} e^{-f} dV,   tau > 0.
double entropy_W(const MetricField& g, const MapField& phi, const TargetSpec& target,
                 const ScalarField& f, double tau, double alpha);

// W assembled through tau*F + int (f - m) e^{-f} dV; equals entropy_W up to
// roundoff and guards the transcription of the W integrand.
double entropy_W_via_F(const MetricField& g, const MapField& phi, const TargetSpec& target,
                       const ScalarField& f, double tau, double alpha);

// ---------------------------------------------------------------------------
// First variations

struct VariationCheck {
    double analytic = 0.0;
    std::vector<double> epsilons;
    std::vector<double> numeric; // central differences at each epsilon
    double worst_error = 0.0;    // max |analytic - numeric| over the sweep
                                 // measured against tolerance max(1e-6, 10 eps^2)
    bool pass = true;
};

// delta F for directions (h, theta, ell); theta must be tangent to the target
// along phi. The numeric side differentiates F(g+eps h, pi_N(phi+eps theta),
// f+eps ell) by central differences over the epsilon sweep.
VariationCheck first_variation_F(const MetricField& g, const MapField& phi,
                                 const TargetSpec& target, const ScalarField& f, double alpha,
                                 const SymTensorField& h, const MapField& theta,
                                 const ScalarField& ell,
                                 const std::vector<double>& epsilons = {1e-3, 1e-4, 1e-5});

// delta W in the measure-fixed form: ell = tr_g h / 2 + m/(2 tau) and
// delta tau = -1 are determined, (h, theta) are free.
VariationCheck first_variation_W(const MetricField& g, const MapField& phi,
                                 const TargetSpec& target, const ScalarField& f, double tau,
                                 double alpha, const SymTensorField& h, const MapField& theta,
                                 const std::vector<double>& epsilons = {1e-3, 1e-4, 1e-5});

// ---------------------------------------------------------------------------
// Eigenvalue functionals

struct EigenResult {
    double value = 0.0;      // lambda or mu
    double value_scaled = 0.0; // lambda_bar = lambda * vol^{2/m} (lambda only)
    ScalarField minimizer;   // positive, int v^2 dV = 1
    double residual = 0.0;   // ||op v - value v||_{L2(dV)}
    int iterations = 0;
    bool converged = false;
};

// Smallest eigenvalue of -4 Lap + R - a |grad phi|^2 by shifted inverse power
// iteration with conjugate-gradient inner solves.
EigenResult lambda_alpha(const MetricField& g, const MapField& phi, const TargetSpec& target,
                         double alpha, double tol = 1e-9, int max_iterations = 200);

// The discrete operator underlying lambda_alpha (divergence-form Laplacian,
// exactly self-adjoint in the nodal dV inner product), exposed so tests can
// assemble it densely and solve with an independent method.
std::vector<double> lambda_operator_apply(const MetricField& g, const MapField& phi,
                                          const TargetSpec& target, double alpha,
                                          const std::vector<double>& u);
ScalarField lambda_operator_weights(const MetricField& g);

// mu(g, phi, tau) = inf { W(g, phi, f, tau) : int (4 pi tau)^{-m/2} e^{-f} dV = 1 },
// minimized in v = (4 pi tau)^{-m/4} e^{-f/2} by projected gradient descent
// (Barzilai-Borwein steps under an Armijo backtracking safeguard, 5 positive
// starts). residual reports ||L(v) - mu v||_{L2(dV)}.
EigenResult mu_alpha(const MetricField& g, const MapField& phi, const TargetSpec& target,
                     double tau, double alpha, double stat_tol = 1e-6,
                     int max_iterations = 20000, unsigned seed = 12345);

// ---------------------------------------------------------------------------
// Adjoint heat equation  Box* u = -du/dt - Lap u + (R - a |grad phi|^2) u = 0

struct GridAdjointSolution {
    std::vector<int> sample_indices;   // trajectory samples covered (descending t: stored ascending)
    std::vector<double> t;
    std::vector<ScalarField> u;        // positive solutions
    std::vector<double> mass;          // int u dV at each time
};

// Solves backward from the trajectory sample at `terminal_index` down to
// sample 0. Requires uniformly spaced samples and an even terminal index;
// the DeTurck advection term <grad u, V> is included (the printed adjoint
// equation holds in the ungauged flow). No mass renormalization is applied;
// mass conservation is a verified property, not an enforced one.
GridAdjointSolution adjoint_heat_solve(const Trajectory& traj, const ScalarField& u_terminal,
                                       int terminal_index);

struct HomAdjointSolution {
    std::vector<double> t;
    std::vector<double> u; // spatially constant values
    std::vector<double> f; // -log u  (F-normalization)
};

// Homogeneous reduction: u' = S(t) u integrated backwards jointly with the
// model ODE (V = 0, the printed equation applies verbatim).
HomAdjointSolution adjoint_heat_solve_hom(ModelKind model, const CouplingSchedule& schedule,
                                          bool normalized, double t_terminal, double u_terminal,
                                          double dt);

// ---------------------------------------------------------------------------
// Monotonicity reporting

enum class Verdict { Pass, Warn, Fail };

struct MonotonicityCheck {
    std::string name;
    Verdict verdict = Verdict::Pass;
    double worst_violation = 0.0; // positive = violated by this much
    double tolerance = 0.0;
    int offending_index = -1;
};

struct FunctionalReport {
    std::vector<double> t;
    std::vector<double> F;
    std::vector<double> W;          // empty unless requested
    std::vector<double> lambda;
    std::vector<double> lambda_bar;
    std::vector<double> mu;         // empty unless requested
    std::vector<double> dF_dt_numeric;
    std::vector<double> dF_dt_analytic; // homogeneous trajectories only
    std::vector<MonotonicityCheck> checks;
    bool all_pass() const {
        for (const auto& c : checks)
            if (c.verdict == Verdict::Fail) return false;
        return true;
    }
};

struct HomFunctionalOptions {
    bool soliton_W = false;  // evaluate W with f = 0, tau = T - t
    double soliton_T = 1.0;  // extinction time for the soliton check
    // adjoint-normalized entropy series: W with f = log(vol (4 pi tau)^{-m/2})
    // (the constant potential solving the adjoint equation), tau = t_star - t,
    // with the analytic dW/dt compared against central differences
    bool adjoint_W = false;
    double t_star = 0.0;
    double dF_rel_tol = 1e-4;
    double W_const_tol = 1e-8;
};

// Homogeneous trajectories: F(t) with the adjoint-normalized constant f equals
// S(t); analytic dF/dt from the printed derivative formula is compared against
// 2nd-order central differences of the sampled values.
FunctionalReport monotonicity_series(const HomTrajectory& traj,
                                     const HomFunctionalOptions& options);

struct GridFunctionalOptions {
    bool with_mu = false;
    double mu_t_star = 0.0;   // tau_i = t_star - t_i (required if with_mu)
    double tol = 1e-6;        // solver tolerance for the verdicts
    double warn_band = 1e-5;  // violations below this WARN instead of FAIL
    unsigned mu_seed = 12345;
};

// Grid trajectories: lambda (and optionally mu) evaluated on the stored
// samples; sequences checked non-decreasing within the solver tolerance.
FunctionalReport monotonicity_series(const Trajectory& traj,
                                     const GridFunctionalOptions& options);

} // namespace rhflow
