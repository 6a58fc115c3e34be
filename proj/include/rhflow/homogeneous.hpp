#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rhflow/schedule.hpp"

namespace rhflow {

// Exact ODE reductions of the flow on two homogeneous product models:
//   Sphere2:    M = S^2 with Gauss curvature 1/c, phi = id,  g = c g0
//   ProductS2L: M = S^2 x L (L hyperbolic, Gauss curvature -1/d),
//               g = c g_S2 + d g_L, phi = id
// Volumes are reported relative to unit-volume reference metrics, so the
// normalized product ODEs (which presuppose c*d = 1) and renormalize() agree.
enum class ModelKind { Sphere2, ProductS2L };

inline int model_dim(ModelKind k) { return k == ModelKind::Sphere2 ? 2 : 4; }
inline int model_factors(ModelKind k) { return k == ModelKind::Sphere2 ? 1 : 2; }

struct HomogeneousState {
    double t = 0.0;
    double c = 1.0;
    double d = 1.0; // ProductS2L only
    double alpha = 0.0;
};

struct HomRates {
    double c_dot = 0.0;
    double d_dot = 0.0;
};

// ODE right-hand sides:
//   Sphere2 unnormalized:      c' = -2 + 2a            (normalized: stationary)
//   ProductS2L unnormalized:   c' = -2 + 2a, d' = 2 + 2a
//   ProductS2L normalized:     c' = (a-1) - (a+1)c^2, d' = (a+1) - (a-1)d^2
// The a = 0 normalized case reproduces the normalized Ricci flow comparator
// c' = -1 - c^2, d' = 1 + d^2.
HomRates model_rhs(ModelKind model, const HomogeneousState& s, bool normalized);

struct NoClosedForm : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Closed-form solutions with c(0) = d(0) = 1:
//   Sphere2 unnormalized:    c = 1 + (2a-2)t;  normalized: c = 1
//   ProductS2L unnormalized: c = 1 + (2a-2)t, d = 1 + (2a+2)t
//   ProductS2L normalized, a = 1: c = (1+2t)^{-1}, d = 1 + 2t
// Throws NoClosedForm for the normalized product with a != 1.
HomogeneousState closed_form(ModelKind model, bool normalized, double alpha, double t);

// Closed-form geometry at a state (all relative to the unit-volume references).
struct HomGeometry {
    double scalar_curvature = 0.0;  // R
    double energy_density = 0.0;    // |grad phi|^2
    double S = 0.0;                 // R - alpha |grad phi|^2
    double volume = 1.0;            // c^{m1/2} d^{m2/2}
    double s_norm2 = 0.0;           // |S_ij|^2
    double sup_riemann = 0.0;       // |Rm|
    // eigenvalues with respect to g, one entry per factor
    std::vector<double> ricci_eigenvalues;
    std::vector<double> s_eigenvalues;
};

HomGeometry hom_geometry(ModelKind model, const HomogeneousState& s);

// dS/dt along the flow, from the chain rule on the closed-form geometry.
double hom_S_dot(ModelKind model, const HomogeneousState& s, bool normalized);

struct SingularityEvent {
    double t_extinct = 0.0; // time where the scale hits eps_ext
    double t_sing = 0.0;    // extrapolated zero crossing
    std::string factor;     // "c" or "d"
};

struct FixedPointEvent {
    double t = 0.0;
    double c = 0.0;
    double d = 0.0;
};

struct HomTrajectory {
    ModelKind model = ModelKind::Sphere2;
    bool normalized = false;
    CouplingSchedule schedule;
    double dt = 0.0;
    std::vector<HomogeneousState> samples; // strictly increasing t
    std::optional<SingularityEvent> singularity;
    std::optional<FixedPointEvent> fixed_point;
};

inline constexpr double eps_extinction = 1e-6;

// Classical RK4 with fixed dt; extinction detected by sign change of
// (scale - eps_ext) and refined by bisection to 1e-10, then extrapolated to
// the actual zero crossing for t_sing.
HomTrajectory integrate_model(ModelKind model, const CouplingSchedule& schedule,
                              double t_end, double dt, bool normalized);

// Advance a single state by h (RK4); used by the integrator and checkpoints.
HomogeneousState hom_step(ModelKind model, const CouplingSchedule& schedule,
                          const HomogeneousState& s, double h, bool normalized);

// Volume renormalization of an unnormalized trajectory: lambda = vol^{-2/m},
// tbar = int_0^t lambda, output scales lambda*c, lambda*d at times tbar.
// Output volume is 1 at every sample.
HomTrajectory renormalize(const HomTrajectory& traj);

struct BreatherPair {
    double t1 = 0.0;
    double t2 = 0.0;
    double scale = 1.0;
    std::string kind; // shrinking | steady | expanding
};

struct BreatherReport {
    std::vector<BreatherPair> pairs;
    int pairs_tested = 0;
};

// Scans sample pairs for (g(t2), phi(t2)) = scale * (g(t1), phi(t1)); for the
// homogeneous models this is a scale comparison of (c, d).
BreatherReport breather_scan(const HomTrajectory& traj, double tol = 1e-8,
                             int max_samples = 160);

} // namespace rhflow
