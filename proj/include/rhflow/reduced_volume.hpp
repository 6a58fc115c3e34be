#pragma once

#include <array>
#include <vector>

#include "rhflow/flow.hpp"
#include "rhflow/homogeneous.hpp"

namespace rhflow {

// Backward paths eta(tau) from a base point, discretized on K+1 nodes graded
// in lambda = sqrt(tau) (uniform lambda removes the sqrt(tau) weight
// singularity). nodes[0] is the base point.
struct DiscretePath {
    double tau1 = 0.0;
    std::vector<std::array<double, 2>> nodes; // K+1 positions, unwrapped coordinates

    int segments() const { return static_cast<int>(nodes.size()) - 1; }
};

struct DistanceResult {
    double lb = 0.0;        // reduced distance value
    double length = 0.0;    // Lb-length of the minimizing path
    bool converged = true;  // first-order stationarity below tolerance
    double grad_norm = 0.0;
    DiscretePath path;
};

// Lb machinery over a grid trajectory viewed backwards from its sample at
// base_index: tau = t(base) - t. Fields are Catmull-Rom interpolated in space
// and linearly in time.
class GridReducedVolume {
  public:
    GridReducedVolume(const Trajectory& traj, int base_index,
                      std::array<double, 2> base_point);

    // Lb(eta) = int sqrt(tau) (S + |deta/dtau|^2_g) dtau, midpoint rule in lambda.
    double lb_length(const DiscretePath& path) const;

    // inf over paths from the base point to q with eta(tau1) = q, by gradient
    // descent on the interior nodes from 5 seeded starts (straight minimal-image
    // line plus perturbations).
    DistanceResult reduced_distance(std::array<double, 2> q, double tau1, int segments = 16,
                                    unsigned seed = 2024, double stat_tol = 1e-6) const;

    // Vb(tau) = sum over grid endpoints of (4 pi tau)^{-m/2} e^{-lb} dV(q),
    // dV taken at backward time tau. Endpoint optimizations run in parallel.
    double reduced_volume(double tau1, int segments = 16, unsigned seed = 2024) const;

    int dim() const { return grid_.dim; }
    double max_tau() const { return t_base_ - times_.front(); }

    // interpolated S and metric at backward time tau (exposed for oracles)
    double S_at(const std::array<double, 2>& x, double tau) const;
    void metric_at(const std::array<double, 2>& x, double tau, double out[2][2]) const;

  private:
    GridGeometry grid_;
    double t_base_ = 0.0;
    std::array<double, 2> base_{};
    std::vector<double> times_;          // ascending sample times covered
    std::vector<ScalarField> s_fields_;  // S per covered sample
    std::vector<MetricField> metrics_;

    struct Spatial {
        double value;
        std::array<double, 2> grad;
    };
    Spatial interp_scalar(const std::vector<double>& a, int comps, int c,
                          const std::array<double, 2>& x) const;
    void bracket(double tau, int& k0, int& k1, double& w1) const;

    double objective(const DiscretePath& path, std::vector<std::array<double, 2>>* grad) const;
};

// The Sphere2 shrinking run reduced to great-circle paths: theta(tau) is the
// angle from the base point, the metric factor c(tau) comes from the sampled
// trajectory.
class SphereReducedVolume {
  public:
    SphereReducedVolume(const HomTrajectory& traj, double t_base);

    double lb_length(const std::vector<double>& theta_nodes, double tau1) const;
    DistanceResult reduced_distance(double theta_q, double tau1, int segments = 16,
                                    double stat_tol = 1e-8) const;
    // true geometric measure: dV = c(tau) * (round sphere area element)
    double reduced_volume(double tau1, int segments = 16, int theta_nodes = 129) const;

    double c_at(double tau) const;
    double S_at(double tau) const;
    double max_tau() const { return t_base_ - times_.front(); }

  private:
    double t_base_ = 0.0;
    std::vector<double> times_;
    std::vector<double> c_, S_;
    double objective(const std::vector<double>& theta, double tau1,
                     std::vector<double>* grad) const;
};

} // namespace rhflow
