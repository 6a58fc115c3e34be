#include "rhflow/map_calculus.hpp"

#include <cmath>

namespace rhflow {

double target_constraint_violation(const MapField& phi, const TargetSpec& target) {
    if (!target.is_sphere()) return 0.0;
    const int d = phi.embedding_dim;
    double worst = 0.0;
    for (int node = 0; node < phi.grid.node_count(); ++node) {
        double r2 = 0.0;
        for (int c = 0; c < d; ++c) r2 += phi(node, c) * phi(node, c);
        worst = std::max(worst, std::abs(std::sqrt(r2) - target.radius));
    }
    return worst;
}

void project_to_target(MapField& phi, const TargetSpec& target) {
    if (!target.is_sphere()) return;
    const int d = phi.embedding_dim;
    for (int node = 0; node < phi.grid.node_count(); ++node) {
        double r2 = 0.0;
        for (int c = 0; c < d; ++c) r2 += phi(node, c) * phi(node, c);
        const double s = target.radius / std::sqrt(r2);
        for (int c = 0; c < d; ++c) phi(node, c) *= s;
    }
}

ScalarField MapCalculus::hessian_norm2(const MetricAlgebra& alg) const {
    const GridGeometry& grid = hessian.grid;
    const int m = grid.dim;
    const int d = embedding_dim;
    ScalarField out(grid);
    for (int node = 0; node < grid.node_count(); ++node) {
        double acc = 0.0;
        for (int lam = 0; lam < d; ++lam)
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    for (int k = 0; k < m; ++k)
                        for (int l = 0; l < m; ++l)
                            acc += alg.inverse(node, i, k) * alg.inverse(node, j, l) *
                                   hess_at(node, lam, i, j) * hess_at(node, lam, k, l);
        out[node] = acc;
    }
    return out;
}

ScalarField MapCalculus::tension_norm2() const {
    const GridGeometry& grid = tension.grid;
    ScalarField out(grid);
    for (int node = 0; node < grid.node_count(); ++node) {
        double acc = 0.0;
        for (int lam = 0; lam < embedding_dim; ++lam) {
            const double t = tension.at(node, lam);
            acc += t * t;
        }
        out[node] = acc;
    }
    return out;
}

ScalarField MapCalculus::outer_norm2(const MetricAlgebra& alg) const {
    return tensor_norm2(alg, outer);
}

MapCalculus map_calculus(const MetricField& g, const MapField& phi, const TargetSpec& target) {
    MetricAlgebra alg = metric_algebra(g);
    ChristoffelField gamma = christoffel(g, alg);
    return map_calculus(g, alg, gamma, phi, target);
}

MapCalculus map_calculus(const MetricField& g, const MetricAlgebra& alg,
                         const ChristoffelField& gamma, const MapField& phi,
                         const TargetSpec& target) {
    const GridGeometry& grid = g.grid;
    const int m = grid.dim;
    const int d = phi.embedding_dim;

    if (target.is_sphere()) {
        const double viol = target_constraint_violation(phi, target);
        if (viol > 1e-8) {
            int worst = 0;
            double wv = 0.0;
            for (int node = 0; node < grid.node_count(); ++node) {
                double r2 = 0.0;
                for (int c = 0; c < d; ++c) r2 += phi(node, c) * phi(node, c);
                const double v = std::abs(std::sqrt(r2) - target.radius);
                if (v > wv) {
                    wv = v;
                    worst = node;
                }
            }
            throw FieldError("map_calculus: map violates sphere constraint", worst, wv);
        }
    }

    MapCalculus out;
    out.embedding_dim = d;
    out.grad = detail::DenseField(grid, d * m);
    out.energy_density = ScalarField(grid);
    out.outer = SymTensorField(grid);
    out.hessian = detail::DenseField(grid, d * m * m);
    out.tension = detail::DenseField(grid, d);

    const double rho2 = target.radius * target.radius;

    for (int node = 0; node < grid.node_count(); ++node) {
        int i0, j0;
        grid.unpack(node, i0, j0);

        double dphi[4][2]; // dphi[lambda][i]
        for (int lam = 0; lam < d; ++lam)
            for (int i = 0; i < m; ++i) {
                dphi[lam][i] = fd::d1(grid, phi.data, d, lam, i0, j0, i);
                out.grad.at(node, lam * m + i) = dphi[lam][i];
            }

        double e = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                double dot = 0.0;
                for (int lam = 0; lam < d; ++lam) dot += dphi[lam][i] * dphi[lam][j];
                out.outer(node, i, j) = dot;
                e += alg.inverse(node, i, j) * dot;
            }
        out.energy_density[node] = e;

        // coordinate Hessian d_i d_j phi - Gamma^k_ij d_k phi
        double chess[4][2][2];
        for (int lam = 0; lam < d; ++lam)
            for (int i = 0; i < m; ++i)
                for (int j = i; j < m; ++j) {
                    double v = fd::d2m(grid, phi.data, d, lam, i0, j0, i, j);
                    for (int k = 0; k < m; ++k) v -= gamma(node, k, i, j) * dphi[lam][k];
                    chess[lam][i][j] = v;
                    chess[lam][j][i] = v;
                }

        if (!target.is_sphere()) {
            double tau[4] = {};
            for (int lam = 0; lam < d; ++lam) {
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < m; ++j) {
                        out.hessian.at(node, (lam * m + i) * m + j) = chess[lam][i][j];
                        tau[lam] += alg.inverse(node, i, j) * chess[lam][i][j];
                    }
                out.tension.at(node, lam) = tau[lam];
            }
        } else {
            double p[4];
            double pn2 = 0.0;
            for (int c = 0; c < d; ++c) {
                p[c] = phi(node, c);
                pn2 += p[c] * p[c];
            }
            // tangential projection of the coordinate Hessian
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) {
                    double dot = 0.0;
                    for (int lam = 0; lam < d; ++lam) dot += chess[lam][i][j] * p[lam];
                    for (int lam = 0; lam < d; ++lam)
                        out.hessian.at(node, (lam * m + i) * m + j) =
                            chess[lam][i][j] - dot / pn2 * p[lam];
                }
            // tension = P(Lap_g phi); exactly tangent, equal to
            // Lap_g phi + (|grad phi|^2/rho^2) phi up to the discretization
            // defect of <Lap phi, phi> + |grad phi|^2 = 0
            double lap[4] = {};
            for (int lam = 0; lam < d; ++lam)
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < m; ++j)
                        lap[lam] += alg.inverse(node, i, j) * chess[lam][i][j];
            double dot = 0.0;
            for (int lam = 0; lam < d; ++lam) dot += lap[lam] * p[lam];
            for (int lam = 0; lam < d; ++lam)
                out.tension.at(node, lam) = lap[lam] - dot / pn2 * p[lam];
            (void)rho2;
        }
    }
    return out;
}

ScalarField target_curvature_term(const MetricField& g, const MapField& phi,
                                  const TargetSpec& target) {
    MetricAlgebra alg = metric_algebra(g);
    ChristoffelField gamma = christoffel(g, alg);
    MapCalculus mc = map_calculus(g, alg, gamma, phi, target);
    return target_curvature_term(alg, mc, target);
}

ScalarField target_curvature_term(const MetricAlgebra& alg, const MapCalculus& mc,
                                  const TargetSpec& target) {
    const GridGeometry& grid = mc.outer.grid;
    ScalarField out(grid);
    if (!target.is_sphere()) return out;
    const double c0 = target.curvature_bound();
    ScalarField on2 = mc.outer_norm2(alg);
    for (int node = 0; node < grid.node_count(); ++node) {
        const double e = mc.energy_density[node];
        out[node] = c0 * (e * e - on2[node]);
    }
    return out;
}

SFields s_fields(const MetricField& g, const MapField& phi, const TargetSpec& target,
                 double alpha) {
    MetricAlgebra alg = metric_algebra(g);
    ChristoffelField gamma = christoffel(g, alg);
    CurvatureSet curv = curvature(g, alg, gamma);
    MapCalculus mc = map_calculus(g, alg, gamma, phi, target);
    return s_fields(alg, curv, mc, alpha);
}

SFields s_fields(const MetricAlgebra& alg, const CurvatureSet& curv, const MapCalculus& mc,
                 double alpha) {
    (void)alg;
    const GridGeometry& grid = curv.scalar.grid;
    const int m = grid.dim;
    SFields out{SymTensorField(grid), ScalarField(grid)};
    for (int node = 0; node < grid.node_count(); ++node) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                out.tensor(node, i, j) =
                    curv.ricci(node, i, j) - alpha * mc.outer(node, i, j);
        out.trace[node] = curv.scalar[node] - alpha * mc.energy_density[node];
    }
    return out;
}

} // namespace rhflow
