#include "rhflow/tensor_calculus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rhflow {

namespace {

// Eigenvalues of a symmetric 1x1 or 2x2 matrix, smallest first.
void sym_eigenvalues(const double* m, int dim, double* ev) {
    if (dim == 1) {
        ev[0] = m[0];
        return;
    }
    const double a = m[0], b = m[1], d = m[3];
    const double tr = a + d;
    const double disc = std::sqrt(std::max(0.0, 0.25 * (a - d) * (a - d) + b * b));
    ev[0] = 0.5 * tr - disc;
    ev[1] = 0.5 * tr + disc;
}

} // namespace

double min_metric_eigenvalue(const MetricField& g) {
    const int m = g.grid.dim;
    double worst = std::numeric_limits<double>::infinity();
    double ev[2];
    for (int node = 0; node < g.grid.node_count(); ++node) {
        sym_eigenvalues(&g.data[static_cast<size_t>(node) * m * m], m, ev);
        worst = std::min(worst, ev[0]);
    }
    return worst;
}

MetricAlgebra metric_algebra(const MetricField& g, double spd_floor) {
    const GridGeometry& grid = g.grid;
    const int m = grid.dim;
    MetricAlgebra out{SymTensorField(grid), ScalarField(grid), ScalarField(grid)};

    double hm = 1.0;
    for (int a = 0; a < m; ++a) hm *= grid.spacing();

    double ev[2];
    for (int node = 0; node < grid.node_count(); ++node) {
        const double* gm = &g.data[static_cast<size_t>(node) * m * m];
        sym_eigenvalues(gm, m, ev);
        if (!(ev[0] > spd_floor) || !std::isfinite(ev[0]))
            throw FieldError("metric_algebra: metric not positive-definite", node, ev[0]);
        if (m == 1) {
            out.det[node] = gm[0];
            out.inverse(node, 0, 0) = 1.0 / gm[0];
        } else {
            const double det = gm[0] * gm[3] - gm[1] * gm[2];
            out.det[node] = det;
            out.inverse(node, 0, 0) = gm[3] / det;
            out.inverse(node, 1, 1) = gm[0] / det;
            out.inverse(node, 0, 1) = -gm[1] / det;
            out.inverse(node, 1, 0) = -gm[1] / det;
        }
        out.volume_weight[node] = std::sqrt(out.det[node]) * hm;
    }
    return out;
}

ChristoffelField christoffel(const MetricField& g) {
    return christoffel(g, metric_algebra(g));
}

ChristoffelField christoffel(const MetricField& g, const MetricAlgebra& alg) {
    const GridGeometry& grid = g.grid;
    const int m = grid.dim;
    ChristoffelField gamma(grid);

    // dg(a, i, j) = d_a g_ij, gathered once per node
    for (int node = 0; node < grid.node_count(); ++node) {
        int i0, j0;
        grid.unpack(node, i0, j0);
        double dg[2][2][2] = {};
        for (int a = 0; a < m; ++a)
            for (int i = 0; i < m; ++i)
                for (int j = i; j < m; ++j) {
                    const double v = fd::d1(grid, g.data, m * m, i * m + j, i0, j0, a);
                    dg[a][i][j] = v;
                    dg[a][j][i] = v;
                }
        for (int k = 0; k < m; ++k)
            for (int i = 0; i < m; ++i)
                for (int j = i; j < m; ++j) {
                    double acc = 0.0;
                    for (int l = 0; l < m; ++l)
                        acc += alg.inverse(node, k, l) * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                    gamma(node, k, i, j) = 0.5 * acc;
                    gamma(node, k, j, i) = 0.5 * acc;
                }
    }
    return gamma;
}

CurvatureSet curvature(const MetricField& g) {
    MetricAlgebra alg = metric_algebra(g);
    ChristoffelField gamma = christoffel(g, alg);
    return curvature(g, alg, gamma);
}

CurvatureSet curvature(const MetricField& g, const MetricAlgebra& alg,
                       const ChristoffelField& gamma) {
    const GridGeometry& grid = g.grid;
    const int m = grid.dim;
    CurvatureSet out{FullCurvatureField(grid), SymTensorField(grid), ScalarField(grid)};

    const int gc = m * m * m;
    for (int node = 0; node < grid.node_count(); ++node) {
        int i0, j0;
        grid.unpack(node, i0, j0);

        // dG(a, l, i, j) = d_a Gamma^l_ij
        double dG[2][2][2][2] = {};
        for (int a = 0; a < m; ++a)
            for (int l = 0; l < m; ++l)
                for (int i = 0; i < m; ++i)
                    for (int j = i; j < m; ++j) {
                        const double v =
                            fd::d1(grid, gamma.data, gc, (l * m + i) * m + j, i0, j0, a);
                        dG[a][l][i][j] = v;
                        dG[a][l][j][i] = v;
                    }

        // R^l_kij = d_i G^l_jk - d_j G^l_ik + G^l_ip G^p_jk - G^l_jp G^p_ik
        for (int l = 0; l < m; ++l)
            for (int k = 0; k < m; ++k)
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < m; ++j) {
                        double up = dG[i][l][j][k] - dG[j][l][i][k];
                        for (int p = 0; p < m; ++p)
                            up += gamma(node, l, i, p) * gamma(node, p, j, k) -
                                  gamma(node, l, j, p) * gamma(node, p, i, k);
                        // lower the first index later; stash R^l_kij in riemann(l,k,i,j)
                        out.riemann(node, l, k, i, j) = up;
                    }

        // lower: R_lkij = g_lm R^m_kij (in place via a temp)
        double low[2][2][2][2];
        for (int l = 0; l < m; ++l)
            for (int k = 0; k < m; ++k)
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < m; ++j) {
                        double acc = 0.0;
                        for (int p = 0; p < m; ++p)
                            acc += g(node, l, p) * out.riemann(node, p, k, i, j);
                        low[l][k][i][j] = acc;
                    }
        for (int l = 0; l < m; ++l)
            for (int k = 0; k < m; ++k)
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < m; ++j) out.riemann(node, l, k, i, j) = low[l][k][i][j];

        // Ric_ij = g^{kl} R_kilj, R = g^{ij} Ric_ij
        double scal = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                double acc = 0.0;
                for (int k = 0; k < m; ++k)
                    for (int l = 0; l < m; ++l)
                        acc += alg.inverse(node, k, l) * out.riemann(node, k, i, l, j);
                out.ricci(node, i, j) = acc;
                scal += alg.inverse(node, i, j) * acc;
            }
        out.scalar[node] = scal;
    }
    return out;
}

namespace {

// Covariant rough Laplacian of a symmetric 2-tensor:
// D t_ij = g^{ab} ( d_a d_b t_ij
//                   - dGamma/d-free terms assembled from nabla nabla t ).
// Assembled as g^{ab} nabla_a nabla_b with nabla in coordinates.
SymTensorField rough_laplacian(const MetricField& g, const MetricAlgebra& alg,
                               const ChristoffelField& gamma, const SymTensorField& t) {
    const GridGeometry& grid = g.grid;
    const int m = grid.dim;
    SymTensorField out(grid);

    // First covariant derivative  C_aij = d_a t_ij - G^p_ai t_pj - G^p_aj t_ip
    detail::DenseField cov1(grid, m * m * m);
    for (int node = 0; node < grid.node_count(); ++node) {
        int i0, j0;
        grid.unpack(node, i0, j0);
        for (int a = 0; a < m; ++a)
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) {
                    double v = fd::d1(grid, t.data, m * m, i * m + j, i0, j0, a);
                    for (int p = 0; p < m; ++p)
                        v -= gamma(node, p, a, i) * t(node, p, j) +
                             gamma(node, p, a, j) * t(node, i, p);
                    cov1.at(node, (a * m + i) * m + j) = v;
                }
    }
    // Second: nabla_b C_aij = d_b C_aij - G^p_ba C_pij - G^p_bi C_apj - G^p_bj C_aip
    for (int node = 0; node < grid.node_count(); ++node) {
        int i0, j0;
        grid.unpack(node, i0, j0);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                double acc = 0.0;
                for (int a = 0; a < m; ++a)
                    for (int b = 0; b < m; ++b) {
                        double v = fd::d1(grid, cov1.data, m * m * m, (a * m + i) * m + j,
                                          i0, j0, b);
                        for (int p = 0; p < m; ++p)
                            v -= gamma(node, p, b, a) * cov1.at(node, (p * m + i) * m + j) +
                                 gamma(node, p, b, i) * cov1.at(node, (a * m + p) * m + j) +
                                 gamma(node, p, b, j) * cov1.at(node, (a * m + i) * m + p);
                        acc += alg.inverse(node, a, b) * v;
                    }
                out(node, i, j) = acc;
            }
    }
    return out;
}

} // namespace

SymTensorField lichnerowicz_laplacian(const MetricField& g, const SymTensorField& t) {
    MetricAlgebra alg = metric_algebra(g);
    ChristoffelField gamma = christoffel(g, alg);
    CurvatureSet curv = curvature(g, alg, gamma);
    return lichnerowicz_laplacian(g, alg, gamma, curv, t);
}

SymTensorField lichnerowicz_laplacian(const MetricField& g, const MetricAlgebra& alg,
                                      const ChristoffelField& gamma,
                                      const CurvatureSet& curv, const SymTensorField& t) {
    const GridGeometry& grid = g.grid;
    const int m = grid.dim;
    SymTensorField out = rough_laplacian(g, alg, gamma, t);

    for (int node = 0; node < grid.node_count(); ++node) {
        // t^{pq} and Ric_i^p need raised indices
        double tup[2][2];
        double ricmix[2][2]; // Ric_i^p = Ric_ik g^{kp}
        for (int p = 0; p < m; ++p)
            for (int q = 0; q < m; ++q) {
                double acc = 0.0;
                for (int a = 0; a < m; ++a)
                    for (int b = 0; b < m; ++b)
                        acc += alg.inverse(node, p, a) * alg.inverse(node, q, b) * t(node, a, b);
                tup[p][q] = acc;
                double rm = 0.0;
                for (int k = 0; k < m; ++k)
                    rm += curv.ricci(node, p, k) * alg.inverse(node, k, q);
                ricmix[p][q] = rm;
            }
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                double corr = 0.0;
                for (int p = 0; p < m; ++p) {
                    for (int q = 0; q < m; ++q)
                        corr += 2.0 * curv.riemann(node, i, p, j, q) * tup[p][q];
                    corr -= ricmix[i][p] * t(node, p, j) + ricmix[j][p] * t(node, i, p);
                }
                out(node, i, j) += corr;
            }
    }
    return out;
}

ScalarCalculus scalar_calculus(const MetricField& g, const ScalarField& f) {
    MetricAlgebra alg = metric_algebra(g);
    ChristoffelField gamma = christoffel(g, alg);
    return scalar_calculus(g, alg, gamma, f);
}

ScalarCalculus scalar_calculus(const MetricField& g, const MetricAlgebra& alg,
                               const ChristoffelField& gamma, const ScalarField& f) {
    const GridGeometry& grid = g.grid;
    const int m = grid.dim;
    ScalarCalculus out{VectorField(grid), SymTensorField(grid), ScalarField(grid)};

    for (int node = 0; node < grid.node_count(); ++node) {
        int i0, j0;
        grid.unpack(node, i0, j0);
        double df[2] = {};
        for (int a = 0; a < m; ++a) {
            df[a] = fd::d1(grid, f.data, 1, 0, i0, j0, a);
            out.grad(node, a) = df[a];
        }
        double lap = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = i; j < m; ++j) {
                double h = fd::d2m(grid, f.data, 1, 0, i0, j0, i, j);
                for (int k = 0; k < m; ++k) h -= gamma(node, k, i, j) * df[k];
                out.hessian(node, i, j) = h;
                out.hessian(node, j, i) = h;
                lap += alg.inverse(node, i, j) * h * (i == j ? 1.0 : 2.0);
            }
        out.laplacian[node] = lap;
    }
    return out;
}

double integrate(const MetricAlgebra& alg, const ScalarField& f) {
    double acc = 0.0;
    for (int node = 0; node < f.grid.node_count(); ++node)
        acc += f[node] * alg.volume_weight[node];
    return acc;
}

double integrate(const MetricField& g, const ScalarField& f) {
    return integrate(metric_algebra(g), f);
}

double volume(const MetricField& g) {
    MetricAlgebra alg = metric_algebra(g);
    double acc = 0.0;
    for (int node = 0; node < g.grid.node_count(); ++node) acc += alg.volume_weight[node];
    return acc;
}

ScalarField grad_norm2(const MetricField& g, const MetricAlgebra& alg, const ScalarField& f) {
    const GridGeometry& grid = g.grid;
    const int m = grid.dim;
    ScalarField out(grid);
    for (int node = 0; node < grid.node_count(); ++node) {
        int i0, j0;
        grid.unpack(node, i0, j0);
        double df[2] = {};
        for (int a = 0; a < m; ++a) df[a] = fd::d1(grid, f.data, 1, 0, i0, j0, a);
        double acc = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) acc += alg.inverse(node, i, j) * df[i] * df[j];
        out[node] = acc;
    }
    return out;
}

ScalarField tensor_norm2(const MetricAlgebra& alg, const SymTensorField& t) {
    const GridGeometry& grid = t.grid;
    const int m = grid.dim;
    ScalarField out(grid);
    for (int node = 0; node < grid.node_count(); ++node) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                for (int k = 0; k < m; ++k)
                    for (int l = 0; l < m; ++l)
                        acc += alg.inverse(node, i, k) * alg.inverse(node, j, l) *
                               t(node, i, j) * t(node, k, l);
        out[node] = acc;
    }
    return out;
}

ScalarField riemann_norm2(const MetricAlgebra& alg, const FullCurvatureField& rm) {
    const GridGeometry& grid = rm.grid;
    const int m = grid.dim;
    ScalarField out(grid);
    for (int node = 0; node < grid.node_count(); ++node) {
        // raise all four indices once
        double up[2][2][2][2];
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                for (int k = 0; k < m; ++k)
                    for (int l = 0; l < m; ++l) {
                        double acc = 0.0;
                        for (int a = 0; a < m; ++a)
                            for (int b = 0; b < m; ++b)
                                for (int c = 0; c < m; ++c)
                                    for (int d = 0; d < m; ++d)
                                        acc += alg.inverse(node, i, a) * alg.inverse(node, j, b) *
                                               alg.inverse(node, k, c) * alg.inverse(node, l, d) *
                                               rm(node, a, b, c, d);
                        up[i][j][k][l] = acc;
                    }
        double acc = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                for (int k = 0; k < m; ++k)
                    for (int l = 0; l < m; ++l) acc += up[i][j][k][l] * rm(node, i, j, k, l);
        out[node] = acc;
    }
    return out;
}

VectorField divergence(const MetricField& g, const MetricAlgebra& alg,
                       const ChristoffelField& gamma, const SymTensorField& t) {
    const GridGeometry& grid = g.grid;
    const int m = grid.dim;
    VectorField out(grid);
    for (int node = 0; node < grid.node_count(); ++node) {
        int i0, j0;
        grid.unpack(node, i0, j0);
        for (int j = 0; j < m; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i)
                for (int k = 0; k < m; ++k) {
                    double v = fd::d1(grid, t.data, m * m, k * m + j, i0, j0, i);
                    for (int p = 0; p < m; ++p)
                        v -= gamma(node, p, i, k) * t(node, p, j) +
                             gamma(node, p, i, j) * t(node, k, p);
                    acc += alg.inverse(node, i, k) * v;
                }
            out(node, j) = acc;
        }
    }
    return out;
}

} // namespace rhflow
