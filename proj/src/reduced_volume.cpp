#include "rhflow/reduced_volume.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rhflow/util.hpp"

namespace rhflow {

namespace {

// Catmull-Rom basis and derivative at fractional position u in [0,1).
inline void cr_basis(double u, double b[4], double db[4]) {
    const double u2 = u * u, u3 = u2 * u;
    b[0] = 0.5 * (-u + 2.0 * u2 - u3);
    b[1] = 0.5 * (2.0 - 5.0 * u2 + 3.0 * u3);
    b[2] = 0.5 * (u + 4.0 * u2 - 3.0 * u3);
    b[3] = 0.5 * (-u2 + u3);
    db[0] = 0.5 * (-1.0 + 4.0 * u - 3.0 * u2);
    db[1] = 0.5 * (-10.0 * u + 9.0 * u2);
    db[2] = 0.5 * (1.0 + 8.0 * u - 9.0 * u2);
    db[3] = 0.5 * (-2.0 * u + 3.0 * u2);
}

struct BBOptions {
    int max_iterations = 400;
    double stat_tol = 1e-6;
};

// Barzilai-Borwein descent with Armijo backtracking on a generic objective
// over flat coordinates. Returns (value, converged, grad_norm).
template <typename Objective>
std::tuple<double, bool, double> bb_minimize(std::vector<double>& x, Objective&& eval,
                                             const BBOptions& opt) {
    const size_t n = x.size();
    std::vector<double> grad(n), gprev(n), xprev(n), cand(n), gcand(n);
    double fx = eval(x, &grad);
    double step = 0.5;
    double gnorm = 0.0;
    bool converged = false;
    for (int it = 0; it < opt.max_iterations; ++it) {
        double g2 = 0.0;
        for (double gi : grad) g2 += gi * gi;
        gnorm = std::sqrt(g2);
        if (gnorm <= opt.stat_tol) {
            converged = true;
            break;
        }
        if (it > 0) {
            double sy = 0.0, ss = 0.0;
            for (size_t i = 0; i < n; ++i) {
                const double s = x[i] - xprev[i];
                const double y = grad[i] - gprev[i];
                sy += s * y;
                ss += s * s;
            }
            if (sy > 0.0) step = std::min(1e3, std::max(1e-10, ss / sy));
        }
        xprev = x;
        gprev = grad;
        double eta = step;
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls) {
            for (size_t i = 0; i < n; ++i) cand[i] = x[i] - eta * grad[i];
            const double fc = eval(cand, &gcand);
            if (fc <= fx - 1e-4 * eta * g2) {
                x = cand;
                fx = fc;
                grad = gcand;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) break;
    }
    return {fx, converged, gnorm};
}

} // namespace

GridReducedVolume::GridReducedVolume(const Trajectory& traj, int base_index,
                                     std::array<double, 2> base_point)
    : grid_(traj.samples.at(base_index).g.grid), base_(base_point) {
    t_base_ = traj.samples[base_index].t;
    for (int k = 0; k <= base_index; ++k) {
        const FlowState& s = traj.samples[k];
        times_.push_back(s.t);
        const double alpha = traj.schedule.value(s.t);
        SFields sf = s_fields(s.g, s.phi, s.target, alpha);
        s_fields_.push_back(sf.trace);
        metrics_.push_back(s.g);
    }
}

void GridReducedVolume::bracket(double tau, int& k0, int& k1, double& w1) const {
    const double t = t_base_ - tau;
    if (times_.size() == 1 || t >= times_.back()) {
        k0 = k1 = static_cast<int>(times_.size()) - 1;
        w1 = 0.0;
        return;
    }
    if (t <= times_.front()) {
        k0 = k1 = 0;
        w1 = 0.0;
        return;
    }
    int lo = 0, hi = static_cast<int>(times_.size()) - 1;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        (times_[mid] <= t ? lo : hi) = mid;
    }
    k0 = lo;
    k1 = hi;
    w1 = (t - times_[lo]) / (times_[hi] - times_[lo]);
}

GridReducedVolume::Spatial GridReducedVolume::interp_scalar(const std::vector<double>& a,
                                                            int comps, int c,
                                                            const std::array<double, 2>& x) const {
    const double h = grid_.spacing();
    const int m = grid_.dim;
    double bx[4], dbx[4], by[4] = {1, 0, 0, 0}, dby[4] = {0, 0, 0, 0};
    const double sx = x[0] / h;
    const int ix = static_cast<int>(std::floor(sx));
    cr_basis(sx - ix, bx, dbx);
    int iy = 0;
    if (m == 2) {
        const double sy = x[1] / h;
        iy = static_cast<int>(std::floor(sy));
        cr_basis(sy - iy, by, dby);
    }
    Spatial out{0.0, {0.0, 0.0}};
    for (int s = 0; s < 4; ++s) {
        const int ii = ix + s - 1;
        for (int t = 0; t < (m == 2 ? 4 : 1); ++t) {
            const int jj = iy + t - 1;
            const double v = a[static_cast<size_t>(grid_.index(ii, jj)) * comps + c];
            out.value += bx[s] * by[t] * v;
            out.grad[0] += dbx[s] * by[t] * v / h;
            if (m == 2) out.grad[1] += bx[s] * dby[t] * v / h;
        }
    }
    return out;
}

double GridReducedVolume::S_at(const std::array<double, 2>& x, double tau) const {
    int k0, k1;
    double w1;
    bracket(tau, k0, k1, w1);
    const double v0 = interp_scalar(s_fields_[k0].data, 1, 0, x).value;
    if (k0 == k1) return v0;
    const double v1 = interp_scalar(s_fields_[k1].data, 1, 0, x).value;
    return (1.0 - w1) * v0 + w1 * v1;
}

void GridReducedVolume::metric_at(const std::array<double, 2>& x, double tau,
                                  double out[2][2]) const {
    int k0, k1;
    double w1;
    bracket(tau, k0, k1, w1);
    const int m = grid_.dim;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const double v0 = interp_scalar(metrics_[k0].data, m * m, i * m + j, x).value;
            const double v1 =
                k0 == k1 ? v0 : interp_scalar(metrics_[k1].data, m * m, i * m + j, x).value;
            out[i][j] = (1.0 - w1) * v0 + w1 * v1;
        }
}

double GridReducedVolume::objective(const DiscretePath& path,
                                    std::vector<std::array<double, 2>>* grad) const {
    const int K = path.segments();
    const int m = grid_.dim;
    const double lam_end = std::sqrt(path.tau1);
    const double dlam = lam_end / K;
    if (grad) grad->assign(path.nodes.size(), {0.0, 0.0});

    double L = 0.0;
    for (int k = 0; k < K; ++k) {
        const double lam_mid = (k + 0.5) * dlam;
        const double tau_mid = lam_mid * lam_mid;
        std::array<double, 2> mid{}, v{};
        for (int a = 0; a < m; ++a) {
            mid[a] = 0.5 * (path.nodes[k][a] + path.nodes[k + 1][a]);
            v[a] = (path.nodes[k + 1][a] - path.nodes[k][a]) / dlam;
        }
        int k0, k1;
        double w1;
        bracket(tau_mid, k0, k1, w1);

        Spatial Sv = interp_scalar(s_fields_[k0].data, 1, 0, mid);
        if (k0 != k1) {
            const Spatial S1 = interp_scalar(s_fields_[k1].data, 1, 0, mid);
            Sv.value = (1.0 - w1) * Sv.value + w1 * S1.value;
            for (int a = 0; a < m; ++a)
                Sv.grad[a] = (1.0 - w1) * Sv.grad[a] + w1 * S1.grad[a];
        }

        double gmat[2][2] = {{0, 0}, {0, 0}};
        double dgmat[2][2][2] = {};
        for (int i = 0; i < m; ++i)
            for (int j = i; j < m; ++j) {
                Spatial gij = interp_scalar(metrics_[k0].data, m * m, i * m + j, mid);
                if (k0 != k1) {
                    const Spatial g1 = interp_scalar(metrics_[k1].data, m * m, i * m + j, mid);
                    gij.value = (1.0 - w1) * gij.value + w1 * g1.value;
                    for (int a = 0; a < m; ++a)
                        gij.grad[a] = (1.0 - w1) * gij.grad[a] + w1 * g1.grad[a];
                }
                gmat[i][j] = gmat[j][i] = gij.value;
                for (int a = 0; a < m; ++a) dgmat[a][i][j] = dgmat[a][j][i] = gij.grad[a];
            }

        double kinetic = 0.0;
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) kinetic += gmat[a][b] * v[a] * v[b];
        L += dlam * (2.0 * tau_mid * Sv.value + 0.5 * kinetic);

        if (grad) {
            for (int a = 0; a < m; ++a) {
                double dkin_da = 0.0;
                for (int b = 0; b < m; ++b)
                    for (int c = 0; c < m; ++c) dkin_da += dgmat[a][b][c] * v[b] * v[c];
                const double mid_term =
                    0.5 * dlam * (2.0 * tau_mid * Sv.grad[a] + 0.5 * dkin_da);
                double vel_term = 0.0;
                for (int b = 0; b < m; ++b) vel_term += gmat[a][b] * v[b];
                (*grad)[k][a] += mid_term - vel_term;
                (*grad)[k + 1][a] += mid_term + vel_term;
            }
        }
    }
    if (grad) {
        (*grad)[0] = {0.0, 0.0};
        (*grad)[K] = {0.0, 0.0};
    }
    return L;
}

double GridReducedVolume::lb_length(const DiscretePath& path) const {
    if (times_.size() >= 2 && path.tau1 > max_tau() + 1e-12)
        throw std::invalid_argument("lb_length: path exits the covered time range");
    return objective(path, nullptr);
}

DistanceResult GridReducedVolume::reduced_distance(std::array<double, 2> q, double tau1,
                                                   int segments, unsigned seed,
                                                   double stat_tol) const {
    if (segments < 16) segments = 16;
    if (!(tau1 > 0.0) || (times_.size() >= 2 && tau1 > max_tau() + 1e-12))
        throw std::invalid_argument("reduced_distance: tau1 outside the covered time range");
    const int m = grid_.dim;
    const double L = grid_.period;

    // minimal-image displacement from the base point
    std::array<double, 2> disp{};
    for (int a = 0; a < m; ++a) {
        double da = q[a] - base_[a];
        da -= L * std::round(da / L);
        disp[a] = da;
    }

    DistanceResult best;
    best.length = std::numeric_limits<double>::infinity();
    const int n_seeds = 5;
    for (int s = 0; s < n_seeds; ++s) {
        DiscretePath path;
        path.tau1 = tau1;
        path.nodes.resize(segments + 1);
        uint64_t rng = mix_seed(seed, s);
        auto next_unit = [&rng]() {
            rng = mix_seed(rng, 1);
            return static_cast<double>(rng >> 11) * 0x1.0p-53;
        };
        const double amp =
            s == 0 ? 0.0
                   : 0.15 * (std::sqrt(disp[0] * disp[0] + disp[1] * disp[1]) + grid_.spacing());
        double dir[2] = {1.0, 0.0};
        if (s > 0 && m == 2) {
            const double ang = two_pi * next_unit();
            dir[0] = std::cos(ang);
            dir[1] = std::sin(ang);
        }
        for (int k = 0; k <= segments; ++k) {
            const double frac = static_cast<double>(k) / segments;
            for (int a = 0; a < m; ++a)
                path.nodes[k][a] = base_[a] + frac * disp[a] +
                                   amp * std::sin(M_PI * frac) * dir[a];
        }

        // flatten interior nodes for the generic optimizer
        std::vector<double> x(static_cast<size_t>(segments - 1) * m);
        for (int k = 1; k < segments; ++k)
            for (int a = 0; a < m; ++a) x[(k - 1) * m + a] = path.nodes[k][a];

        DiscretePath work = path;
        std::vector<std::array<double, 2>> pgrad;
        auto eval = [&](const std::vector<double>& xs, std::vector<double>* gs) {
            for (int k = 1; k < segments; ++k)
                for (int a = 0; a < m; ++a) work.nodes[k][a] = xs[(k - 1) * m + a];
            const double val = objective(work, gs ? &pgrad : nullptr);
            if (gs)
                for (int k = 1; k < segments; ++k)
                    for (int a = 0; a < m; ++a) (*gs)[(k - 1) * m + a] = pgrad[k][a];
            return val;
        };
        BBOptions opt;
        opt.stat_tol = stat_tol;
        auto [val, conv, gn] = bb_minimize(x, eval, opt);
        if (val < best.length) {
            for (int k = 1; k < segments; ++k)
                for (int a = 0; a < m; ++a) work.nodes[k][a] = x[(k - 1) * m + a];
            best.length = val;
            best.converged = conv;
            best.grad_norm = gn;
            best.path = work;
        }
    }
    best.lb = best.length / (2.0 * std::sqrt(tau1));
    return best;
}

double GridReducedVolume::reduced_volume(double tau1, int segments, unsigned seed) const {
    const int m = grid_.dim;
    const int nodes = grid_.node_count();
    std::vector<double> lb(nodes);
    parallel_for(nodes, [&](int node) {
        int i, j;
        grid_.unpack(node, i, j);
        std::array<double, 2> q{grid_.coord(i), m == 2 ? grid_.coord(j) : 0.0};
        lb[node] = reduced_distance(q, tau1, segments, static_cast<unsigned>(mix_seed(seed, node)))
                       .lb;
    });

    // dV at backward time tau1
    int k0, k1;
    double w1;
    bracket(tau1, k0, k1, w1);
    double hm = 1.0;
    for (int a = 0; a < m; ++a) hm *= grid_.spacing();
    double acc = 0.0;
    for (int node = 0; node < nodes; ++node) {
        double det;
        if (m == 1) {
            det = (1.0 - w1) * metrics_[k0](node, 0, 0) + w1 * metrics_[k1](node, 0, 0);
        } else {
            double gm[2][2];
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    gm[i][j] = (1.0 - w1) * metrics_[k0](node, i, j) +
                               w1 * metrics_[k1](node, i, j);
            det = gm[0][0] * gm[1][1] - gm[0][1] * gm[1][0];
        }
        acc += std::pow(4.0 * M_PI * tau1, -0.5 * m) * std::exp(-lb[node]) *
               std::sqrt(det) * hm;
    }
    return acc;
}

// ---------------------------------------------------------------------------

SphereReducedVolume::SphereReducedVolume(const HomTrajectory& traj, double t_base)
    : t_base_(t_base) {
    if (traj.model != ModelKind::Sphere2)
        throw std::invalid_argument("SphereReducedVolume: needs a Sphere2 trajectory");
    for (const HomogeneousState& s : traj.samples) {
        if (s.t > t_base + 1e-12) break;
        times_.push_back(s.t);
        c_.push_back(s.c);
        S_.push_back(hom_geometry(traj.model, s).S);
    }
    if (times_.empty() || times_.back() < t_base - 1e-9)
        throw std::invalid_argument("SphereReducedVolume: trajectory does not reach t_base");
}

namespace {
double lin_interp(const std::vector<double>& ts, const std::vector<double>& vs, double t) {
    if (t <= ts.front()) return vs.front();
    if (t >= ts.back()) return vs.back();
    int lo = 0, hi = static_cast<int>(ts.size()) - 1;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        (ts[mid] <= t ? lo : hi) = mid;
    }
    const double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
    return (1.0 - w) * vs[lo] + w * vs[hi];
}
} // namespace

double SphereReducedVolume::c_at(double tau) const { return lin_interp(times_, c_, t_base_ - tau); }
double SphereReducedVolume::S_at(double tau) const { return lin_interp(times_, S_, t_base_ - tau); }

double SphereReducedVolume::objective(const std::vector<double>& theta, double tau1,
                                      std::vector<double>* grad) const {
    const int K = static_cast<int>(theta.size()) - 1;
    const double dlam = std::sqrt(tau1) / K;
    if (grad) grad->assign(theta.size(), 0.0);
    double L = 0.0;
    for (int k = 0; k < K; ++k) {
        const double lam_mid = (k + 0.5) * dlam;
        const double tau_mid = lam_mid * lam_mid;
        const double c = c_at(tau_mid);
        const double S = S_at(tau_mid);
        const double v = (theta[k + 1] - theta[k]) / dlam;
        L += dlam * (2.0 * tau_mid * S + 0.5 * c * v * v);
        if (grad) {
            (*grad)[k] -= c * v;
            (*grad)[k + 1] += c * v;
        }
    }
    if (grad) {
        (*grad)[0] = 0.0;
        (*grad)[K] = 0.0;
    }
    return L;
}

double SphereReducedVolume::lb_length(const std::vector<double>& theta_nodes,
                                      double tau1) const {
    return objective(theta_nodes, tau1, nullptr);
}

DistanceResult SphereReducedVolume::reduced_distance(double theta_q, double tau1, int segments,
                                                     double stat_tol) const {
    if (segments < 16) segments = 16;
    std::vector<double> x(segments + 1);
    for (int k = 0; k <= segments; ++k) x[k] = theta_q * k / segments;

    std::vector<double> inner(segments - 1);
    for (int k = 1; k < segments; ++k) inner[k - 1] = x[k];
    std::vector<double> full = x, fgrad;
    auto eval = [&](const std::vector<double>& xs, std::vector<double>* gs) {
        for (int k = 1; k < segments; ++k) full[k] = xs[k - 1];
        const double val = objective(full, tau1, gs ? &fgrad : nullptr);
        if (gs)
            for (int k = 1; k < segments; ++k) (*gs)[k - 1] = fgrad[k];
        return val;
    };
    BBOptions opt;
    opt.stat_tol = stat_tol;
    opt.max_iterations = 2000;
    auto [val, conv, gn] = bb_minimize(inner, eval, opt);

    DistanceResult out;
    out.length = val;
    out.lb = val / (2.0 * std::sqrt(tau1));
    out.converged = conv;
    out.grad_norm = gn;
    return out;
}

double SphereReducedVolume::reduced_volume(double tau1, int segments, int theta_nodes) const {
    if (theta_nodes % 2 == 0) ++theta_nodes; // Simpson needs an even interval count
    const double dtheta = M_PI / (theta_nodes - 1);
    std::vector<double> integrand(theta_nodes);
    parallel_for(theta_nodes, [&](int k) {
        const double theta = k * dtheta;
        const double lb = reduced_distance(theta, tau1, segments).lb;
        integrand[k] = std::exp(-lb) * std::sin(theta);
    });
    double I = 0.0;
    for (int k = 0; k < theta_nodes; ++k) {
        const double w = (k == 0 || k == theta_nodes - 1) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        I += w * integrand[k];
    }
    I *= dtheta / 3.0;
    const double c = c_at(tau1);
    return std::pow(4.0 * M_PI * tau1, -1.0) * c * 2.0 * M_PI * I;
}

} // namespace rhflow
