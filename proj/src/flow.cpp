#include "rhflow/flow.hpp"

#include <algorithm>
#include <cmath>

namespace rhflow {

namespace {

void require_constant_background(const MetricField& g0) {
    const int mm = g0.grid.dim * g0.grid.dim;
    for (int node = 1; node < g0.grid.node_count(); ++node)
        for (int c = 0; c < mm; ++c)
            if (g0.data[static_cast<size_t>(node) * mm + c] != g0.data[c])
                throw std::invalid_argument("flow: background metric must be spatially constant");
}

} // namespace

VectorField deturck_vector(const MetricField& g, const MetricField& g0) {
    MetricAlgebra alg = metric_algebra(g);
    ChristoffelField gam = christoffel(g, alg);
    ChristoffelField gam0 = christoffel(g0);
    const GridGeometry& grid = g.grid;
    const int m = grid.dim;
    VectorField v(grid);
    for (int node = 0; node < grid.node_count(); ++node)
        for (int l = 0; l < m; ++l) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    acc += alg.inverse(node, i, j) *
                           (gam(node, l, i, j) - gam0(node, l, i, j));
            v(node, l) = acc;
        }
    return v;
}

FlowRhs flow_rhs(const FlowState& state, double alpha) {
    require_constant_background(state.background);
    const GridGeometry& grid = state.g.grid;
    const int m = grid.dim;
    const int d = state.phi.embedding_dim;
    const MetricField& g = state.g;
    const MapField& phi = state.phi;

    MetricAlgebra alg = metric_algebra(g);
    FlowRhs out{SymTensorField(grid), MapField(grid, d)};

    const int gc = m * m;
    for (int node = 0; node < grid.node_count(); ++node) {
        int i0, j0;
        grid.unpack(node, i0, j0);

        // dg[a][p][q] = d_a g_pq
        double dg[2][2][2];
        for (int a = 0; a < m; ++a)
            for (int p = 0; p < m; ++p)
                for (int q = p; q < m; ++q) {
                    const double v = fd::d1(grid, g.data, gc, p * m + q, i0, j0, a);
                    dg[a][p][q] = v;
                    dg[a][q][p] = v;
                }
        // first-kind Christoffel G1[q][i][j] = (d_i g_jq + d_j g_iq - d_q g_ij)/2
        double G1[2][2][2];
        for (int q = 0; q < m; ++q)
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    G1[q][i][j] = 0.5 * (dg[i][j][q] + dg[j][i][q] - dg[q][i][j]);

        double dphi[4][2];
        for (int lam = 0; lam < d; ++lam)
            for (int a = 0; a < m; ++a) dphi[lam][a] = fd::d1(grid, phi.data, d, lam, i0, j0, a);

        auto inv = [&](int a, int b) { return alg.inverse(node, a, b); };
        for (int i = 0; i < m; ++i)
            for (int j = i; j < m; ++j) {
                // principal part g^{kl} d_k d_l g_ij
                double acc = 0.0;
                for (int k = 0; k < m; ++k)
                    for (int l = 0; l < m; ++l)
                        acc += inv(k, l) * fd::d2m(grid, g.data, gc, i * m + j, i0, j0, k, l);

                // map forcing 2a d_i phi . d_j phi
                double dot = 0.0;
                for (int lam = 0; lam < d; ++lam) dot += dphi[lam][i] * dphi[lam][j];
                acc += 2.0 * alpha * dot;

                // quadratic first-derivative block, re-derived so that the sum
                // equals -2 Ric + L_V g exactly (the printed arrangement of
                // these terms does not; see the derivation note in the README):
                //   Q_ij = 2 g^{kq} g^{pr} G_qip G_rkj
                //          - g^{pa} g^{bq} d_i g_ab d_j g_pq
                //          - g^{pa} g^{bk} (d_i g_ab G_jpk + d_j g_ab G_ipk)
                double quad = 0.0;
                for (int a = 0; a < m; ++a)
                    for (int b = 0; b < m; ++b)
                        for (int p = 0; p < m; ++p)
                            for (int q = 0; q < m; ++q)
                                quad += 2.0 * inv(a, b) * inv(p, q) * G1[b][i][p] * G1[q][a][j] -
                                        inv(p, a) * inv(b, q) * dg[i][a][b] * dg[j][p][q] -
                                        inv(p, a) * inv(b, q) *
                                            (dg[i][a][b] * G1[j][p][q] +
                                             dg[j][a][b] * G1[i][p][q]);
                acc += quad;

                out.g_dot(node, i, j) = acc;
                out.g_dot(node, j, i) = acc;
            }

        // dphi = P( g^{kl} d_k d_l phi )
        double lap[4] = {};
        for (int lam = 0; lam < d; ++lam)
            for (int k = 0; k < m; ++k)
                for (int l = 0; l < m; ++l)
                    lap[lam] += alg.inverse(node, k, l) *
                                fd::d2m(grid, phi.data, d, lam, i0, j0, k, l);
        if (state.target.is_sphere()) {
            double p[4], pn2 = 0.0, dot = 0.0;
            for (int c = 0; c < d; ++c) {
                p[c] = phi(node, c);
                pn2 += p[c] * p[c];
            }
            for (int c = 0; c < d; ++c) dot += lap[c] * p[c];
            for (int c = 0; c < d; ++c) out.phi_dot(node, c) = lap[c] - dot / pn2 * p[c];
        } else {
            for (int c = 0; c < d; ++c) out.phi_dot(node, c) = lap[c];
        }
    }
    return out;
}

FlowRhs geometric_rhs(const FlowState& state, double alpha) {
    const GridGeometry& grid = state.g.grid;
    const int m = grid.dim;
    const int d = state.phi.embedding_dim;
    const MetricField& g = state.g;

    MetricAlgebra alg = metric_algebra(g);
    ChristoffelField gam = christoffel(g, alg);
    CurvatureSet curv = curvature(g, alg, gam);
    MapCalculus mc = map_calculus(g, alg, gam, state.phi, state.target);
    VectorField v = deturck_vector(g, state.background);

    // lower V and take the Lie derivative L_V g = nabla_i V_j + nabla_j V_i
    VectorField vlow(grid);
    for (int node = 0; node < grid.node_count(); ++node)
        for (int j = 0; j < m; ++j) {
            double acc = 0.0;
            for (int l = 0; l < m; ++l) acc += g(node, j, l) * v(node, l);
            vlow(node, j) = acc;
        }

    FlowRhs out{SymTensorField(grid), MapField(grid, d)};
    for (int node = 0; node < grid.node_count(); ++node) {
        int i0, j0;
        grid.unpack(node, i0, j0);
        for (int i = 0; i < m; ++i)
            for (int j = i; j < m; ++j) {
                double ni = fd::d1(grid, vlow.data, m, j, i0, j0, i);
                double nj = fd::d1(grid, vlow.data, m, i, i0, j0, j);
                for (int p = 0; p < m; ++p)
                    ni -= gam(node, p, i, j) * vlow(node, p),
                        nj -= gam(node, p, j, i) * vlow(node, p);
                const double val = -2.0 * curv.ricci(node, i, j) +
                                   2.0 * alpha * mc.outer(node, i, j) + ni + nj;
                out.g_dot(node, i, j) = val;
                out.g_dot(node, j, i) = val;
            }
        for (int lam = 0; lam < d; ++lam) {
            double adv = 0.0;
            for (int p = 0; p < m; ++p) adv += mc.grad_at(node, lam, p) * v(node, p);
            out.phi_dot(node, lam) = mc.tension_at(node, lam) + adv;
        }
    }
    return out;
}

double cfl_dt(const MetricField& g, double safety) {
    const int m = g.grid.dim;
    MetricAlgebra alg = metric_algebra(g);
    double max_eig = 0.0;
    for (int node = 0; node < g.grid.node_count(); ++node) {
        double eig;
        if (m == 1) {
            eig = alg.inverse(node, 0, 0);
        } else {
            const double a = alg.inverse(node, 0, 0), b = alg.inverse(node, 0, 1),
                         c = alg.inverse(node, 1, 1);
            eig = 0.5 * (a + c) + std::sqrt(0.25 * (a - c) * (a - c) + b * b);
        }
        max_eig = std::max(max_eig, eig);
    }
    const double h = g.grid.spacing();
    return safety * h * h / max_eig;
}

FlowState flow_step(const FlowState& state, double dt, const CouplingSchedule& schedule) {
    auto axpy = [](FlowState base, double s, const FlowRhs& k) {
        for (size_t i = 0; i < base.g.data.size(); ++i) base.g.data[i] += s * k.g_dot.data[i];
        for (size_t i = 0; i < base.phi.data.size(); ++i)
            base.phi.data[i] += s * k.phi_dot.data[i];
        base.t += s;
        return base;
    };

    try {
        const FlowRhs k1 = flow_rhs(state, schedule.value(state.t));
        FlowState s2 = axpy(state, 0.5 * dt, k1);
        const FlowRhs k2 = flow_rhs(s2, schedule.value(state.t + 0.5 * dt));
        FlowState s3 = axpy(state, 0.5 * dt, k2);
        const FlowRhs k3 = flow_rhs(s3, schedule.value(state.t + 0.5 * dt));
        FlowState s4 = axpy(state, dt, k3);
        const FlowRhs k4 = flow_rhs(s4, schedule.value(state.t + dt));

        FlowState out = state;
        out.t = state.t + dt;
        for (size_t i = 0; i < out.g.data.size(); ++i)
            out.g.data[i] += dt / 6.0 *
                             (k1.g_dot.data[i] + 2.0 * k2.g_dot.data[i] +
                              2.0 * k3.g_dot.data[i] + k4.g_dot.data[i]);
        for (size_t i = 0; i < out.phi.data.size(); ++i)
            out.phi.data[i] += dt / 6.0 *
                               (k1.phi_dot.data[i] + 2.0 * k2.phi_dot.data[i] +
                                2.0 * k3.phi_dot.data[i] + k4.phi_dot.data[i]);
        project_to_target(out.phi, out.target);
        if (min_metric_eigenvalue(out.g) <= 1e-8)
            throw StepRejected("flow_step: metric lost positivity", 0.5 * dt);
        return out;
    } catch (const FieldError&) {
        throw StepRejected("flow_step: stage metric lost positivity", 0.5 * dt);
    }
}

StateDiagnostics state_diagnostics(const FlowState& state, double alpha) {
    MetricAlgebra alg = metric_algebra(state.g);
    ChristoffelField gam = christoffel(state.g, alg);
    CurvatureSet curv = curvature(state.g, alg, gam);
    MapCalculus mc = map_calculus(state.g, alg, gam, state.phi, state.target);
    SFields sf = s_fields(alg, curv, mc, alpha);

    StateDiagnostics d{};
    d.vol = 0.0;
    for (int node = 0; node < state.g.grid.node_count(); ++node)
        d.vol += alg.volume_weight[node];
    d.s_min = *std::min_element(sf.trace.data.begin(), sf.trace.data.end());
    d.s_max = *std::max_element(sf.trace.data.begin(), sf.trace.data.end());
    d.sup_grad_phi2 = *std::max_element(mc.energy_density.data.begin(),
                                        mc.energy_density.data.end());
    ScalarField rm2 = riemann_norm2(alg, curv.riemann);
    double worst = 0.0;
    for (double x : rm2.data) worst = std::max(worst, x);
    d.sup_riemann = std::sqrt(worst);
    ScalarField h2 = mc.hessian_norm2(alg);
    d.sup_hess_phi2 = *std::max_element(h2.data.begin(), h2.data.end());
    return d;
}

Trajectory run_flow(const FlowState& initial, const CouplingSchedule& schedule,
                    const RunOptions& options) {
    Trajectory traj;
    traj.target = initial.target;
    traj.background = initial.background;
    traj.schedule = schedule;
    traj.options = options;

    double dt = options.dt_policy == DtPolicy::Fixed ? options.dt
                                                     : cfl_dt(initial.g, options.cfl_safety);
    if (!(dt > 0.0)) throw std::invalid_argument("run_flow: dt must be positive");
    traj.dt_used = dt;

    auto record_diag = [&](const FlowState& s) {
        const StateDiagnostics d = state_diagnostics(s, schedule.value(s.t));
        traj.diagnostics.t.push_back(s.t);
        traj.diagnostics.vol.push_back(d.vol);
        traj.diagnostics.s_min.push_back(d.s_min);
        traj.diagnostics.s_max.push_back(d.s_max);
        traj.diagnostics.sup_grad_phi2.push_back(d.sup_grad_phi2);
        traj.diagnostics.sup_riemann.push_back(d.sup_riemann);
        traj.diagnostics.sup_hess_phi2.push_back(d.sup_hess_phi2);
        return d;
    };

    FlowState s = initial;
    project_to_target(s.phi, s.target);
    traj.samples.push_back(s);
    if (options.on_sample) options.on_sample(s, 0);
    record_diag(s);

    int step_index = 0;
    while (s.t < options.t_end - 1e-14) {
        const double h = std::min(dt, options.t_end - s.t);
        FlowState next;
        double try_dt = h;
        bool accepted = false;
        while (!accepted) {
            try {
                next = flow_step(s, try_dt, schedule);
                accepted = true;
            } catch (const StepRejected& rej) {
                try_dt = rej.suggested_dt;
                if (try_dt < 1e-10) {
                    SingularityReport rep;
                    rep.t = s.t;
                    rep.reason = "spd-loss";
                    const StateDiagnostics d = state_diagnostics(s, schedule.value(s.t));
                    rep.sup_riemann = d.sup_riemann;
                    rep.sup_energy = d.sup_grad_phi2;
                    traj.singularity = rep;
                    return traj;
                }
            }
        }
        s = next;
        ++step_index;

        const bool sample_now = (step_index % options.sample_stride == 0) ||
                                !(s.t < options.t_end - 1e-14);
        StateDiagnostics d{};
        bool have_diag = false;
        if (step_index % options.diagnostics_stride == 0 || sample_now) {
            d = record_diag(s);
            have_diag = true;
        }
        if (sample_now) {
            traj.samples.push_back(s);
            if (options.on_sample)
                options.on_sample(s, static_cast<int>(traj.samples.size()) - 1);
        }
        if (have_diag &&
            (d.sup_riemann > options.riemann_blowup || d.sup_grad_phi2 > options.energy_blowup)) {
            SingularityReport rep;
            rep.t = s.t;
            rep.reason = d.sup_riemann > options.riemann_blowup ? "riemann-blowup"
                                                                : "energy-blowup";
            rep.sup_riemann = d.sup_riemann;
            rep.sup_energy = d.sup_grad_phi2;
            traj.singularity = rep;
            if (!sample_now) traj.samples.push_back(s);
            return traj;
        }
        if (options.dt_policy == DtPolicy::Auto) dt = cfl_dt(s.g, options.cfl_safety);
    }
    return traj;
}

} // namespace rhflow
