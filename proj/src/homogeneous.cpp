#include "rhflow/homogeneous.hpp"

#include <cmath>
#include <stdexcept>

namespace rhflow {

HomRates model_rhs(ModelKind model, const HomogeneousState& s, bool normalized) {
    const double a = s.alpha;
    HomRates r;
    if (model == ModelKind::Sphere2) {
        r.c_dot = normalized ? 0.0 : -2.0 + 2.0 * a;
        return r;
    }
    if (!normalized) {
        r.c_dot = -2.0 + 2.0 * a;
        r.d_dot = 2.0 + 2.0 * a;
    } else {
        r.c_dot = (a - 1.0) - (a + 1.0) * s.c * s.c;
        r.d_dot = (a + 1.0) - (a - 1.0) * s.d * s.d;
    }
    return r;
}

HomogeneousState closed_form(ModelKind model, bool normalized, double alpha, double t) {
    HomogeneousState s;
    s.t = t;
    s.alpha = alpha;
    if (model == ModelKind::Sphere2) {
        s.c = normalized ? 1.0 : 1.0 + (2.0 * alpha - 2.0) * t;
        return s;
    }
    if (!normalized) {
        s.c = 1.0 + (2.0 * alpha - 2.0) * t;
        s.d = 1.0 + (2.0 * alpha + 2.0) * t;
        return s;
    }
    if (alpha == 1.0) {
        s.c = 1.0 / (1.0 + 2.0 * t);
        s.d = 1.0 + 2.0 * t;
        return s;
    }
    throw NoClosedForm("closed_form: normalized product has no elementary form for alpha != 1");
}

HomGeometry hom_geometry(ModelKind model, const HomogeneousState& s) {
    HomGeometry g;
    const double a = s.alpha;
    if (model == ModelKind::Sphere2) {
        // round sphere of Gauss curvature 1/c, phi = id into the unit-curvature
        // reference: R = 2/c, |grad phi|^2 = 2/c, Ric = (1/c) g
        g.scalar_curvature = 2.0 / s.c;
        g.energy_density = 2.0 / s.c;
        g.S = g.scalar_curvature - a * g.energy_density;
        g.volume = s.c;
        g.ricci_eigenvalues = {1.0 / s.c};
        g.s_eigenvalues = {(1.0 - a) / s.c};
        g.s_norm2 = 2.0 * g.s_eigenvalues[0] * g.s_eigenvalues[0];
        g.sup_riemann = 2.0 / s.c;
        return g;
    }
    // S^2 x L with Gauss curvatures +1/c and -1/d
    g.scalar_curvature = 2.0 / s.c - 2.0 / s.d;
    g.energy_density = 2.0 / s.c + 2.0 / s.d;
    g.S = g.scalar_curvature - a * g.energy_density;
    g.volume = s.c * s.d;
    g.ricci_eigenvalues = {1.0 / s.c, -1.0 / s.d};
    g.s_eigenvalues = {(1.0 - a) / s.c, -(1.0 + a) / s.d};
    g.s_norm2 = 2.0 * g.s_eigenvalues[0] * g.s_eigenvalues[0] +
                2.0 * g.s_eigenvalues[1] * g.s_eigenvalues[1];
    g.sup_riemann = std::sqrt(4.0 / (s.c * s.c) + 4.0 / (s.d * s.d));
    return g;
}

double hom_S_dot(ModelKind model, const HomogeneousState& s, bool normalized) {
    const HomRates r = model_rhs(model, s, normalized);
    const double a = s.alpha;
    if (model == ModelKind::Sphere2) {
        // S = (2 - 2a)/c
        return -(2.0 - 2.0 * a) * r.c_dot / (s.c * s.c);
    }
    // S = (2-2a)/c - (2+2a)/d
    return -(2.0 - 2.0 * a) * r.c_dot / (s.c * s.c) +
           (2.0 + 2.0 * a) * r.d_dot / (s.d * s.d);
}

HomogeneousState hom_step(ModelKind model, const CouplingSchedule& schedule,
                          const HomogeneousState& s, double h, bool normalized) {
    auto eval = [&](const HomogeneousState& u) { return model_rhs(model, u, normalized); };
    auto at = [&](const HomogeneousState& base, double dt_frac, const HomRates& k) {
        HomogeneousState u = base;
        u.t = base.t + dt_frac;
        u.c = base.c + dt_frac * k.c_dot;
        u.d = base.d + dt_frac * k.d_dot;
        u.alpha = schedule.value(u.t);
        return u;
    };
    HomogeneousState s0 = s;
    s0.alpha = schedule.value(s.t);
    const HomRates k1 = eval(s0);
    const HomRates k2 = eval(at(s0, 0.5 * h, k1));
    const HomRates k3 = eval(at(s0, 0.5 * h, k2));
    const HomRates k4 = eval(at(s0, h, k3));
    HomogeneousState out = s0;
    out.t = s0.t + h;
    out.c = s0.c + h / 6.0 * (k1.c_dot + 2.0 * k2.c_dot + 2.0 * k3.c_dot + k4.c_dot);
    out.d = s0.d + h / 6.0 * (k1.d_dot + 2.0 * k2.d_dot + 2.0 * k3.d_dot + k4.d_dot);
    out.alpha = schedule.value(out.t);
    return out;
}

namespace {

double min_scale(ModelKind model, const HomogeneousState& s) {
    return model == ModelKind::Sphere2 ? s.c : std::min(s.c, s.d);
}

} // namespace

HomTrajectory integrate_model(ModelKind model, const CouplingSchedule& schedule,
                              double t_end, double dt, bool normalized) {
    if (!(dt > 0.0)) throw std::invalid_argument("integrate_model: dt must be positive");
    HomTrajectory traj;
    traj.model = model;
    traj.normalized = normalized;
    traj.schedule = schedule;
    traj.dt = dt;

    HomogeneousState s;
    s.alpha = schedule.value(0.0);
    traj.samples.push_back(s);

    const int steps = static_cast<int>(std::ceil(t_end / dt - 1e-12));
    for (int k = 0; k < steps; ++k) {
        const double h = std::min(dt, t_end - s.t);
        if (h <= 0.0) break;
        HomogeneousState next = hom_step(model, schedule, s, h, normalized);
        if (min_scale(model, next) <= eps_extinction) {
            // bisect the crossing of (scale - eps_ext) inside [s.t, s.t + h]
            double lo = 0.0, hi = h;
            for (int it = 0; it < 200 && (hi - lo) > 1e-10 * std::max(1.0, dt); ++it) {
                const double mid = 0.5 * (lo + hi);
                HomogeneousState probe = hom_step(model, schedule, s, mid, normalized);
                (min_scale(model, probe) <= eps_extinction ? hi : lo) = mid;
            }
            HomogeneousState hit = hom_step(model, schedule, s, hi, normalized);
            SingularityEvent ev;
            ev.t_extinct = hit.t;
            const HomRates r = model_rhs(model, hit, normalized);
            if (model != ModelKind::Sphere2 && hit.d < hit.c) {
                ev.factor = "d";
                ev.t_sing = hit.t + (r.d_dot < 0.0 ? hit.d / -r.d_dot : 0.0);
            } else {
                ev.factor = "c";
                ev.t_sing = hit.t + (r.c_dot < 0.0 ? hit.c / -r.c_dot : 0.0);
            }
            traj.samples.push_back(hit);
            traj.singularity = ev;
            return traj;
        }
        s = next;
        traj.samples.push_back(s);
    }

    const HomRates r_end = model_rhs(model, s, normalized);
    if (std::abs(r_end.c_dot) < 1e-10 &&
        (model == ModelKind::Sphere2 || std::abs(r_end.d_dot) < 1e-10)) {
        traj.fixed_point = FixedPointEvent{s.t, s.c, s.d};
    }
    return traj;
}

HomTrajectory renormalize(const HomTrajectory& traj) {
    const int m = model_dim(traj.model);
    const size_t n = traj.samples.size();
    HomTrajectory out;
    out.model = traj.model;
    out.normalized = true;
    out.schedule = traj.schedule;
    out.dt = traj.dt;
    out.singularity = traj.singularity;
    out.samples.resize(n);

    std::vector<double> lambda(n);
    for (size_t k = 0; k < n; ++k) {
        const HomGeometry g = hom_geometry(traj.model, traj.samples[k]);
        lambda[k] = std::pow(g.volume, -2.0 / m);
    }
    // tbar(t) = int_0^t lambda; trapezoid with one Richardson pass over pairs
    // (Simpson on the uniformly sampled interior, trapezoid on a ragged tail).
    std::vector<double> tbar(n, 0.0);
    for (size_t k = 1; k < n; ++k) {
        const double h = traj.samples[k].t - traj.samples[k - 1].t;
        if (k + 1 < n) {
            const double h2 = traj.samples[k + 1].t - traj.samples[k].t;
            if (std::abs(h2 - h) < 1e-12 * std::max(1.0, h)) {
                // Simpson over the pair, then split: gives 4th-order cumulative
                const double simpson =
                    (lambda[k - 1] + 4.0 * lambda[k] + lambda[k + 1]) * h / 3.0;
                const double left =
                    h / 12.0 * (5.0 * lambda[k - 1] + 8.0 * lambda[k] - lambda[k + 1]);
                tbar[k] = tbar[k - 1] + left;
                tbar[k + 1] = tbar[k - 1] + simpson;
                ++k;
                continue;
            }
        }
        if (k >= 2) {
            const double hprev = traj.samples[k - 1].t - traj.samples[k - 2].t;
            if (std::abs(hprev - h) < 1e-12 * std::max(1.0, h)) {
                // right-sided 3-point rule on a uniform tail interval
                tbar[k] = tbar[k - 1] +
                          h / 12.0 * (-lambda[k - 2] + 8.0 * lambda[k - 1] + 5.0 * lambda[k]);
                continue;
            }
        }
        tbar[k] = tbar[k - 1] + 0.5 * h * (lambda[k - 1] + lambda[k]);
    }

    for (size_t k = 0; k < n; ++k) {
        HomogeneousState s = traj.samples[k];
        HomogeneousState& o = out.samples[k];
        o.t = tbar[k];
        o.c = lambda[k] * s.c;
        o.d = lambda[k] * s.d;
        o.alpha = s.alpha;
    }
    return out;
}

BreatherReport breather_scan(const HomTrajectory& traj, double tol, int max_samples) {
    BreatherReport report;
    const size_t n = traj.samples.size();
    if (n < 2) return report;
    const size_t stride = std::max<size_t>(1, n / static_cast<size_t>(max_samples));

    std::vector<size_t> idx;
    for (size_t k = 0; k < n; k += stride) idx.push_back(k);
    if (idx.back() != n - 1) idx.push_back(n - 1);

    for (size_t a = 0; a < idx.size(); ++a)
        for (size_t b = a + 1; b < idx.size(); ++b) {
            const HomogeneousState& s1 = traj.samples[idx[a]];
            const HomogeneousState& s2 = traj.samples[idx[b]];
            ++report.pairs_tested;
            const double scale_c = s2.c / s1.c;
            if (traj.model == ModelKind::ProductS2L) {
                const double scale_d = s2.d / s1.d;
                if (std::abs(scale_c - scale_d) > tol * std::max(scale_c, scale_d)) continue;
            }
            BreatherPair p;
            p.t1 = s1.t;
            p.t2 = s2.t;
            p.scale = scale_c;
            p.kind = scale_c < 1.0 - tol ? "shrinking"
                     : scale_c > 1.0 + tol ? "expanding"
                                           : "steady";
            report.pairs.push_back(p);
        }
    return report;
}

} // namespace rhflow
