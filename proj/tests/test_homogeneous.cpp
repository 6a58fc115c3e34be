#include <doctest.h>

#include <cmath>
#include <functional>

#include "rhflow/homogeneous.hpp"
#include "rhflow/monitors.hpp"

using namespace rhflow;

namespace {

// Independent chart-point oracle for the constant-curvature geometry table:
// evaluates Christoffels and curvature of an analytic 2d metric at one chart
// point by nested 6th-order finite differences (no grid machinery involved).
struct ChartOracle {
    std::function<double(int, int, double, double)> metric;
    double h = 1e-2;

    double d6(const std::function<double(double)>& f, double x) const {
        return (-f(x - 3 * h) + 9 * f(x - 2 * h) - 45 * f(x - h) + 45 * f(x + h) -
                9 * f(x + 2 * h) + f(x + 3 * h)) /
               (60.0 * h);
    }

    double dg(int a, int i, int j, double x, double y) const {
        if (a == 0)
            return d6([&](double s) { return metric(i, j, s, y); }, x);
        return d6([&](double s) { return metric(i, j, x, s); }, y);
    }

    double gamma(int k, int i, int j, double xx, double yy) const {
        double gg[2][2];
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) gg[a][b] = metric(a, b, xx, yy);
        const double dd = gg[0][0] * gg[1][1] - gg[0][1] * gg[1][0];
        double iv[2][2];
        iv[0][0] = gg[1][1] / dd;
        iv[1][1] = gg[0][0] / dd;
        iv[0][1] = iv[1][0] = -gg[0][1] / dd;
        double acc = 0.0;
        for (int l = 0; l < 2; ++l)
            acc += iv[k][l] * (dg(i, j, l, xx, yy) + dg(j, i, l, xx, yy) -
                               dg(l, i, j, xx, yy));
        return 0.5 * acc;
    }

    // scalar curvature at (x, y) with the project's sign convention
    double scalar_curvature(double x, double y) const {
        double g[2][2], inv[2][2];
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) g[i][j] = metric(i, j, x, y);
        const double det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        inv[0][0] = g[1][1] / det;
        inv[1][1] = g[0][0] / det;
        inv[0][1] = inv[1][0] = -g[0][1] / det;

        // R^l_kij = d_i G^l_jk - d_j G^l_ik + G^l_ip G^p_jk - G^l_jp G^p_ik
        auto riem_up = [&](int l, int k, int i, int j) {
            const double di = i == 0
                                  ? d6([&](double s) { return gamma(l, j, k, s, y); }, x)
                                  : d6([&](double s) { return gamma(l, j, k, x, s); }, y);
            const double dj = j == 0
                                  ? d6([&](double s) { return gamma(l, i, k, s, y); }, x)
                                  : d6([&](double s) { return gamma(l, i, k, x, s); }, y);
            double acc = di - dj;
            for (int p = 0; p < 2; ++p)
                acc += gamma(l, i, p, x, y) * gamma(p, j, k, x, y) -
                       gamma(l, j, p, x, y) * gamma(p, i, k, x, y);
            return acc;
        };

        double R = 0.0;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                double ric = 0.0;
                for (int k = 0; k < 2; ++k)
                    for (int l = 0; l < 2; ++l) {
                        double lowered = 0.0;
                        for (int p = 0; p < 2; ++p) lowered += g[k][p] * riem_up(p, i, l, j);
                        ric += inv[k][l] * lowered;
                    }
                R += inv[i][j] * ric;
            }
        return R;
    }
};

} // namespace

TEST_CASE("geometry table cross-checked against the chart-point oracle") {
    for (double c : {1.0, 0.7, 2.5}) {
        ChartOracle sphere;
        sphere.metric = [c](int i, int j, double th, double) {
            if (i != j) return 0.0;
            return i == 0 ? c : c * std::sin(th) * std::sin(th);
        };
        const double R = sphere.scalar_curvature(1.1, 0.3);
        HomogeneousState s;
        s.c = c;
        CHECK(R == doctest::Approx(hom_geometry(ModelKind::Sphere2, s).scalar_curvature)
                       .epsilon(1e-8));
    }
    for (double d : {1.0, 1.8}) {
        ChartOracle hyp;
        hyp.metric = [d](int i, int j, double th, double) {
            if (i != j) return 0.0;
            return i == 0 ? d : d * std::sinh(th) * std::sinh(th);
        };
        const double R = hyp.scalar_curvature(1.2, 0.4);
        CHECK(R == doctest::Approx(-2.0 / d).epsilon(1e-8));
    }
    // energy density of the identity map: g^{ij} (g0)_ij summed over factors
    HomogeneousState s;
    s.c = 0.5;
    s.d = 2.0;
    s.alpha = 0.7;
    const HomGeometry geo = hom_geometry(ModelKind::ProductS2L, s);
    CHECK(geo.energy_density == doctest::Approx(2.0 / 0.5 + 2.0 / 2.0));
    CHECK(geo.scalar_curvature == doctest::Approx(2.0 / 0.5 - 2.0 / 2.0));
    CHECK(geo.S == doctest::Approx(geo.scalar_curvature - 0.7 * geo.energy_density));
}

TEST_CASE("hom_geometry: spec examples") {
    HomogeneousState s;
    s.c = 1.0;
    s.alpha = 0.0;
    CHECK(hom_geometry(ModelKind::Sphere2, s).scalar_curvature == doctest::Approx(2.0));
    CHECK(hom_geometry(ModelKind::Sphere2, s).S == doctest::Approx(2.0));
    s.alpha = 1.0;
    CHECK(hom_geometry(ModelKind::Sphere2, s).S == doctest::Approx(0.0));
    s.c = 1.7;
    s.d = 1.7;
    CHECK(hom_geometry(ModelKind::ProductS2L, s).scalar_curvature == doctest::Approx(0.0));
}

TEST_CASE("model_rhs: quoted formulas") {
    HomogeneousState s;
    s.alpha = 1.0;
    CHECK(model_rhs(ModelKind::Sphere2, s, false).c_dot == 0.0);

    s.c = 1.0;
    s.d = 1.0;
    const HomRates r = model_rhs(ModelKind::ProductS2L, s, true);
    CHECK(r.c_dot == doctest::Approx(-2.0));
    CHECK(r.d_dot == doctest::Approx(2.0));

    s.alpha = 3.0;
    s.c = std::sqrt(0.5);
    s.d = std::sqrt(2.0);
    const HomRates fp = model_rhs(ModelKind::ProductS2L, s, true);
    CHECK(std::abs(fp.c_dot) <= 1e-14);
    CHECK(std::abs(fp.d_dot) <= 1e-14);

    // alpha = 0 reproduces the normalized Ricci flow comparator
    s.alpha = 0.0;
    s.c = 1.3;
    s.d = 0.6;
    const HomRates ricci = model_rhs(ModelKind::ProductS2L, s, true);
    CHECK(ricci.c_dot == doctest::Approx(-1.0 - 1.3 * 1.3));
    CHECK(ricci.d_dot == doctest::Approx(1.0 + 0.6 * 0.6));
}

TEST_CASE("closed forms") {
    CHECK(closed_form(ModelKind::Sphere2, false, 0.0, 0.25).c == doctest::Approx(0.5));
    CHECK(closed_form(ModelKind::Sphere2, false, 2.0, 3.0).c == doctest::Approx(7.0));
    const HomogeneousState n1 = closed_form(ModelKind::ProductS2L, true, 1.0, 2.0);
    CHECK(n1.c == doctest::Approx(0.2));
    CHECK(n1.d == doctest::Approx(5.0));
    CHECK_THROWS_AS(closed_form(ModelKind::ProductS2L, true, 2.0, 1.0), NoClosedForm);
}

TEST_CASE("integrate_model: extinction detection and Richardson order") {
    HomTrajectory traj = integrate_model(ModelKind::Sphere2, CouplingSchedule::constant(0.5),
                                         2.0, 1e-3, false);
    REQUIRE(traj.singularity.has_value());
    CHECK(std::abs(traj.singularity->t_sing - 1.0) <= 1e-8);
    CHECK(traj.singularity->t_extinct <= 1.0);
    CHECK(traj.samples.back().c <= eps_extinction * 1.01);

    HomTrajectory limit = integrate_model(ModelKind::ProductS2L,
                                          CouplingSchedule::constant(3.0), 20.0, 1e-3, true);
    CHECK(std::abs(limit.samples.back().c - std::sqrt(0.5)) <= 1e-6);
    CHECK(std::abs(limit.samples.back().d - std::sqrt(2.0)) <= 1e-6);

    auto err = [&](double dt) {
        HomTrajectory t = integrate_model(ModelKind::ProductS2L,
                                          CouplingSchedule::constant(1.0), 1.0, dt, true);
        const HomogeneousState& last = t.samples.back();
        const HomogeneousState exact = closed_form(ModelKind::ProductS2L, true, 1.0, last.t);
        return std::abs(last.c - exact.c) + std::abs(last.d - exact.d);
    };
    const double ratio = err(0.02) / err(0.01);
    CHECK(ratio >= 10.0);
    CHECK(ratio <= 30.0);
}

TEST_CASE("renormalize: stationarity, unit volume, idempotence") {
    HomTrajectory sphere = integrate_model(ModelKind::Sphere2, CouplingSchedule::constant(0.4),
                                           0.6, 1e-3, false);
    HomTrajectory renorm = renormalize(sphere);
    double worst_c = 0.0, worst_vol = 0.0;
    for (const auto& s : renorm.samples) {
        worst_c = std::max(worst_c, std::abs(s.c - 1.0));
        worst_vol =
            std::max(worst_vol, std::abs(hom_geometry(ModelKind::Sphere2, s).volume - 1.0));
    }
    CHECK(worst_c <= 1e-10);
    CHECK(worst_vol <= 1e-8);

    HomTrajectory prod = integrate_model(ModelKind::ProductS2L, CouplingSchedule::constant(2.0),
                                         1.0, 1e-3, true);
    HomTrajectory again = renormalize(prod);
    double worst = 0.0;
    for (size_t k = 0; k < prod.samples.size(); ++k) {
        worst = std::max(worst, std::abs(again.samples[k].c - prod.samples[k].c));
        worst = std::max(worst, std::abs(again.samples[k].d - prod.samples[k].d));
        worst = std::max(worst, std::abs(again.samples[k].t - prod.samples[k].t));
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("breather scan classifications") {
    HomTrajectory steady = integrate_model(ModelKind::Sphere2, CouplingSchedule::constant(1.0),
                                           1.0, 1e-2, false);
    BreatherReport rs = breather_scan(steady);
    CHECK(rs.pairs.size() == static_cast<size_t>(rs.pairs_tested));
    for (const auto& p : rs.pairs) CHECK(p.kind == "steady");

    HomTrajectory shrink = integrate_model(ModelKind::Sphere2, CouplingSchedule::constant(0.5),
                                           0.5, 1e-2, false);
    BreatherReport rh = breather_scan(shrink);
    CHECK(rh.pairs.size() == static_cast<size_t>(rh.pairs_tested));
    for (const auto& p : rh.pairs) {
        CHECK(p.kind == "shrinking");
        CHECK(p.scale == doctest::Approx((1.0 - p.t2) / (1.0 - p.t1)).epsilon(1e-6));
    }

    // away from the fixed point, c and d evolve with different ratios
    HomTrajectory prod = integrate_model(ModelKind::ProductS2L, CouplingSchedule::constant(3.0),
                                         0.4, 1e-2, true);
    BreatherReport rp = breather_scan(prod);
    CHECK(rp.pairs.empty());
}

TEST_CASE("comparison bound and singularity bound along homogeneous runs") {
    HomTrajectory traj = integrate_model(ModelKind::Sphere2, CouplingSchedule::constant(0.5),
                                         2.0, 1e-3, false);
    REQUIRE(traj.singularity.has_value());
    const double S0 = hom_geometry(ModelKind::Sphere2, traj.samples.front()).S;
    CHECK(S0 > 0.0);
    const double bound = model_dim(ModelKind::Sphere2) / (2.0 * S0);
    CHECK(traj.singularity->t_sing <= bound + 1e-6);
    CHECK(std::abs(traj.singularity->t_sing - bound) <= 1e-8);

    BoundSeries series = bound_series(traj);
    MonitorReport rep = max_principle_bounds(series, {1e-8, {}, {}});
    for (const auto& c : rep.checks) CHECK(c.pass);
    CHECK(std::abs(rep.checks.front().value) <= 1e-8);

    // non-increasing schedule keeps the comparison bound (reaction term >= 0)
    CouplingSchedule sched = CouplingSchedule::piecewise_linear({{0.0, 0.8}, {0.5, 0.3}});
    HomTrajectory mono = integrate_model(ModelKind::Sphere2, sched, 0.45, 1e-3, false);
    BoundSeries ms = bound_series(mono);
    MonitorReport mrep = max_principle_bounds(ms, {1e-8, {}, {}});
    CHECK(mrep.checks.front().pass);
}
