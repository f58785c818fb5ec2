#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "corpus.hpp"
#include "extravagance/flow.hpp"
#include "extravagance/sampling.hpp"

using namespace extrav;

namespace {

constexpr double pi = std::numbers::pi;

flow_params params(speed_kind kind = speed_kind::product_sine_squares) {
    flow_params fp;
    fp.alpha = angle_value(corpus::golden(), 128);
    fp.p = {0.0L, 0.0L};
    fp.q = {0.5L, 0.5L};
    fp.kind = kind;
    fp.ball_radius = 0.05L;
    return fp;
}

// Plain double torus distance, independent of the library helpers.
double torus_gap(double a, double b) {
    double d = std::fabs(a - b);
    d -= std::floor(d);
    return std::min(d, 1.0 - d);
}

bool in_ball(double x, double y, point2 c, double eps) {
    const double dx = torus_gap(x, static_cast<double>(c.x));
    const double dy = torus_gap(y, static_cast<double>(c.y));
    return dx * dx + dy * dy <= eps * eps;
}

double rho(double x, double y) {
    const double a = std::sin(pi * x), b = std::sin(pi * y);
    const double c = std::sin(pi * (x - 0.5)), d = std::sin(pi * (y - 0.5));
    return (a * a + b * b) * (c * c + d * d);
}

} // namespace

TEST(Speed, HandExamples) {
    const flow_params fp = params();
    EXPECT_EQ(speed(fp, {0.0L, 0.0L}), 0.0L);
    EXPECT_NEAR(static_cast<double>(speed(fp, {0.5L, 0.5L})), 0.0, 1e-36);
    EXPECT_NEAR(static_cast<double>(speed(fp, {0.25L, 0.25L})), 1.0, 1e-18);
    EXPECT_NEAR(static_cast<double>(sine_bump({0.25L, 0.25L}, {0.0L, 0.0L})), 1.0, 1e-18);
    EXPECT_EQ(speed(params(speed_kind::unit), {0.0L, 0.0L}), 1.0L);
}

TEST(Speed, PositiveAwayFromZerosAndQuadraticNearThem) {
    splitmix64 rng(77);
    const flow_params fp = params();
    for (int i = 0; i < 1000; ++i) {
        const point2 z{rng.uniform(), rng.uniform()};
        EXPECT_GT(speed(fp, z), 0.0L);
        EXPECT_NEAR(static_cast<double>(speed(fp, z)), rho(static_cast<double>(z.x), static_cast<double>(z.y)), 1e-14);
    }
    // Hessian 2 pi^2 I times f_q(p) = 2: rho ~ 2 pi^2 |h|^2 near p.
    for (const double h : {1e-3, 1e-4}) {
        const double r = static_cast<double>(speed(fp, {h, 0.0L}));
        EXPECT_NEAR(r / (h * h), 2.0 * pi * pi, 1e-4 * 2.0 * pi * pi);
    }
}

TEST(Params, Validation) {
    flow_params fp = params();
    fp.ball_radius = 0.2L;
    EXPECT_THROW(flow_integrator(fp, {0.3L, 0.3L}), domain_error);
    fp = params();
    fp.q = {0.05L, 0.0L};
    EXPECT_THROW(flow_integrator(fp, {0.3L, 0.3L}), domain_error);
}

TEST(UnitHook, MovesArcByElapsedTime) {
    const flow_params fp = params(speed_kind::unit);
    flow_integrator it(fp, {0.3L, 0.7L});
    it.advance(2.5L);
    EXPECT_EQ(it.state().s, 2.5L);
    EXPECT_EQ(it.state().t, 2.5L);
    const point2 z = it.state().z(fp.slope());
    EXPECT_NEAR(static_cast<double>(z.x), 0.8, 1e-15);
    EXPECT_NEAR(static_cast<double>(z.y), std::fmod(0.7 + 2.5 * static_cast<double>(fp.slope()), 1.0), 1e-15);
}

TEST(UnitHook, Reversible) {
    const flow_params fp = params(speed_kind::unit);
    splitmix64 rng(3);
    for (int i = 0; i < 20; ++i) {
        const point2 start{rng.uniform(), rng.uniform()};
        flow_integrator it(fp, start);
        const long double dt = 1.0L + 100.0L * rng.uniform();
        it.advance(dt);
        it.advance(-dt);
        const point2 z = it.state().z(fp.slope());
        EXPECT_LT(torus_gap(static_cast<double>(z.x), static_cast<double>(start.x)), 1e-9);
        EXPECT_LT(torus_gap(static_cast<double>(z.y), static_cast<double>(start.y)), 1e-9);
    }
}

TEST(TrueSpeed, NegativeStepRejected) {
    flow_integrator it(params(), {0.3L, 0.3L});
    EXPECT_THROW(it.advance(-1.0L), domain_error);
}

TEST(TrueSpeed, StartAtZeroIsStationary) {
    const flow_params fp = params();
    for (const point2 start : {fp.p, fp.q}) {
        flow_integrator it(fp, start);
        EXPECT_TRUE(it.stationary());
        it.advance(123.0L);
        EXPECT_EQ(it.state().s, 0.0L);
        EXPECT_EQ(it.state().t, 123.0L);
        const point2 z = it.state().z(fp.slope());
        EXPECT_EQ(z.x, start.x);
        EXPECT_EQ(z.y, start.y);
    }
    const auto rep = empirical_measures(fp.p, fp, 1000.0L, log_grid(1.0L, 1000.0L, 5));
    for (const auto& r : rep.rows) {
        EXPECT_EQ(r.mass_p, 1.0L);
        EXPECT_EQ(r.mass_q, 0.0L);
    }
}

TEST(TrueSpeed, LineInvariantAndMonotoneTime) {
    const flow_params fp = params();
    flow_integrator it(fp, {0.3L, 0.1L});
    long double t_prev = 0.0L, s_prev = 0.0L;
    for (int i = 0; i < 100; ++i) {
        it.advance(100.0L);
        const flow_state& st = it.state();
        EXPECT_GT(st.t, t_prev);
        EXPECT_GT(st.s, s_prev);
        EXPECT_LT(std::fabs(static_cast<double>(line_residual(st, fp.slope()))), 1e-9);
        // The wrapped point lies on the same line mod 1.
        const point2 z = st.z(fp.slope());
        const long double m = std::floor(st.lifted(fp.slope()).x);
        const long double wrapped = (z.y - 0.1L) - fp.slope() * (z.x - 0.3L) - fp.slope() * m;
        EXPECT_LT(torus_gap(static_cast<double>(wrapped), 0.0), 1e-9);
        t_prev = st.t;
        s_prev = st.s;
    }
    EXPECT_NEAR(static_cast<double>(it.state().t), 1e4, 1e-9);
}

TEST(TrueSpeed, AgreesWithFixedStepOracle) {
    // Classical RK4 on ds/dt = rho(z0 + s(1, alpha)) in plain doubles.
    const flow_params fp = params();
    const double a = static_cast<double>(fp.slope());
    const point2 start{0.3L, 0.1L};
    const auto f = [&](double s) { return rho(0.3 + s, 0.1 + a * s); };
    const double dt = 1e-3, T = 50.0;
    double s = 0.0, in_p = 0.0, in_q = 0.0;
    for (int i = 0; i < static_cast<int>(T / dt); ++i) {
        const double k1 = f(s), k2 = f(s + 0.5 * dt * k1), k3 = f(s + 0.5 * dt * k2), k4 = f(s + dt * k3);
        const double mid = s + 0.5 * dt * k1;
        if (in_ball(0.3 + mid, 0.1 + a * mid, fp.p, 0.05)) in_p += dt;
        if (in_ball(0.3 + mid, 0.1 + a * mid, fp.q, 0.05)) in_q += dt;
        s += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    flow_integrator it(fp, start);
    it.advance(T);
    EXPECT_NEAR(static_cast<double>(it.state().s), s, 1e-8 * (1.0 + s));
    EXPECT_NEAR(static_cast<double>(it.occupation().in_p) / T, in_p / T, 2e-4);
    EXPECT_NEAR(static_cast<double>(it.occupation().in_q) / T, in_q / T, 2e-4);
}

TEST(TrueSpeed, ToleranceRefinementConverges) {
    flow_params coarse = params(), fine = params();
    coarse.tolerance = 1e-8L;
    fine.tolerance = 1e-12L;
    flow_integrator a(coarse, {0.3L, 0.1L}), b(fine, {0.3L, 0.1L});
    a.advance(1000.0L);
    b.advance(1000.0L);
    EXPECT_NEAR(static_cast<double>(a.state().s), static_cast<double>(b.state().s), 1e-6);
    EXPECT_NEAR(static_cast<double>(a.occupation().in_p), static_cast<double>(b.occupation().in_p), 1e-5);
}

TEST(TrueSpeed, FreeAdvanceComposes) {
    const flow_params fp = params();
    const flow_state s0{{0.3L, 0.1L}, 0.0L, 0.0L};
    const flow_state once = advance(s0, fp, 20.0L);
    const flow_state twice = advance(advance(s0, fp, 10.0L), fp, 10.0L);
    EXPECT_NEAR(static_cast<double>(once.t), 20.0, 1e-12);
    EXPECT_NEAR(static_cast<double>(twice.t), 20.0, 1e-12);
    EXPECT_NEAR(static_cast<double>(once.s), static_cast<double>(twice.s), 1e-8);
}

TEST(Empirical, MassesPartitionTime) {
    const flow_params fp = params();
    const auto rep = empirical_measures({0.3L, 0.1L}, fp, 1e4L, log_grid(1.0L, 1e4L, 10));
    ASSERT_EQ(rep.rows.size(), 41u);
    for (const auto& r : rep.rows) {
        EXPECT_GE(r.mass_p, 0.0L);
        EXPECT_GE(r.mass_q, 0.0L);
        EXPECT_LE(r.mass_p + r.mass_q, 1.0L + 1e-12L);
        EXPECT_EQ(r.mass_p + r.mass_q + r.mass_else, 1.0L);
    }
    EXPECT_EQ(rep.rows.back().t, 1e4L);
}

TEST(Empirical, UnitSpeedEquidistributes) {
    const flow_params fp = params(speed_kind::unit);
    const double area = pi * 0.05 * 0.05;
    const point2 start{0.3L, 0.7L};
    const auto rep = empirical_measures(start, fp, 1e4L, log_grid(1.0L, 1e4L, 4));
    EXPECT_NEAR(static_cast<double>(rep.rows.back().mass_p), area, 0.2 * area);
    EXPECT_NEAR(static_cast<double>(rep.rows.back().mass_q), area, 0.2 * area);
    // Brute-force time sampling of the same line.
    const double a = static_cast<double>(fp.slope());
    const long samples = 20000000;
    long hits_p = 0, hits_q = 0;
    for (long i = 0; i < samples; ++i) {
        const double t = (static_cast<double>(i) + 0.5) * 1e4 / static_cast<double>(samples);
        hits_p += in_ball(0.3 + t, 0.7 + a * t, fp.p, 0.05);
        hits_q += in_ball(0.3 + t, 0.7 + a * t, fp.q, 0.05);
    }
    EXPECT_NEAR(static_cast<double>(rep.rows.back().mass_p), static_cast<double>(hits_p) / samples, 1e-5);
    EXPECT_NEAR(static_cast<double>(rep.rows.back().mass_q), static_cast<double>(hits_q) / samples, 1e-5);
    const auto h = historic_indicator(rep);
    for (const long double v : {h.limsup_p, h.liminf_p, h.limsup_q, h.liminf_q})
        EXPECT_NEAR(static_cast<double>(v), area, 0.3 * area);
    EXPECT_FALSE(h.extreme);
}

TEST(Empirical, GridValidation) {
    const flow_params fp = params();
    EXPECT_THROW(empirical_measures({0.3L, 0.1L}, fp, 10.0L, {1.0L, 1.0L}), domain_error);
    EXPECT_THROW(empirical_measures({0.3L, 0.1L}, fp, 10.0L, {20.0L}), domain_error);
    EXPECT_THROW(empirical_measures({0.3L, 0.1L}, fp, 0.0L, {}), domain_error);
    EXPECT_THROW(log_grid(10.0L, 1.0L, 5), domain_error);
}

TEST(Historic, ConstantReport) {
    empirical_report rep;
    for (const long double t : log_grid(1.0L, 1000.0L, 3)) rep.rows.push_back({t, {}, 0.25L, 0.5L, 0.25L});
    const auto h = historic_indicator(rep);
    EXPECT_EQ(h.limsup_p, 0.25L);
    EXPECT_EQ(h.liminf_p, 0.25L);
    EXPECT_EQ(h.limsup_q, 0.5L);
    EXPECT_EQ(h.liminf_q, 0.5L);
    EXPECT_FALSE(h.extreme);
}

TEST(Historic, ExtremeFlagAndShortGrid) {
    empirical_report rep;
    const auto grid = log_grid(1.0L, 1000.0L, 10);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const bool even = i % 2 == 0;
        rep.rows.push_back({grid[i], {}, even ? 0.95L : 0.02L, even ? 0.02L : 0.95L, 0.03L});
    }
    EXPECT_TRUE(historic_indicator(rep).extreme);
    empirical_report short_rep;
    for (const long double t : log_grid(1.0L, 50.0L, 3)) short_rep.rows.push_back({t, {}, 0.1L, 0.1L, 0.8L});
    EXPECT_THROW(historic_indicator(short_rep), domain_error);
    EXPECT_THROW(historic_indicator(empirical_report{}), domain_error);
}
