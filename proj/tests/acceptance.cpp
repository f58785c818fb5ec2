// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "extravagance/birkhoff.hpp"
#include "extravagance/criterion.hpp"
#include "extravagance/experiment.hpp"
#include "extravagance/flow.hpp"
#include "extravagance/orbit.hpp"
#include "extravagance/sampling.hpp"
#include "oracles.hpp"

using namespace extrav;

namespace {

// Pinned tolerances and calibrated thresholds.
constexpr unsigned precision = 128;
constexpr double c6_factor = 1.5;        // golden median over luczak(2,2) median at N = 10^6
constexpr std::uint64_t c6_seed = 42;
constexpr double c7_theta_hi = 3.0;
constexpr double c7_theta_lo = 1.0 / 3.0;
constexpr std::uint64_t c7_seed = 7;
constexpr double c9_line_tol = 1e-9;
constexpr double c9_unit_rel = 0.2;
constexpr double c9_amplitude = 0.25;    // median of max - min of mass_p over t in [10^2, 10^4]
constexpr std::uint64_t c9_seed = 2024;

struct outcome {
    bool pass = false;
    std::string detail;
};

struct criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<outcome()> run;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::size_t last_index_below(const rotation& rot, std::uint64_t limit) {
    std::size_t n = 1;
    while (rot.q(n + 1) <= limit) ++n;
    return n;
}

outcome c1_denjoy_koksma() {
    const std::vector<bv_table> fs = {bv_table::indicator(big_rational(0), big_rational(1, 2)),
                                      bv_table::indicator(big_rational(0), big_rational(1, 4)), bv_table::sawtooth()};
    std::size_t checks = 0, fails = 0;
    for (const auto& cf : {corpus::golden(), corpus::silver(), corpus::one_two_three()}) {
        const rotation rot(cf, precision, 40);
        const std::size_t n_max = last_index_below(rot, 100000);
        for (std::uint64_t i = 0; i < 50; ++i) {
            const torus_point x = sample_point_at(101, i, precision);
            for (const auto& f : fs)
                for (const auto& c : dk_residual_sweep(f, rot, x, n_max)) {
                    ++checks;
                    fails += !c.pass;
                }
        }
    }
    return {fails == 0, fmt("%zu/%zu residuals within Var(f)", checks - fails, checks)};
}

struct dk_tally {
    std::size_t checks = 0, fails = 0;
    double worst = 0.0; // max lhs / q_n
};

dk_tally dk_adapted(double constant) {
    dk_tally t;
    for (const auto& cf : {corpus::golden(), corpus::silver()}) {
        const rotation rot(cf, precision, 20);
        for (std::uint64_t i = 0; i < 100; ++i)
            for (const auto& c : lemma_dk_adapted_sweep(sample_point_at(202, i, precision), rot, 18, constant)) {
                ++t.checks;
                t.fails += !c.pass;
                t.worst = std::max(t.worst, c.lhs / static_cast<double>(c.q));
            }
    }
    return t;
}

outcome c2_log_sum() {
    const dk_tally t = dk_adapted(2.0);
    return {t.fails == 0, fmt("bound 2q_n: %zu/%zu pass, worst |lhs|/q_n = %.3f", t.checks - t.fails, t.checks, t.worst)};
}

outcome c3_blocks() {
    std::size_t checks = 0, fails = 0;
    for (const auto& cf : {corpus::crafted(), corpus::silver()}) {
        const rotation rot(cf, precision, 17);
        for (std::uint64_t i = 0; i < 50; ++i)
            for (const auto& c : lemma_block_bounds_sweep(sample_point_at(303, i, precision), rot, 15)) {
                ++checks;
                fails += !c.pass;
            }
    }
    return {checks > 0 && fails == 0, fmt("%zu/%zu blocks within bounds", checks - fails, checks)};
}

// Exact checks of one row against the bracketing convergents n+2 and n+3,
// between which alpha lies strictly.
bool row_ok(const convergent_table& t, std::size_t n) {
    const convergent& r = t.at(n);
    const big_int q_prev = n == 1 ? big_int(1) : t.at(n - 1).q;
    const big_int p_prev = n == 1 ? big_int(0) : t.at(n - 1).p;
    const big_int q_prev2 = n <= 1 ? big_int(0) : n == 2 ? big_int(1) : t.at(n - 2).q;
    bool ok = r.q == r.a * q_prev + q_prev2 && r.q_next == t.at(n + 1).q;
    ok = ok && boost::multiprecision::gcd(r.p, r.q) == 1;
    ok = ok && r.p * q_prev - p_prev * r.q == (n % 2 ? 1 : -1);
    const big_rational c(r.p, r.q);
    const big_rational lo = big_rational(t.at(n + 2).p, t.at(n + 2).q) - c;
    const big_rational hi = big_rational(t.at(n + 3).p, t.at(n + 3).q) - c;
    // alpha - p_n/q_n has sign (-1)^n.
    const int sign = n % 2 ? -1 : 1;
    ok = ok && lo.sign() == sign && hi.sign() == sign;
    const big_rational dlo = abs(lo) < abs(hi) ? abs(lo) : abs(hi);
    const big_rational dhi = abs(lo) < abs(hi) ? abs(hi) : abs(lo);
    const big_rational scale(r.q * r.q_next);
    ok = ok && dhi * scale < 1;                                  // |alpha - p/q| < 1/(q q')
    ok = ok && dlo * scale > big_rational(1, 2);                 // w_n > 1/2
    // The library's w carries the tail enclosure, accurate to 2^-96 relative.
    const big_rational slack = dhi * scale / big_rational(big_int(1) << 90);
    ok = ok && r.w_exact() >= dlo * scale - slack && r.w_exact() <= dhi * scale + slack;
    return ok;
}

outcome c4_structure() {
    std::vector<std::pair<continued_fraction, std::size_t>> list = {
        {corpus::golden(), 60}, {corpus::silver(), 50}, {corpus::one_two_three(), 40},
        {corpus::crafted(), 30}, {corpus::luczak(2, 1, 12), 8}, {corpus::luczak(3, 2, 16), 12}};
    std::mt19937_64 rng(404);
    for (int i = 0; i < 20; ++i) {
        const long d = static_cast<long>(rng() % 5000 + 2);
        const long r = static_cast<long>(std::sqrt(static_cast<double>(d)));
        if (r * r == d || (r + 1) * (r + 1) == d) continue;
        list.emplace_back(cf_from_quadratic(big_int(-r), big_int(1), big_int(1), big_int(d)), 30);
    }
    std::size_t rows = 0, fails = 0;
    bool big = false;
    for (const auto& [cf, n_max] : list) {
        const auto t = convergents_up_to(cf, n_max + 3);
        for (std::size_t n = 1; n <= n_max; ++n) {
            ++rows;
            fails += !row_ok(t, n);
            big = big || t.at(n).q > big_int("10000000000000000000");
        }
    }
    return {fails == 0 && big, fmt("%zu/%zu rows exact, q_n beyond 1e19 reached: %s", rows - fails, rows, big ? "yes" : "no")};
}

outcome c5_classifier() {
    const auto g = classify(corpus::golden(), 10);
    const auto s = classify(corpus::silver(), 10);
    const auto l2 = classify(corpus::luczak(2, 1, 12), 10);
    const auto l32 = classify(corpus::luczak(3, 2, 12), 10);
    const bool div = g.verdict == series_verdict_kind::diverges_heuristic &&
                     s.verdict == series_verdict_kind::diverges_heuristic;
    const auto conv = [](const series_verdict& v) {
        return v.verdict == series_verdict_kind::converges_heuristic && v.tail_estimate < 1e-6L;
    };
    return {div && conv(l2) && conv(l32),
            fmt("golden %s, silver %s, luczak(2,2) %s tail %.2e, luczak(3/2,2) %s tail %.2e", to_string(g.verdict),
                to_string(s.verdict), to_string(l2.verdict), static_cast<double>(l2.tail_estimate),
                to_string(l32.verdict), static_cast<double>(l32.tail_estimate))};
}

// Median running_max_ratio at each requested N over 100 seeded x.
std::vector<double> ratio_medians(const continued_fraction& cf, const std::vector<std::uint64_t>& at) {
    const fixed_point_angle alpha = angle_value(cf, precision);
    sample_schedule sched;
    sched.powers_of_two = false;
    sched.distance_records = false;
    sched.extra = at;
    std::vector<std::vector<double>> cols(at.size(), std::vector<double>(100));
    parallel_for(100, 0, [&](std::size_t i) {
        const auto r = extravagance_series(phi_standard{}, sample_point_at(c6_seed, i, precision), alpha, at.back(), sched);
        for (std::size_t k = 0; k < at.size(); ++k)
            for (const auto& s : r)
                if (s.N == at[k]) cols[k][i] = s.running_max_ratio;
    });
    std::vector<double> out;
    for (auto& c : cols) out.push_back(median(c));
    return out;
}

outcome c6_extravagance() {
    const auto g = ratio_medians(corpus::golden(), {1000, 1000000});
    const auto l = ratio_medians(corpus::luczak(2, 1, 12), {1000000});
    const bool growth = g[1] > g[0];
    const bool contrast = g[1] > c6_factor * l[0];
    return {growth && contrast, fmt("golden median %.3f at 1e3, %.3f at 1e6; luczak(2,2) %.3f at 1e6; factor %.2f (need > %.2f)",
                                    g[0], g[1], l[0], g[1] / l[0], c6_factor)};
}

outcome c7_theta() {
    const fixed_point_angle alpha = angle_value(corpus::golden(), precision);
    const fixed_point_angle beta = angle_value(corpus::silver(), precision);
    const std::vector<std::uint64_t> at = {10000, 100000, 1000000};
    sample_schedule sched;
    sched.powers_of_two = false;
    sched.distance_records = false;
    sched.extra = at;
    std::vector<std::vector<char>> hit(at.size(), std::vector<char>(100, 0));
    parallel_for(100, 0, [&](std::size_t i) {
        const auto t = theta_series(sample_point_at(c7_seed, i, precision), beta, alpha, at.back(), sched);
        for (std::size_t k = 0; k < at.size(); ++k)
            for (const auto& s : t)
                if (s.N == at[k]) hit[k][i] = s.running_max >= c7_theta_hi && s.running_min <= c7_theta_lo;
    });
    std::vector<int> counts;
    for (const auto& h : hit) counts.push_back(static_cast<int>(std::count(h.begin(), h.end(), 1)));
    const bool monotone = counts[0] < counts[1] && counts[1] < counts[2];
    return {monotone, fmt("fraction with max >= %.2f and min <= %.3f: %d%%, %d%%, %d%% at 1e4, 1e5, 1e6", c7_theta_hi,
                          c7_theta_lo, counts[0], counts[1], counts[2])};
}

outcome c8_oracles() {
    std::mt19937_64 rng(808);
    std::size_t agree = 0;
    for (int trial = 0; trial < 50; ++trial) {
        long d, r;
        do {
            d = static_cast<long>(rng() % 5000 + 2);
            r = static_cast<long>(std::sqrt(static_cast<double>(d)));
        } while (r * r == d || (r + 1) * (r + 1) == d);
        const long c = static_cast<long>(rng() % 5 + 1);
        const auto cf = cf_from_quadratic(big_int(-r), big_int(1), big_int(c), big_int(d));
        const auto alpha = angle_value(cf, precision);
        const auto alpha2 = angle_value(cf, 2 * precision);
        const torus_point x = sample_point_at(808, static_cast<std::uint64_t>(trial), precision);
        const std::uint64_t K = rng() % 100000 + 1;
        const auto got = min_distance_prefix(x, alpha, K);
        const oracle::zz one = oracle::zz(1) << (2 * precision);
        oracle::zz v = oracle::zz(x.mantissa) << precision;
        oracle::zz best = one;
        std::uint64_t arg = 0;
        for (std::uint64_t k = 0; k < K; ++k) {
            const oracle::zz dist = v < one - v ? v : one - v;
            if (dist < best) {
                best = dist;
                arg = k;
            }
            v += alpha2.mantissa;
            if (v >= one) v -= one;
        }
        const oracle::hp gap = abs(oracle::from_mantissa(got.x_min.mantissa, precision) -
                                   oracle::from_mantissa(best, 2 * precision));
        agree += got.argmin == arg && gap <= oracle::hp(got.x_min.error_bound);
    }
    bool returns = true;
    for (const auto& cf : {corpus::golden(), corpus::silver(), corpus::one_two_three(), corpus::crafted()}) {
        const auto alpha = angle_value(cf, precision);
        const std::uint64_t K = 100000;
        const auto fast = closest_returns_fast(alpha, cf, big_int(K));
        const auto brute = distance_records(torus_point{big_int(0), precision, 0.0L}, alpha, 1, K);
        returns = returns && fast.size() == brute.size();
        for (std::size_t i = 0; returns && i < brute.size(); ++i) returns = fast[i].k == big_int(brute[i].first);
    }
    return {agree == 50 && returns,
            fmt("%zu/50 prefix minima agree with the 256-bit brute force; closest returns %s", agree,
                returns ? "agree" : "disagree")};
}

outcome c9_flow() {
    flow_params fp;
    fp.alpha = angle_value(corpus::golden(), precision);
    fp.p = {0.0L, 0.0L};
    fp.q = {0.5L, 0.5L};
    fp.ball_radius = 0.05L;

    flow_integrator it(fp, {0.3L, 0.1L});
    long double worst_line = 0.0L;
    for (int i = 0; i < 100; ++i) {
        it.advance(100.0L);
        const flow_state& st = it.state();
        worst_line = std::max(worst_line, std::fabs(line_residual(st, fp.slope())));
        // The wrapped point on the same line mod 1, after undoing the x wraps.
        const point2 z = st.z(fp.slope());
        const long double m = std::floor(st.lifted(fp.slope()).x);
        long double w = (z.y - 0.1L) - fp.slope() * (z.x - 0.3L + m);
        w -= std::round(w);
        worst_line = std::max(worst_line, std::fabs(w));
    }

    flow_params unit = fp;
    unit.kind = speed_kind::unit;
    const auto u = empirical_measures({0.3L, 0.7L}, unit, 1e4L, log_grid(1.0L, 1e4L, 4));
    const double area = std::numbers::pi * 0.05 * 0.05;
    const double unit_mass = static_cast<double>(u.rows.back().mass_p);
    const bool unit_ok = std::fabs(unit_mass - area) <= c9_unit_rel * area;

    splitmix64 rng(c9_seed);
    std::vector<point2> starts;
    for (int i = 0; i < 20; ++i) {
        const double x = rng.uniform();
        starts.push_back({x, rng.uniform()});
    }
    const auto grid = log_grid(1.0L, 1e4L, 20);
    std::vector<double> amp(starts.size());
    parallel_for(starts.size(), 0, [&](std::size_t i) {
        const auto rep = empirical_measures(starts[i], fp, 1e4L, grid);
        long double hi = 0.0L, lo = 1.0L;
        for (const auto& r : rep.rows)
            if (r.t >= 1e2L) {
                hi = std::max(hi, r.mass_p);
                lo = std::min(lo, r.mass_p);
            }
        amp[i] = static_cast<double>(hi - lo);
    });
    const double med = median(amp);
    return {worst_line < c9_line_tol && unit_ok && med > c9_amplitude,
            fmt("line residual %.1e; unit mass_p %.6f vs %.6f; median amplitude %.3f (need > %.2f)",
                static_cast<double>(worst_line), unit_mass, area, med, c9_amplitude)};
}

outcome c10_determinism() {
    const json golden = {{"kind", "surd"}, {"a", "-1"}, {"b", "1"}, {"c", "2"}, {"d", "5"}};
    const json silver = {{"kind", "surd"}, {"a", "-1"}, {"b", "1"}, {"c", "1"}, {"d", "2"}};
    const std::vector<std::pair<runner, json>> runs = {
        {run_cf, {{"alpha", golden}, {"cf", {{"n_max", 40}}}}},
        {run_classify, {{"alpha", golden}, {"classify", {{"n_max", 30}}}}},
        {run_simulate, {{"alpha", golden}, {"seed", 3}, {"simulate", {{"n_max", 5000}, {"samples", 8}}}}},
        {run_theta, {{"alpha", golden}, {"seed", 3}, {"theta", {{"beta", silver}, {"n_max", 5000}, {"samples", 8}}}}},
        {run_checks, {{"alpha", silver}, {"seed", 3}, {"checks", {{"n_max", 10}, {"samples", 8}}}}},
        {run_flow, {{"alpha", golden}, {"seed", 3}, {"flow", {{"t_max", 200.0}, {"samples", 2}}}}},
    };
    std::size_t same = 0;
    for (const auto& [run, cfg] : runs) {
        run_options one, many;
        one.threads = 1;
        many.threads = 4;
        const auto a = run(cfg, one), b = run(cfg, one), c = run(cfg, many);
        same += a == b && a == c;
    }
    return {same == runs.size(), fmt("%zu/%zu runners byte-identical across reruns and thread counts", same, runs.size())};
}

} // namespace

int main() {
    const std::vector<criterion> all = {
        {1, "Denjoy-Koksma residuals", 30, c1_denjoy_koksma},
        {2, "log-sum bound at denominators", 60, c2_log_sum},
        {3, "block bounds", 60, c3_blocks},
        {4, "convergent structure", 5, c4_structure},
        {5, "classifier dichotomy", 5, c5_classifier},
        {6, "extravagance contrast", 600, c6_extravagance},
        {7, "theta extremes", 600, c7_theta},
        {8, "oracle equivalence", 60, c8_oracles},
        {9, "flow suite", 300, c9_flow},
        {10, "determinism", 10, c10_determinism},
    };
    int failed = 0;
    for (const auto& c : all) {
        const auto start = std::chrono::steady_clock::now();
        outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool pass = o.pass && secs < c.budget_s;
        failed += !pass;
        std::printf("%s criterion %d (%s): %s [%.1f s, budget %.0f s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), secs, c.budget_s);
        if (c.id == 2) {
            const dk_tally t = dk_adapted(3.0);
            std::printf("INFO criterion 2 with relaxed bound 3q_n: %zu/%zu pass, worst |lhs|/q_n = %.3f\n",
                        t.checks - t.fails, t.checks, t.worst);
        }
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, all.size());
    return failed == 0 ? 0 : 1;
}
