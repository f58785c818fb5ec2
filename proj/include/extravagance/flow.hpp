#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "continued_fraction.hpp"
#include "numeric.hpp"

namespace extrav {

struct point2 {
    long double x = 0.0L;
    long double y = 0.0L;
};

enum class speed_kind {
    product_sine_squares, // rho = f_p * f_q
    unit,                 // rho = 1, test hook
};

struct flow_params {
    fixed_point_angle alpha;
    point2 p;
    point2 q{0.5L, 0.5L};
    speed_kind kind = speed_kind::product_sine_squares;
    long double ball_radius = 0.05L;
    long double tolerance = 1e-10L; // relative local error of each time increment

    long double slope() const { return alpha.to_long_double(); }
};

namespace detail {

inline long double wrap_unit(long double v) {
    long double r = v - std::floor(v);
    return r >= 1.0L ? 0.0L : r;
}

// Signed offset of a - b in [-1/2, 1/2).
inline long double wrap_offset(long double a, long double b) {
    long double d = a - b;
    return d - std::floor(d + 0.5L);
}

inline long double torus_sq_distance(const point2& a, const point2& b) {
    const long double dx = wrap_offset(a.x, b.x);
    const long double dy = wrap_offset(a.y, b.y);
    return dx * dx + dy * dy;
}

inline void validate(const flow_params& fp) {
    if (!(fp.ball_radius > 0.0L && fp.ball_radius < 0.125L))
        throw domain_error("flow: ball radius must lie in (0, 1/8)");
    if (std::sqrt(torus_sq_distance(fp.p, fp.q)) <= 2.0L * fp.ball_radius)
        throw domain_error("flow: balls around p and q must be disjoint");
    if (!(fp.tolerance > 0.0L)) throw domain_error("flow: tolerance must be positive");
}

} // namespace detail

/// sin^2(pi (z_x - w_x)) + sin^2(pi (z_y - w_y))
inline long double sine_bump(const point2& z, const point2& w) {
    const long double sx = std::sin(std::numbers::pi_v<long double> * (z.x - w.x));
    const long double sy = std::sin(std::numbers::pi_v<long double> * (z.y - w.y));
    return sx * sx + sy * sy;
}

inline long double speed(const flow_params& fp, const point2& z) {
    if (fp.kind == speed_kind::unit) return 1.0L;
    return sine_bump(z, fp.p) * sine_bump(z, fp.q);
}

/// Position on the flow line z0 + s (1, alpha), kept in lifted (unwrapped)
/// coordinates so the line relation holds without a mod-1 ambiguity.
struct flow_state {
    point2 z0;
    long double s = 0.0L;
    long double t = 0.0L;

    point2 lifted(long double slope) const { return {z0.x + s, z0.y + slope * s}; }
    point2 z(long double slope) const {
        const point2 l = lifted(slope);
        return {detail::wrap_unit(l.x), detail::wrap_unit(l.y)};
    }
};

/// (Y - y0) - alpha (X - x0) on the lift; zero for the exact flow.
inline long double line_residual(const flow_state& st, long double slope) {
    const point2 l = st.lifted(slope);
    return (l.y - st.z0.y) - slope * (l.x - st.z0.x);
}

namespace detail {

struct simpson_step {
    long double dt = 0.0L;   // Richardson-corrected time increment
    long double err = 0.0L;  // |S2 - S1| / 15
};

class line_integrator {
public:
    line_integrator(const flow_params& fp, point2 z0) : fp_(fp), z0_(z0), slope_(fp.slope()) {}

    long double inv_speed(long double s) const {
        const point2 z{z0_.x + s, z0_.y + slope_ * s};
        return 1.0L / speed(fp_, z);
    }

    // Simpson with one level of refinement on [a, a + h], given 1/rho at a.
    simpson_step step(long double a, long double h, long double fa) const {
        const long double fm = inv_speed(a + 0.5L * h);
        const long double fb = inv_speed(a + h);
        const long double f1 = inv_speed(a + 0.25L * h);
        const long double f3 = inv_speed(a + 0.75L * h);
        const long double s1 = h / 6.0L * (fa + 4.0L * fm + fb);
        const long double s2 = h / 12.0L * (fa + 4.0L * f1 + 2.0L * fm + 4.0L * f3 + fb);
        return {s2 + (s2 - s1) / 15.0L, std::fabs(s2 - s1) / 15.0L};
    }

    // Adaptive integral of 1/rho over [a, b] to relative tolerance tol.
    long double integrate(long double a, long double b, long double tol, int depth = 0) const {
        if (b <= a) return 0.0L;
        const simpson_step st = step(a, b - a, inv_speed(a));
        if (st.err <= tol * st.dt || depth > 60) {
            if (depth > 60) throw integration_error("flow: adaptive quadrature failed to converge");
            return st.dt;
        }
        const long double m = 0.5L * (a + b);
        return integrate(a, m, tol, depth + 1) + integrate(m, b, tol, depth + 1);
    }

    // u in [0, h] with integral over [a, a + u] equal to target, by bisection
    // on the monotone primitive.
    long double invert(long double a, long double h, long double target, long double tol) const {
        long double lo = 0.0L, hi = h;
        for (int i = 0; i < 80 && hi - lo > 0.0L; ++i) {
            const long double mid = 0.5L * (lo + hi);
            if (integrate(a, a + mid, tol) < target) lo = mid;
            else hi = mid;
        }
        return 0.5L * (lo + hi);
    }

    const point2& origin() const { return z0_; }
    long double slope() const { return slope_; }

private:
    const flow_params& fp_;
    point2 z0_;
    long double slope_;
};

// Parameter interval [u0, u1] within [0, h] on which z(a + u) lies in the
// closed eps-ball around w; empty when u0 > u1. The segment is short (well
// under 1/4) so a single lift of w covers it.
inline std::pair<long double, long double> ball_interval(const point2& lifted_a, long double slope, long double h,
                                                         const point2& w, long double eps) {
    const point2 mid{lifted_a.x + 0.5L * h, lifted_a.y + 0.5L * slope * h};
    const long double wx = mid.x - wrap_offset(mid.x, w.x);
    const long double wy = mid.y - wrap_offset(mid.y, w.y);
    const long double dx = lifted_a.x - wx;
    const long double dy = lifted_a.y - wy;
    const long double A = 1.0L + slope * slope;
    const long double B = 2.0L * (dx + slope * dy);
    const long double C = dx * dx + dy * dy - eps * eps;
    const long double disc = B * B - 4.0L * A * C;
    if (disc <= 0.0L) return {1.0L, 0.0L};
    const long double r = std::sqrt(disc);
    // Stable root pair.
    const long double qv = -0.5L * (B + std::copysign(r, B));
    long double u0 = qv / A, u1 = qv != 0.0L ? C / qv : -u0;
    if (u0 > u1) std::swap(u0, u1);
    return {std::max(u0, 0.0L), std::min(u1, h)};
}

} // namespace detail

/// Occupation times of the eps-balls around p and q.
struct sojourn {
    long double in_p = 0.0L;
    long double in_q = 0.0L;
};

class flow_integrator {
public:
    flow_integrator(const flow_params& fp, point2 start) : fp_(fp), line_(fp_, start) {
        detail::validate(fp_);
        state_.z0 = start;
        h_ = 1e-3L;
        stationary_ = fp_.kind != speed_kind::unit && speed(fp_, start) == 0.0L;
    }

    flow_integrator(const flow_integrator&) = delete;
    flow_integrator& operator=(const flow_integrator&) = delete;

    const flow_state& state() const { return state_; }
    const sojourn& occupation() const { return occ_; }
    bool stationary() const { return stationary_; }

    /// Moves the flow forward by dt, accumulating ball occupation. Negative
    /// dt is accepted only for the unit-speed hook.
    void advance(long double dt) {
        if (dt < 0.0L && fp_.kind != speed_kind::unit)
            throw domain_error("flow: negative time step is only defined for the unit-speed hook");
        if (dt == 0.0L) return;
        if (stationary_) {
            const point2 z = state_.z(line_.slope());
            credit(z, dt);
            state_.t += dt;
            return;
        }
        if (fp_.kind == speed_kind::unit) {
            advance_unit(dt);
            return;
        }
        const long double target = state_.t + dt;
        while (state_.t < target) {
            const long double s = state_.s;
            const long double fa = line_.inv_speed(s);
            long double h = std::min(h_, max_step);
            detail::simpson_step st;
            for (int tries = 0;; ++tries) {
                st = line_.step(s, h, fa);
                if (st.err <= fp_.tolerance * st.dt) break;
                h *= std::max(0.1L, 0.9L * std::pow(fp_.tolerance * st.dt / st.err, 0.2L));
                if (h < min_step || tries > 200)
                    throw integration_error("flow: step size underflow at s=" + std::to_string(static_cast<double>(s)) +
                                            ", t=" + std::to_string(static_cast<double>(state_.t)));
            }
            const long double remaining = target - state_.t;
            long double used = h;
            long double gained = st.dt;
            if (gained > remaining) {
                used = line_.invert(s, h, remaining, fp_.tolerance);
                gained = remaining;
            }
            credit_segment(s, used, gained);
            state_.s = s + used;
            state_.t = used == h ? state_.t + gained : target;
            const long double grow = st.err > 0.0L ? 0.9L * std::pow(fp_.tolerance * st.dt / st.err, 0.2L) : 2.0L;
            h_ = std::clamp(h * std::min(2.0L, grow), min_step, max_step);
        }
    }

private:
    static constexpr long double max_step = 1.0L / 64.0L;
    static constexpr long double min_step = 1e-30L;

    void advance_unit(long double dt) {
        if (dt > 0.0L) {
            credit_segment_unit(state_.s, dt);
        } else {
            credit_segment_unit(state_.s + dt, -dt);
        }
        state_.s += dt;
        state_.t += dt;
    }

    void credit(const point2& z, long double dt) {
        const long double e2 = fp_.ball_radius * fp_.ball_radius;
        if (detail::torus_sq_distance(z, fp_.p) <= e2) occ_.in_p += dt;
        else if (detail::torus_sq_distance(z, fp_.q) <= e2) occ_.in_q += dt;
    }

    // Unit speed: time inside equals arc length inside, in pieces short
    // enough for ball_interval.
    void credit_segment_unit(long double s, long double len) {
        for (long double done = 0.0L; done < len;) {
            const long double h = std::min(max_step, len - done);
            const point2 a = line_point(s + done);
            for (int b = 0; b < 2; ++b) {
                const auto [u0, u1] =
                    detail::ball_interval(a, line_.slope(), h, b == 0 ? fp_.p : fp_.q, fp_.ball_radius);
                if (u0 < u1) (b == 0 ? occ_.in_p : occ_.in_q) += u1 - u0;
            }
            done += h;
        }
    }

    void credit_segment(long double s, long double h, long double dt) {
        const point2 a = line_point(s);
        for (int b = 0; b < 2; ++b) {
            const auto [u0, u1] = detail::ball_interval(a, line_.slope(), h, b == 0 ? fp_.p : fp_.q, fp_.ball_radius);
            if (!(u0 < u1)) continue;
            long double inside;
            if (u0 <= 0.0L && u1 >= h) inside = dt;
            else inside = std::min(dt, line_.integrate(s + u0, s + u1, fp_.tolerance));
            (b == 0 ? occ_.in_p : occ_.in_q) += inside;
        }
    }

    point2 line_point(long double s) const {
        return {line_.origin().x + s, line_.origin().y + line_.slope() * s};
    }

    flow_params fp_;
    detail::line_integrator line_;
    flow_state state_;
    sojourn occ_;
    long double h_;
    bool stationary_ = false;
};

/// The state after flowing for dt from st.
inline flow_state advance(const flow_state& st, const flow_params& fp, long double dt) {
    flow_integrator it(fp, st.lifted(fp.slope()));
    it.advance(dt);
    flow_state out = st;
    out.s += it.state().s;
    out.t += it.state().t;
    return out;
}

struct empirical_row {
    long double t = 0.0L;
    point2 z;
    long double mass_p = 0.0L;
    long double mass_q = 0.0L;
    long double mass_else = 0.0L;
};

struct empirical_report {
    std::vector<empirical_row> rows;
};

/// Log-spaced grid of `per_decade` points per decade on [t_min, t_max].
inline std::vector<long double> log_grid(long double t_min, long double t_max, unsigned per_decade) {
    if (!(t_min > 0.0L && t_max > t_min) || per_decade == 0) throw domain_error("log_grid: need 0 < t_min < t_max");
    std::vector<long double> g;
    const long double decades = std::log10(t_max / t_min);
    const auto steps = static_cast<std::size_t>(std::ceil(decades * per_decade - 1e-9L));
    for (std::size_t i = 0; i <= steps; ++i)
        g.push_back(std::min(t_max, t_min * std::pow(10.0L, static_cast<long double>(i) / per_decade)));
    return g;
}

/// Time fractions spent in the eps-balls around p and q, recorded at each
/// grid time (grid must be increasing, within (0, t_max]).
inline empirical_report empirical_measures(const point2& start, const flow_params& fp, long double t_max,
                                           const std::vector<long double>& grid) {
    if (!(t_max > 0.0L)) throw domain_error("empirical_measures: t_max must be positive");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0L) || grid[i] > t_max || (i > 0 && grid[i] <= grid[i - 1]))
            throw domain_error("empirical_measures: grid must be increasing within (0, t_max]");
    }
    flow_integrator it(fp, start);
    empirical_report rep;
    for (const long double t : grid) {
        it.advance(t - it.state().t);
        empirical_row row;
        row.t = t;
        row.z = it.state().z(fp.slope());
        row.mass_p = it.occupation().in_p / t;
        row.mass_q = it.occupation().in_q / t;
        row.mass_else = 1.0L - row.mass_p - row.mass_q;
        rep.rows.push_back(row);
    }
    return rep;
}

struct historic_summary {
    long double limsup_p = 0.0L;
    long double liminf_p = 0.0L;
    long double limsup_q = 0.0L;
    long double liminf_q = 0.0L;
    bool extreme = false;
};

inline constexpr long double historic_upper = 0.9L;
inline constexpr long double historic_lower = 0.1L;

/// Sup and inf of the masses over the last decade of the grid; the report
/// must span at least two decades.
inline historic_summary historic_indicator(const empirical_report& rep) {
    if (rep.rows.size() < 2 || rep.rows.back().t < 100.0L * rep.rows.front().t)
        throw domain_error("historic_indicator: report must cover at least two decades of t");
    const long double from = rep.rows.back().t / 10.0L;
    historic_summary h;
    bool first = true;
    for (const auto& r : rep.rows) {
        if (r.t < from) continue;
        if (first) {
            h.limsup_p = h.liminf_p = r.mass_p;
            h.limsup_q = h.liminf_q = r.mass_q;
            first = false;
        }
        h.limsup_p = std::max(h.limsup_p, r.mass_p);
        h.liminf_p = std::min(h.liminf_p, r.mass_p);
        h.limsup_q = std::max(h.limsup_q, r.mass_q);
        h.liminf_q = std::min(h.liminf_q, r.mass_q);
    }
    h.extreme = h.limsup_p > historic_upper && h.limsup_q > historic_upper && h.liminf_p < historic_lower &&
                h.liminf_q < historic_lower;
    return h;
}

} // namespace extrav
