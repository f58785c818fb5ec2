#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "continued_fraction.hpp"
#include "numeric.hpp"
#include "orbit.hpp"

namespace extrav {

// ---------------------------------------------------------------------------
// Observables

/// phi(x) = 1/x + 1/(1-x)
struct phi_standard {};

/// x^-gamma + (1-x)^-gamma, gamma > 1
struct phi_gamma {
    double gamma = 2.0;
};

/// Piecewise-linear function of bounded variation on the circle. Piece i
/// covers [b_i, b_{i+1}) (with b_m = 1) and runs linearly from left_i to the
/// one-sided limit right_i. Var and the integral are exact rationals.
class bv_table {
public:
    static bv_table step(std::vector<big_rational> breakpoints, std::vector<big_rational> values) {
        auto right = values;
        return bv_table(std::move(breakpoints), std::move(values), std::move(right));
    }

    static bv_table piecewise_linear(std::vector<big_rational> breakpoints, std::vector<big_rational> left,
                                     std::vector<big_rational> right) {
        return bv_table(std::move(breakpoints), std::move(left), std::move(right));
    }

    /// Indicator of [lo, hi) with 0 <= lo < hi <= 1.
    static bv_table indicator(const big_rational& lo, const big_rational& hi) {
        if (!(lo >= 0 && lo < hi && hi <= 1)) throw domain_error("bv_table::indicator: need 0 <= lo < hi <= 1");
        std::vector<big_rational> b, v;
        if (lo > 0) {
            b.push_back(0);
            v.push_back(0);
        }
        b.push_back(lo);
        v.push_back(1);
        if (hi < 1) {
            b.push_back(hi);
            v.push_back(0);
        }
        return step(std::move(b), std::move(v));
    }

    /// x -> x on [0,1): one linear ramp and one unit jump.
    static bv_table sawtooth() { return piecewise_linear({big_rational(0)}, {big_rational(0)}, {big_rational(1)}); }

    static bv_table constant(const big_rational& c) { return step({big_rational(0)}, {c}); }

    const big_rational& total_variation() const { return variation_; }
    const big_rational& integral() const { return integral_; }

    long double operator()(long double x) const {
        auto it = std::upper_bound(b_.begin(), b_.end(), x);
        const std::size_t i = it == b_.begin() ? b_.size() - 1 : static_cast<std::size_t>(it - b_.begin()) - 1;
        const long double start = b_[i];
        const long double end = i + 1 < b_.size() ? b_[i + 1] : 1.0L;
        const long double frac = (x - start) / (end - start);
        return left_[i] + (right_[i] - left_[i]) * frac;
    }

    /// Largest change of f within distance r of x (jumps plus slopes).
    long double local_modulus(long double x, long double r) const {
        long double out = 0.0L;
        for (std::size_t i = 0; i < b_.size(); ++i) {
            const long double end = i + 1 < b_.size() ? b_[i + 1] : 1.0L;
            out = std::max(out, std::fabs(right_[i] - left_[i]) / (end - b_[i]) * r);
            long double gap = std::fabs(x - b_[i]);
            gap = std::min(gap, 1.0L - gap);
            if (gap <= r) {
                const std::size_t prev = i == 0 ? b_.size() - 1 : i - 1;
                out = std::max(out, std::fabs(left_[i] - right_[prev]));
            }
        }
        return out;
    }

private:
    bv_table(std::vector<big_rational> b, std::vector<big_rational> left, std::vector<big_rational> right) {
        const std::size_t m = b.size();
        if (m == 0 || left.size() != m || right.size() != m)
            throw domain_error("bv_table: breakpoints and values must have equal nonzero length");
        if (b.front() != 0) throw domain_error("bv_table: first breakpoint must be 0");
        for (std::size_t i = 0; i < m; ++i) {
            if (b[i] < 0 || b[i] >= 1) throw domain_error("bv_table: breakpoints must lie in [0,1)");
            if (i > 0 && b[i] <= b[i - 1]) throw domain_error("bv_table: breakpoints must increase");
        }
        variation_ = 0;
        integral_ = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const big_rational end = i + 1 < m ? b[i + 1] : big_rational(1);
            variation_ += boost::multiprecision::abs(right[i] - left[i]);
            const big_rational& next_left = i + 1 < m ? left[i + 1] : left[0];
            variation_ += boost::multiprecision::abs(next_left - right[i]);
            integral_ += (left[i] + right[i]) / 2 * (end - b[i]);
        }
        for (std::size_t i = 0; i < m; ++i) {
            b_.push_back(b[i].convert_to<long double>());
            left_.push_back(left[i].convert_to<long double>());
            right_.push_back(right[i].convert_to<long double>());
        }
    }

    std::vector<long double> b_, left_, right_;
    big_rational variation_;
    big_rational integral_;
};

using observable = std::variant<phi_standard, phi_gamma, bv_table>;

/// phi at torus distance d from 0, given d and 1 - d.
inline double_double phi_at(const double_double& d, const double_double& one_minus_d) {
    return double_double(1.0) / (d * one_minus_d);
}

inline double_double phi_at(const torus_dist& d) { return phi_at(d.value(), d.complement()); }

inline long double phi_gamma_at(long double d, double gamma) {
    return std::pow(d, -static_cast<long double>(gamma)) + std::pow(1.0L - d, -static_cast<long double>(gamma));
}

// ---------------------------------------------------------------------------
// Streaming Birkhoff sums

/// State after N steps of S_N(f)(x) = sum_{k<N} f(R^k x).
struct birkhoff_accumulator {
    std::uint64_t N = 0;
    double_double sum;
    double_double trimmed_sum; // sum minus its largest term
    double_double max_entry;
    std::uint64_t argmax = 0;
    double_double last_term; // f(R^{N-1} x)
    min_distance_record xmin;
    long double error_bound = 0.0L; // |sum - exact-alpha sum|
};

namespace detail {

inline constexpr long double rounding_unit = 0x1p-100L;

inline void absorb(birkhoff_accumulator& acc, const double_double& term, long double term_err, bool new_min,
                   torus_dist&& dist) {
    const long double dist_err = dist.error_bound;
    if (acc.N == 0) {
        acc.sum = term;
        acc.max_entry = term;
        acc.trimmed_sum = double_double(0.0);
        acc.argmax = 0;
    } else {
        acc.sum += term;
        if (term > acc.max_entry) {
            acc.trimmed_sum += acc.max_entry;
            acc.max_entry = term;
            acc.argmax = acc.N;
        } else {
            acc.trimmed_sum += term;
        }
    }
    acc.error_bound += term_err + std::fabs(static_cast<long double>(acc.sum.hi)) * rounding_unit;
    acc.last_term = term;
    if (new_min) {
        acc.xmin.x_min = std::move(dist);
        acc.xmin.argmin = acc.N;
    }
    ++acc.N;
    acc.xmin.horizon = acc.N;
    acc.xmin.x_min.error_bound = std::max(acc.xmin.x_min.error_bound, dist_err);
}

inline unsigned escalated_precision(unsigned bits) { return bits + 64; }

// Term value and certified error for a distance-symmetric observable.
inline std::pair<double_double, long double> singular_term(const observable& obs, const double_double& d,
                                                           const double_double& one_minus_d, long double err,
                                                           unsigned bits) {
    if (static_cast<long double>(d.hi) <= 2.0L * err || d.hi == 0.0)
        throw singularity_error("orbit point within its error bound of the singularity; raise precision to " +
                                    std::to_string(escalated_precision(bits)) + " bits",
                                escalated_precision(bits));
    if (std::holds_alternative<phi_standard>(obs)) {
        const double_double t = phi_at(d, one_minus_d);
        const long double tv = t.hi;
        // |phi'| <= phi^2 on (0,1); the guard keeps d - err >= d/2, hence the 4.
        return {t, 4.0L * tv * tv * err + tv * rounding_unit};
    }
    const double gamma = std::get<phi_gamma>(obs).gamma;
    const long double dv = d.to_long_double();
    const long double tv = phi_gamma_at(dv, gamma);
    const long double slope = gamma * tv / dv * std::pow(2.0L, gamma + 1.0L);
    return {double_double::from_long_double(tv), slope * err + tv * 0x1p-60L};
}

} // namespace detail

/// Incremental Birkhoff sum along one orbit. Each iterate is evaluated
/// independently from its index.
template <class Orbit>
class birkhoff_stream {
public:
    using mantissa_type = typename Orbit::mantissa_type;

    birkhoff_stream(Orbit orbit, observable obs) : orbit_(std::move(orbit)), obs_(std::move(obs)) {}

    const birkhoff_accumulator& state() const { return acc_; }

    /// f(R^N x), the term the next step() adds.
    const double_double& next_term() {
        prepare();
        return pending_term_;
    }

    /// Whether R^N x is strictly closer to 0 than every earlier point.
    bool next_is_record() {
        prepare();
        return pending_record_;
    }

    void step() {
        prepare();
        torus_dist dist{};
        if (pending_record_) {
            best_ = pending_dist_;
            dist = torus_dist{orbit_.to_big(pending_dist_), orbit_.precision_bits(), pending_err_};
        } else {
            dist.error_bound = pending_err_;
        }
        detail::absorb(acc_, pending_term_, pending_term_err_, pending_record_, std::move(dist));
        prepared_ = false;
    }

    void advance_to(std::uint64_t N) {
        while (acc_.N < N) step();
    }

private:
    void prepare() {
        if (prepared_) return;
        const std::uint64_t k = acc_.N;
        const mantissa_type v = orbit_.point(k);
        pending_dist_ = orbit_.distance(v);
        pending_err_ = orbit_.error_at(k);
        pending_record_ = acc_.N == 0 || pending_dist_ < best_;
        if (const auto* f = std::get_if<bv_table>(&obs_)) {
            const long double x = orbit_.to_dd(v).to_long_double();
            pending_term_ = double_double::from_long_double((*f)(x));
            pending_term_err_ = f->local_modulus(x, pending_err_) + 0x1p-60L;
        } else {
            const double_double d = orbit_.to_dd(pending_dist_);
            const double_double c = orbit_.to_dd(orbit_.complement(pending_dist_));
            std::tie(pending_term_, pending_term_err_) =
                detail::singular_term(obs_, d, c, pending_err_, orbit_.precision_bits());
        }
        prepared_ = true;
    }

    Orbit orbit_;
    observable obs_;
    birkhoff_accumulator acc_;
    mantissa_type best_{};
    bool prepared_ = false;
    mantissa_type pending_dist_{};
    long double pending_err_ = 0.0L;
    bool pending_record_ = false;
    double_double pending_term_;
    long double pending_term_err_ = 0.0L;
};

/// Calls f(stream) with a birkhoff_stream over the fastest orbit kernel.
template <class F>
decltype(auto) with_stream(const observable& obs, const torus_point& x, const fixed_point_angle& alpha,
                           std::uint64_t horizon, F&& f) {
    if (horizon > 0) detail::require_budget(big_int(horizon - 1), alpha.precision_bits);
    return with_orbit(x, alpha, [&](auto orbit) {
        birkhoff_stream<decltype(orbit)> s(std::move(orbit), obs);
        return f(s);
    });
}

/// One step: adds f(R^N x) to the accumulator, evaluating the iterate
/// directly with big-integer arithmetic.
inline birkhoff_accumulator accumulate(birkhoff_accumulator acc, const observable& obs, const torus_point& x,
                                       const fixed_point_angle& alpha) {
    const torus_point pt = orbit_point(x, alpha, big_int(acc.N));
    torus_dist dist = distance_to_zero(pt);
    double_double term;
    long double term_err;
    if (const auto* f = std::get_if<bv_table>(&obs)) {
        const long double xv = pt.to_long_double();
        term = double_double::from_long_double((*f)(xv));
        term_err = f->local_modulus(xv, pt.error_bound) + 0x1p-60L;
    } else {
        std::tie(term, term_err) =
            detail::singular_term(obs, dist.value(), dist.complement(), pt.error_bound, pt.precision_bits);
    }
    const bool record = acc.N == 0 || dist.mantissa < acc.xmin.x_min.mantissa;
    detail::absorb(acc, term, term_err, record, std::move(dist));
    return acc;
}

// ---------------------------------------------------------------------------
// Sampled series

/// Which N a series reports. N_max is always reported.
struct sample_schedule {
    bool powers_of_two = true;
    bool distance_records = true;
    std::vector<std::uint64_t> extra;
    std::uint64_t window_start = 1; // running maxima and minima count N >= window_start

    bool wants(std::uint64_t N, bool record) const {
        if (powers_of_two && std::has_single_bit(N)) return true;
        if (distance_records && record) return true;
        return std::find(extra.begin(), extra.end(), N) != extra.end();
    }
};

struct ratio_sample {
    std::uint64_t N = 0;
    double ratio = 0.0;             // f(R^N x) / S_N(f)(x)
    double running_max_ratio = 0.0; // over window_start <= N' <= N
};

/// Extravagance ratios f(R^N x)/S_N for 1 <= N <= N_max, reported on the
/// schedule; the running maximum covers every N, not just reported ones.
inline std::vector<ratio_sample> extravagance_series(const observable& obs, const torus_point& x,
                                                     const fixed_point_angle& alpha, std::uint64_t N_max,
                                                     const sample_schedule& schedule) {
    if (N_max < 1) throw domain_error("extravagance_series: N_max must be >= 1");
    return with_stream(obs, x, alpha, N_max + 1, [&](auto& s) {
        std::vector<ratio_sample> out;
        double running = 0.0;
        s.step();
        for (std::uint64_t N = 1; N <= N_max; ++N) {
            const bool record = s.next_is_record();
            const double ratio = (s.next_term() / s.state().sum).to_double();
            if (N >= schedule.window_start) running = std::max(running, ratio);
            if (N == N_max || schedule.wants(N, record)) out.push_back({N, ratio, running});
            if (N < N_max) s.step();
        }
        return out;
    });
}

struct theta_sample {
    std::uint64_t N = 0;
    double theta = 0.0; // S_N(phi)(x) / S_N(phi)(x - beta)
    double running_max = 0.0;
    double running_min = 0.0;
    double relative_error = 0.0;
};

inline constexpr double theta_relative_tolerance = 1e-6;

/// Theta_N(x) = S_N(phi)(x) / S_N(phi)(x - beta) for 1 <= N <= N_max.
inline std::vector<theta_sample> theta_series(const torus_point& x, const fixed_point_angle& beta,
                                              const fixed_point_angle& alpha, std::uint64_t N_max,
                                              const sample_schedule& schedule) {
    if (N_max < 1) throw domain_error("theta_series: N_max must be >= 1");
    detail::require_same_precision(beta.precision_bits, alpha.precision_bits);
    detail::require_same_precision(x.precision_bits, alpha.precision_bits);
    const big_int mask = (big_int(1) << alpha.precision_bits) - 1;
    const torus_point shifted{(x.mantissa - beta.mantissa) & mask, x.precision_bits,
                              x.error_bound + beta.error_bound()};
    return with_stream(phi_standard{}, x, alpha, N_max, [&](auto& a) {
        return with_stream(phi_standard{}, shifted, alpha, N_max, [&](auto& b) {
            std::vector<theta_sample> out;
            double hi = 0.0, lo = 0.0;
            for (std::uint64_t N = 1; N <= N_max; ++N) {
                const bool record = a.next_is_record() || b.next_is_record();
                a.step();
                b.step();
                const auto& sa = a.state();
                const auto& sb = b.state();
                const double theta = (sa.sum / sb.sum).to_double();
                const double rel = static_cast<double>(sa.error_bound / sa.sum.hi + sb.error_bound / sb.sum.hi) + 0x1p-90;
                if (rel > theta_relative_tolerance)
                    throw precision_error("theta_series: relative error " + std::to_string(rel) + " at N=" +
                                              std::to_string(N) + " exceeds tolerance",
                                          detail::escalated_precision(alpha.precision_bits));
                if (N == schedule.window_start) hi = lo = theta;
                if (N >= schedule.window_start) {
                    hi = std::max(hi, theta);
                    lo = std::min(lo, theta);
                }
                if (N == N_max || schedule.wants(N, record)) out.push_back({N, theta, hi, lo, rel});
            }
            return out;
        });
    });
}

// ---------------------------------------------------------------------------
// Runtime verifiers

struct dk_check {
    std::size_t n = 0;
    std::uint64_t q = 0;
    long double residual = 0.0L; // |S_{q_n} f(x) - q_n * integral(f)|
    long double bound = 0.0L;    // Var(f)
    bool pass = false;
};

/// Denjoy-Koksma residuals for n = 1..n_max in a single pass.
inline std::vector<dk_check> dk_residual_sweep(const bv_table& f, const rotation& rot, const torus_point& x,
                                               std::size_t n_max) {
    const long double integral = f.integral().convert_to<long double>();
    const long double var = f.total_variation().convert_to<long double>();
    const std::uint64_t last = rot.q(n_max);
    return with_stream(f, x, rot.angle, last, [&](auto& s) {
        std::vector<dk_check> out;
        for (std::size_t n = 1; n <= n_max; ++n) {
            const std::uint64_t q = rot.q(n);
            s.advance_to(q);
            const long double sum = s.state().sum.to_long_double();
            const long double residual = std::fabs(sum - static_cast<long double>(q) * integral);
            out.push_back({n, q, residual, var, residual <= var});
        }
        return out;
    });
}

inline dk_check dk_residual(const bv_table& f, const rotation& rot, const torus_point& x, std::size_t n) {
    return dk_residual_sweep(f, rot, x, n).back();
}

namespace detail {

// phi summed in compensated double precision along a word orbit, for the
// long lemma sweeps. Iterates advance by exact modular addition of the
// mantissa, which equals the per-index evaluation bit for bit.
class phi_scan {
public:
    phi_scan(const torus_point& x, const fixed_point_angle& alpha) : orbit_(x, alpha), v_(to_u128(x.mantissa)) {
        if (alpha.precision_bits < 64) throw domain_error("phi_scan: precision below 64 bits");
        step_ = to_u128(alpha.mantissa);
        mask_ = alpha.precision_bits == 128 ? ~u128(0) : ((u128(1) << alpha.precision_bits) - 1);
        scale_ = std::ldexp(1.0, -static_cast<int>(alpha.precision_bits));
        hi_scale_ = std::ldexp(1.0, 64 - static_cast<int>(alpha.precision_bits));
    }

    void advance_to(std::uint64_t N) {
        for (; k_ < N; ++k_) {
            const u128 d = orbit_.distance(v_);
            const double dv = to_double(d);
            if (static_cast<long double>(dv) <= 2.0L * orbit_.error_at(k_) || d == 0)
                throw singularity_error("orbit point within its error bound of the singularity",
                                        escalated_precision(orbit_.precision_bits()));
            add(1.0 / (dv * (1.0 - dv)));
            if (k_ == 0 || d < best_) {
                best_ = d;
                best_phi_ = 1.0 / (dv * (1.0 - dv));
            }
            v_ = (v_ + step_) & mask_;
        }
    }

    double sum() const { return sum_ + comp_; }
    double phi_at_min() const { return best_phi_; }

private:
    // Two 64-bit halves avoid the slow generic 128-bit conversion.
    double to_double(u128 d) const {
        return static_cast<double>(static_cast<std::uint64_t>(d >> 64)) * hi_scale_ +
               static_cast<double>(static_cast<std::uint64_t>(d)) * scale_;
    }

    void add(double t) {
        const double s = sum_ + t;
        comp_ += std::fabs(sum_) >= std::fabs(t) ? (sum_ - s) + t : (t - s) + sum_;
        sum_ = s;
    }

    word_orbit orbit_;
    u128 v_;
    u128 step_ = 0;
    u128 mask_ = 0;
    double scale_ = 0.0;
    double hi_scale_ = 0.0;
    std::uint64_t k_ = 0;
    u128 best_ = 0;
    double best_phi_ = 0.0;
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace detail

struct dk_adapted_check {
    std::size_t n = 0;
    std::uint64_t q = 0;
    double lhs = 0.0;   // |S_{q_n} - 2 q_n log q_n - phi(x_min,q_n)|
    double bound = 0.0; // constant * q_n
    bool pass = false;
};

/// |S_{q_n}(x) - 2 q_n log q_n - phi(x_min,q_n)| <= constant * q_n for
/// n = 1..n_max, one pass. The literal bound uses constant = 2.
inline std::vector<dk_adapted_check> lemma_dk_adapted_sweep(const torus_point& x, const rotation& rot,
                                                            std::size_t n_max, double constant = 2.0) {
    const std::uint64_t last = rot.q(n_max);
    std::vector<dk_adapted_check> out;
    const auto record = [&](std::size_t n, std::uint64_t q, double sum, double phi_min) {
        const double main = static_cast<double>(2.0L * static_cast<long double>(q) * log_big(big_int(q)));
        const double lhs = std::fabs((sum - main) - phi_min);
        const double bound = constant * static_cast<double>(q);
        out.push_back({n, q, lhs, bound, lhs <= bound});
    };
    if (rot.angle.precision_bits <= 128) {
        detail::require_budget(big_int(last), rot.angle.precision_bits);
        detail::phi_scan scan(x, rot.angle);
        for (std::size_t n = 1; n <= n_max; ++n) {
            scan.advance_to(rot.q(n));
            record(n, rot.q(n), scan.sum(), scan.phi_at_min());
        }
        return out;
    }
    return with_stream(phi_standard{}, x, rot.angle, last, [&](auto& s) {
        for (std::size_t n = 1; n <= n_max; ++n) {
            s.advance_to(rot.q(n));
            const auto& st = s.state();
            record(n, rot.q(n), st.sum.to_double(), phi_at(st.xmin.x_min).to_double());
        }
        return out;
    });
}

inline dk_adapted_check lemma_dk_adapted_check(const torus_point& x, const rotation& rot, std::size_t n,
                                               double constant = 2.0) {
    return lemma_dk_adapted_sweep(x, rot, n, constant).back();
}

struct block_check {
    std::size_t n = 0;
    std::uint64_t j = 0;
    std::uint64_t k = 0;
    double value = 0.0; // S_k(x) - phi(x_min,k)
    double lower = 0.0;
    double upper = 0.0;
    bool pass = false;
};

namespace detail {

inline std::pair<double, double> block_bounds(std::uint64_t q, std::uint64_t q_next, std::uint64_t j) {
    const long double lq = log_big(big_int(q));
    const long double jq = static_cast<long double>(j) * static_cast<long double>(q);
    const long double j1q = static_cast<long double>(j + 1) * static_cast<long double>(q);
    const long double lower = 2.0L * jq * lq - 2.0L * jq;
    const long double upper = 2.0L * j1q * lq + 2.0L * j1q +
                              4.0L * static_cast<long double>(q_next) * (2.0L + std::log(static_cast<long double>(j)));
    return {static_cast<double>(lower), static_cast<double>(upper)};
}

inline void require_block(std::uint64_t q, std::uint64_t q_next, std::uint64_t j) {
    if (j < 1 || (j + 1) * q >= q_next)
        throw domain_error("block j=" + std::to_string(j) + " is empty: need (j+1) q_n < q_{n+1}");
}

} // namespace detail

/// 2j q log q - 2j q <= S_k - phi(x_min,k) <= 2(j+1) q log q + 2(j+1) q
/// + 4 q_{n+1} (2 + log j) for k in [j q_n, (j+1) q_n], default k the block
/// midpoint.
inline block_check lemma_block_bounds_check(const torus_point& x, const rotation& rot, std::size_t n,
                                            std::uint64_t j, std::optional<std::uint64_t> k = std::nullopt) {
    const std::uint64_t q = rot.q(n);
    const std::uint64_t q_next = rot.q_next(n);
    detail::require_block(q, q_next, j);
    const std::uint64_t kk = k.value_or(j * q + q / 2);
    if (kk < j * q || kk > (j + 1) * q) throw domain_error("lemma_block_bounds_check: k outside the block");
    return with_stream(phi_standard{}, x, rot.angle, kk, [&](auto& s) {
        s.advance_to(kk);
        const auto& st = s.state();
        const double value = (st.sum - phi_at(st.xmin.x_min)).to_double();
        const auto [lower, upper] = detail::block_bounds(q, q_next, j);
        return block_check{n, j, kk, value, lower, upper, lower <= value && value <= upper};
    });
}

/// Every nonempty block (n, j) with n <= n_max at its midpoint, one pass.
inline std::vector<block_check> lemma_block_bounds_sweep(const torus_point& x, const rotation& rot,
                                                         std::size_t n_max) {
    struct task {
        std::size_t n;
        std::uint64_t j, k, q, q_next;
    };
    std::vector<task> tasks;
    for (std::size_t n = 1; n <= n_max; ++n) {
        const std::uint64_t q = rot.q(n);
        const std::uint64_t q_next = rot.q_next(n);
        for (std::uint64_t j = 1; (j + 1) * q < q_next; ++j) tasks.push_back({n, j, j * q + q / 2, q, q_next});
    }
    std::sort(tasks.begin(), tasks.end(), [](const task& a, const task& b) { return a.k < b.k; });
    std::vector<block_check> out;
    if (tasks.empty()) return out;
    const auto finish = [&](auto&& value_at) {
        for (const auto& t : tasks) {
            const double value = value_at(t.k);
            const auto [lower, upper] = detail::block_bounds(t.q, t.q_next, t.j);
            out.push_back({t.n, t.j, t.k, value, lower, upper, lower <= value && value <= upper});
        }
        std::sort(out.begin(), out.end(), [](const block_check& a, const block_check& b) {
            return a.n != b.n ? a.n < b.n : a.j < b.j;
        });
        return out;
    };
    detail::require_budget(big_int(tasks.back().k), rot.angle.precision_bits);
    if (rot.angle.precision_bits <= 128) {
        detail::phi_scan scan(x, rot.angle);
        return finish([&](std::uint64_t k) {
            scan.advance_to(k);
            return scan.sum() - scan.phi_at_min();
        });
    }
    return with_stream(phi_standard{}, x, rot.angle, tasks.back().k, [&](auto& s) {
        return finish([&](std::uint64_t k) {
            s.advance_to(k);
            return (s.state().sum - phi_at(s.state().xmin.x_min)).to_double();
        });
    });
}

struct phigamma_check {
    std::size_t n = 0;
    std::uint64_t q = 0;
    double sum = 0.0;   // S_{q_n}(phi_gamma)(x)
    double bound = 0.0; // C (q_n^gamma + phi_gamma(x_min,q_n))
    bool pass = false;
};

/// S_{q_n}(phi_gamma) <= C (q_n^gamma + phi_gamma(x_min,q_n)), n = 1..n_max.
inline std::vector<phigamma_check> phigamma_sum_sweep(const torus_point& x, const rotation& rot, double gamma,
                                                      std::size_t n_max, double constant) {
    if (!(gamma > 1.0)) throw domain_error("phigamma_sum_check: gamma must exceed 1");
    const std::uint64_t last = rot.q(n_max);
    return with_stream(phi_gamma{gamma}, x, rot.angle, last, [&](auto& s) {
        std::vector<phigamma_check> out;
        for (std::size_t n = 1; n <= n_max; ++n) {
            const std::uint64_t q = rot.q(n);
            s.advance_to(q);
            const auto& st = s.state();
            const double sum = st.sum.to_double();
            const long double at_min = phi_gamma_at(st.xmin.x_min.to_long_double(), gamma);
            const double bound = static_cast<double>(
                constant * (std::pow(static_cast<long double>(q), static_cast<long double>(gamma)) + at_min));
            out.push_back({n, q, sum, bound, sum <= bound});
        }
        return out;
    });
}

inline phigamma_check phigamma_sum_check(const torus_point& x, const rotation& rot, double gamma, std::size_t n,
                                         double constant) {
    return phigamma_sum_sweep(x, rot, gamma, n, constant).back();
}

} // namespace extrav
