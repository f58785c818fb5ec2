#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "continued_fraction.hpp"
#include "numeric.hpp"

namespace extrav {

/// A point of the circle as mantissa / 2^precision_bits, known to within
/// error_bound of the true (exact-alpha) orbit point.
struct torus_point {
    big_int mantissa;
    unsigned precision_bits = 0;
    long double error_bound = 0.0L;

    /// Nearest P-bit point to num/den (reduced mod 1); exact when den is a
    /// power of two dividing 2^P.
    static torus_point from_rational(const big_int& num, const big_int& den, unsigned precision_bits) {
        if (den <= 0) throw domain_error("torus_point: denominator must be positive");
        const big_int one = big_int(1) << precision_bits;
        big_int r = num % den;
        if (r < 0) r += den;
        big_int scaled = r << precision_bits;
        big_int m = ((scaled << 1) + den) / (den << 1);
        const bool exact = (scaled % den) == 0;
        if (m >= one) m -= one;
        return {m, precision_bits, exact ? 0.0L : std::ldexp(1.0L, -static_cast<int>(precision_bits) - 1)};
    }

    static torus_point from_angle(const fixed_point_angle& a) {
        return {a.mantissa, a.precision_bits, a.error_bound()};
    }

    double_double value() const { return dd_from_scaled(mantissa, static_cast<int>(precision_bits)); }
    long double to_long_double() const { return value().to_long_double(); }
};

/// A torus distance in [0, 1/2], same fixed-point layout as torus_point.
struct torus_dist {
    big_int mantissa;
    unsigned precision_bits = 0;
    long double error_bound = 0.0L;

    double_double value() const { return dd_from_scaled(mantissa, static_cast<int>(precision_bits)); }
    long double to_long_double() const { return value().to_long_double(); }
    /// 1 - value, computed from the complementary mantissa.
    double_double complement() const {
        return dd_from_scaled((big_int(1) << precision_bits) - mantissa, static_cast<int>(precision_bits));
    }
    /// True when the distance cannot be separated from 0 by its error bound.
    bool near_singularity() const {
        return static_cast<long double>(value().hi) < 2.0L * error_bound || mantissa == 0;
    }
};

struct min_distance_record {
    std::uint64_t horizon = 0; // K
    torus_dist x_min;
    std::uint64_t argmin = 0;
};

struct distance_record {
    big_int k;
    real_t distance;
};

namespace detail {

inline void require_same_precision(unsigned a, unsigned b) {
    if (a != b)
        throw domain_error("precision mismatch: " + std::to_string(a) + " vs " + std::to_string(b) + " bits");
}

// k * 2^-P <= 2^-52, i.e. k <= 2^(P-52).
inline void require_budget(const big_int& k, unsigned precision_bits) {
    if (k < 0) throw domain_error("iterate index must be nonnegative");
    if (precision_bits < 52 || k > (big_int(1) << (precision_bits - 52))) {
        const unsigned need = static_cast<unsigned>(bit_length(k)) + 52;
        throw precision_error("iterate " + k.str() + " needs at least " + std::to_string(need) +
                                  " bits of angle precision, have " + std::to_string(precision_bits),
                              need);
    }
}

inline big_int distance_mantissa(const big_int& v, unsigned bits) {
    const big_int one = big_int(1) << bits;
    const big_int other = one - v;
    return v < other ? v : other;
}

} // namespace detail

/// R_alpha^k(x) = x + k*alpha mod 1, by one exact multiply-and-reduce on the
/// fixed-point mantissas. error_bound = x.error_bound + k * 2^-P.
inline torus_point orbit_point(const torus_point& x, const fixed_point_angle& alpha, const big_int& k) {
    detail::require_same_precision(x.precision_bits, alpha.precision_bits);
    detail::require_budget(k, alpha.precision_bits);
    const unsigned bits = alpha.precision_bits;
    const big_int mask = (big_int(1) << bits) - 1;
    big_int m = (x.mantissa + k * alpha.mantissa) & mask;
    const long double err = x.error_bound + k.convert_to<long double>() * alpha.error_bound();
    return {std::move(m), bits, err};
}

inline torus_dist torus_distance(const torus_point& a, const torus_point& b) {
    detail::require_same_precision(a.precision_bits, b.precision_bits);
    const big_int mask = (big_int(1) << a.precision_bits) - 1;
    const big_int diff = (a.mantissa - b.mantissa) & mask;
    return {detail::distance_mantissa(diff, a.precision_bits), a.precision_bits, a.error_bound + b.error_bound};
}

inline torus_dist distance_to_zero(const torus_point& a) {
    return {detail::distance_mantissa(a.mantissa, a.precision_bits), a.precision_bits, a.error_bound};
}

// ---------------------------------------------------------------------------
// Streaming kernels. Each iterate is computed independently from k, so there
// is no drift; the word kernel covers P <= 128 with native 128-bit wraparound.

class word_orbit {
public:
    using mantissa_type = u128;

    word_orbit(const torus_point& x, const fixed_point_angle& alpha)
        : start_(to_u128(x.mantissa)), step_(to_u128(alpha.mantissa)), bits_(alpha.precision_bits),
          x_err_(x.error_bound), alpha_err_(alpha.error_bound()) {
        detail::require_same_precision(x.precision_bits, alpha.precision_bits);
        if (bits_ > 128) throw domain_error("word_orbit: precision above 128 bits");
        mask_ = bits_ == 128 ? ~u128(0) : ((u128(1) << bits_) - 1);
    }

    u128 point(std::uint64_t k) const { return (start_ + step_ * k) & mask_; }
    u128 distance(u128 v) const {
        const u128 other = (u128(0) - v) & mask_;
        return v < other ? v : other;
    }
    // 1 - d for a distance mantissa d in (0, 1/2].
    u128 complement(u128 d) const { return (u128(0) - d) & mask_; }
    double_double to_dd(u128 v) const { return dd_from_scaled(v, static_cast<int>(bits_)); }
    big_int to_big(u128 v) const { return from_u128(v); }
    long double error_at(std::uint64_t k) const {
        return x_err_ + static_cast<long double>(k) * alpha_err_;
    }
    unsigned precision_bits() const { return bits_; }

private:
    u128 start_;
    u128 step_;
    u128 mask_ = 0;
    unsigned bits_;
    long double x_err_;
    long double alpha_err_;
};

class big_orbit {
public:
    using mantissa_type = big_int;

    big_orbit(const torus_point& x, const fixed_point_angle& alpha)
        : start_(x.mantissa), step_(alpha.mantissa), bits_(alpha.precision_bits),
          mask_((big_int(1) << alpha.precision_bits) - 1), x_err_(x.error_bound), alpha_err_(alpha.error_bound()) {
        detail::require_same_precision(x.precision_bits, alpha.precision_bits);
    }

    big_int point(std::uint64_t k) const { return (start_ + step_ * k) & mask_; }
    big_int distance(const big_int& v) const { return detail::distance_mantissa(v, bits_); }
    big_int complement(const big_int& d) const { return (mask_ + 1) - d; }
    double_double to_dd(const big_int& v) const { return dd_from_scaled(v, static_cast<int>(bits_)); }
    const big_int& to_big(const big_int& v) const { return v; }
    long double error_at(std::uint64_t k) const {
        return x_err_ + static_cast<long double>(k) * alpha_err_;
    }
    unsigned precision_bits() const { return bits_; }

private:
    big_int start_;
    big_int step_;
    unsigned bits_;
    big_int mask_;
    long double x_err_;
    long double alpha_err_;
};

/// Calls f(orbit) with the fastest kernel for the given precision.
template <class F>
decltype(auto) with_orbit(const torus_point& x, const fixed_point_angle& alpha, F&& f) {
    if (alpha.precision_bits <= 128) return f(word_orbit(x, alpha));
    return f(big_orbit(x, alpha));
}

/// Strict record minima of d(0, R^k x) for k_begin <= k < K.
inline std::vector<std::pair<std::uint64_t, torus_dist>> distance_records(const torus_point& x,
                                                                          const fixed_point_angle& alpha,
                                                                          std::uint64_t k_begin, std::uint64_t K) {
    if (K > 0) detail::require_budget(big_int(K - 1), alpha.precision_bits);
    return with_orbit(x, alpha, [&](const auto& orbit) {
        std::vector<std::pair<std::uint64_t, torus_dist>> out;
        using M = typename std::decay_t<decltype(orbit)>::mantissa_type;
        M best{};
        bool have = false;
        for (std::uint64_t k = k_begin; k < K; ++k) {
            const M d = orbit.distance(orbit.point(k));
            if (!have || d < best) {
                best = d;
                have = true;
                out.emplace_back(k, torus_dist{orbit.to_big(d), orbit.precision_bits(), orbit.error_at(k)});
            }
        }
        return out;
    });
}

/// x_min,K = min_{0 <= k < K} d(0, R^k x) and its first minimizer.
inline min_distance_record min_distance_prefix(const torus_point& x, const fixed_point_angle& alpha,
                                               std::uint64_t K) {
    if (K < 1) throw domain_error("min_distance_prefix: K must be >= 1");
    const auto recs = distance_records(x, alpha, 0, K);
    min_distance_record r;
    r.horizon = K;
    r.argmin = recs.back().first;
    r.x_min = recs.back().second;
    // The bound must cover every candidate, not just the winner.
    r.x_min.error_bound = x.error_bound + static_cast<long double>(K - 1) * alpha.error_bound();
    return r;
}

/// Record minima of ||k alpha|| over 1 <= k < K, read off the convergent
/// denominators: (q_n, ||q_n alpha||) for each distinct q_n < K. K = 1 gives
/// an empty list.
inline std::vector<distance_record> closest_returns_fast(const fixed_point_angle& alpha,
                                                         const continued_fraction& cf, const big_int& K) {
    (void)alpha;
    std::vector<distance_record> out;
    if (K <= 1) return out;
    // k = 1 = q_0: ||alpha|| = 1/(a_1 + t_2) when a_1 >= 2, and q_1 = 1 covers a_1 = 1.
    const auto a1 = cf.coefficient(1);
    if (!a1) throw domain_error("closest_returns_fast: empty expansion");
    if (*a1 >= 2) {
        const big_rational t = detail::tail_value(cf, 2, 96);
        out.push_back({big_int(1), real_t(big_rational(1) / (big_rational(*a1) + t))});
    }
    std::size_t n_max = 8;
    for (;;) {
        const auto table = convergents_up_to(cf, n_max);
        const bool done = table.truncated || table.rows.empty() || table.rows.back().q >= K;
        if (done) {
            for (const auto& row : table.rows) {
                if (row.q >= K) break;
                if (!out.empty() && out.back().k == row.q) continue;
                out.push_back({row.q, row.err});
            }
            return out;
        }
        n_max *= 2;
    }
}

// ---------------------------------------------------------------------------

/// A rotation number together with its fixed-point realization and a
/// precomputed convergent table.
struct rotation {
    continued_fraction cf;
    fixed_point_angle angle;
    convergent_table table;

    rotation(continued_fraction c, unsigned precision_bits, std::size_t rows)
        : cf(std::move(c)), angle(angle_value(cf, precision_bits)), table(convergents_up_to(cf, rows)) {}

    /// q_n as a machine word (q_0 = 1).
    std::uint64_t q(std::size_t n) const {
        if (n == 0) return 1;
        const big_int& v = table.at(n).q;
        if (bit_length(v) > 63) throw domain_error("q_" + std::to_string(n) + " does not fit in 63 bits");
        return v.convert_to<std::uint64_t>();
    }

    std::uint64_t q_next(std::size_t n) const {
        const big_int& v = table.at(n).q_next;
        if (bit_length(v) > 63) throw domain_error("q_" + std::to_string(n + 1) + " does not fit in 63 bits");
        return v.convert_to<std::uint64_t>();
    }

    torus_point zero() const { return {big_int(0), angle.precision_bits, 0.0L}; }
};

} // namespace extrav
