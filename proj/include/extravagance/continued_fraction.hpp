#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "numeric.hpp"

namespace extrav {

// ---------------------------------------------------------------------------
// Sources of a rotation number alpha in (0,1).

struct rational_source {
    big_int p;
    big_int q;
};

/// (a + b*sqrt(d)) / c
struct quadratic_source {
    big_int a;
    big_int b;
    big_int c;
    big_int d;
};

/// Finite prefix followed by an optional repeating block. An empty period
/// means the list is the whole (rational) expansion.
struct explicit_source {
    std::vector<big_int> prefix;
    std::vector<big_int> period;
};

/// a_n = c^ceil(b^n) with rational b > 1 and integer c > 1.
struct luczak_source {
    big_rational b;
    big_int c;
    std::size_t count = 0;
    std::size_t bit_budget = 0;
};

using cf_source = std::variant<rational_source, quadratic_source, explicit_source, luczak_source>;

inline constexpr std::size_t default_luczak_bit_budget = std::size_t(1) << 24;

namespace detail {

inline big_int floor_div(const big_int& a, const big_int& b) {
    big_int q = a / b; // truncates toward zero
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

// Complete-quotient state for (P + sqrt(D)) / Q with Q | (D - P^2).
struct surd_state {
    big_int P;
    big_int Q;
    big_int D;
    big_int root; // floor(sqrt(D))

    big_int next() {
        const big_int a = Q > 0 ? floor_div(P + root, Q) : floor_div(P + root + 1, Q);
        P = a * Q - P;
        Q = (D - P * P) / Q;
        return a;
    }
};

inline big_int luczak_exponent(const big_rational& b, std::size_t n) {
    const big_int num = boost::multiprecision::pow(boost::multiprecision::numerator(b), static_cast<unsigned>(n));
    const big_int den = boost::multiprecision::pow(boost::multiprecision::denominator(b), static_cast<unsigned>(n));
    return (num + den - 1) / den;
}

} // namespace detail

/// A rotation number given by its partial-quotient stream a_1, a_2, ...
///
/// Rational sources are expanded eagerly into canonical form (last
/// coefficient >= 2). Irrational sources are extended on demand; copies
/// share the materialized prefix, and extension is serialized by a mutex.
class continued_fraction {
public:
    const cf_source& source() const { return state_->source; }

    /// True when the expansion is finite (alpha rational).
    bool is_finite() const { return state_->finite; }

    /// Length of a finite expansion; nullopt for irrational sources.
    std::optional<std::size_t> length() const {
        if (!state_->finite) return std::nullopt;
        return state_->coeffs.size();
    }

    /// a_n for n >= 1, or nullopt past the end of a finite expansion.
    /// Throws resource_error if a generator exceeds its bit budget.
    std::optional<big_int> coefficient(std::size_t n) const {
        if (n == 0) throw domain_error("coefficient index starts at 1");
        std::lock_guard lock(state_->mutex);
        if (!extend_locked(n)) return std::nullopt;
        return state_->coeffs[n - 1];
    }

    /// The first min(count, available) coefficients.
    std::vector<big_int> prefix(std::size_t count) const {
        std::lock_guard lock(state_->mutex);
        extend_locked(count);
        const std::size_t k = std::min(count, state_->coeffs.size());
        return {state_->coeffs.begin(), state_->coeffs.begin() + static_cast<std::ptrdiff_t>(k)};
    }

    std::size_t materialized() const {
        std::lock_guard lock(state_->mutex);
        return state_->coeffs.size();
    }

    friend continued_fraction cf_from_rational(const big_int& p, const big_int& q);
    friend continued_fraction cf_from_quadratic(const big_int& a, const big_int& b, const big_int& c,
                                                const big_int& d);
    friend continued_fraction cf_from_coefficients(std::vector<big_int> prefix, std::vector<big_int> period);
    friend continued_fraction luczak_coefficients(const big_rational& b, const big_int& c, std::size_t count,
                                                  std::size_t bit_budget);

private:
    struct state {
        cf_source source;
        bool finite = false;
        std::vector<big_int> coeffs;
        std::optional<detail::surd_state> surd;
        mutable std::mutex mutex;
    };

    explicit continued_fraction(std::shared_ptr<state> s) : state_(std::move(s)) {}

    // Requires the mutex. Returns false if fewer than n coefficients exist.
    bool extend_locked(std::size_t n) const {
        auto& st = *state_;
        if (st.finite) return n <= st.coeffs.size();
        while (st.coeffs.size() < n) {
            const std::size_t next = st.coeffs.size() + 1;
            if (st.surd) {
                st.coeffs.push_back(st.surd->next());
            } else if (const auto* ex = std::get_if<explicit_source>(&st.source)) {
                const std::size_t i = next - 1;
                if (i < ex->prefix.size())
                    st.coeffs.push_back(ex->prefix[i]);
                else
                    st.coeffs.push_back(ex->period[(i - ex->prefix.size()) % ex->period.size()]);
            } else if (const auto* lz = std::get_if<luczak_source>(&st.source)) {
                st.coeffs.push_back(luczak_term(*lz, next));
            } else {
                return false;
            }
        }
        return true;
    }

    static big_int luczak_term(const luczak_source& src, std::size_t n) {
        const big_int e = detail::luczak_exponent(src.b, n);
        // c^e has at most e * bitlen(c) bits.
        const big_int est = e * big_int(bit_length(src.c));
        if (est > big_int(src.bit_budget) || e > big_int(std::numeric_limits<unsigned>::max()))
            throw resource_error("luczak coefficient a_" + std::to_string(n) + " exceeds the bit budget of " +
                                     std::to_string(src.bit_budget) + " bits",
                                 n);
        return boost::multiprecision::pow(src.c, e.convert_to<unsigned>());
    }

    std::shared_ptr<state> state_;
};

/// Canonical expansion of p/q for 0 < p < q.
inline continued_fraction cf_from_rational(const big_int& p, const big_int& q) {
    if (p <= 0 || q <= 0 || p >= q)
        throw domain_error("cf_from_rational: need 0 < p < q, got p=" + p.str() + ", q=" + q.str());
    const big_int g = boost::multiprecision::gcd(p, q);
    auto st = std::make_shared<continued_fraction::state>();
    st->source = rational_source{p / g, q / g};
    st->finite = true;
    // alpha = p/q = 1/(q/p): Euclid on (q, p).
    big_int num = q / g, den = p / g;
    while (den != 0) {
        st->coeffs.push_back(num / den);
        big_int r = num % den;
        num = den;
        den = r;
    }
    return continued_fraction(std::move(st));
}

/// Periodic expansion of (a + b*sqrt(d)) / c, which must lie in (0,1).
inline continued_fraction cf_from_quadratic(const big_int& a, const big_int& b, const big_int& c,
                                            const big_int& d) {
    if (d <= 0) throw domain_error("cf_from_quadratic: d must be positive");
    if (c == 0) throw domain_error("cf_from_quadratic: c must be nonzero");
    if (b == 0) throw domain_error("cf_from_quadratic: b = 0 is rational, use cf_from_rational");
    const big_int r = boost::multiprecision::sqrt(d);
    if (r * r == d) throw domain_error("cf_from_quadratic: d is a perfect square, use cf_from_rational");

    detail::surd_state s;
    s.D = b * b * d;
    s.P = b > 0 ? a : big_int(-a);
    s.Q = b > 0 ? c : big_int(-c);
    if ((s.D - s.P * s.P) % s.Q != 0) {
        const big_int m = boost::multiprecision::abs(s.Q);
        s.P *= m;
        s.D *= m * m;
        s.Q *= m;
    }
    s.root = boost::multiprecision::sqrt(s.D);
    // a_0 = floor(alpha) must be 0, i.e. alpha in (0,1) (never 0: irrational).
    if (s.next() != 0) throw domain_error("cf_from_quadratic: value is outside (0,1)");

    auto st = std::make_shared<continued_fraction::state>();
    st->source = quadratic_source{a, b, c, d};
    st->surd = s;
    return continued_fraction(std::move(st));
}

/// Explicit expansion [prefix..., period, period, ...]. With an empty period
/// the list is finite and is folded into canonical form.
inline continued_fraction cf_from_coefficients(std::vector<big_int> prefix, std::vector<big_int> period) {
    if (prefix.empty() && period.empty()) throw domain_error("cf_from_coefficients: empty coefficient list");
    for (const auto* v : {&prefix, &period})
        for (const auto& x : *v)
            if (x < 1) throw domain_error("cf_from_coefficients: coefficients must be >= 1, got " + x.str());
    auto st = std::make_shared<continued_fraction::state>();
    if (period.empty()) {
        std::vector<big_int> coeffs = prefix;
        if (coeffs.size() > 1 && coeffs.back() == 1) {
            coeffs.pop_back();
            coeffs.back() += 1;
        }
        if (coeffs.size() == 1 && coeffs.front() == 1)
            throw domain_error("cf_from_coefficients: [1] is the integer 1, not in (0,1)");
        st->finite = true;
        st->coeffs = coeffs;
    }
    st->source = explicit_source{std::move(prefix), std::move(period)};
    return continued_fraction(std::move(st));
}

/// Rotation number with a_n = c^ceil(b^n). The first `count` coefficients
/// are materialized immediately; later ones are generated on demand.
inline continued_fraction luczak_coefficients(const big_rational& b, const big_int& c, std::size_t count,
                                              std::size_t bit_budget = default_luczak_bit_budget) {
    if (b <= 1) throw domain_error("luczak_coefficients: b must exceed 1");
    if (c <= 1) throw domain_error("luczak_coefficients: c must exceed 1");
    if (count < 1) throw domain_error("luczak_coefficients: count must be >= 1");
    auto st = std::make_shared<continued_fraction::state>();
    st->source = luczak_source{b, c, count, bit_budget};
    continued_fraction cf(std::move(st));
    cf.prefix(count);
    return cf;
}

// ---------------------------------------------------------------------------
// Convergents.

/// One row of the approximation table. err = ||q_n alpha|| and
/// w = err * q_{n+1}, both carrying an absolute error below 2^-80 (relative
/// for err).
struct convergent {
    std::size_t n = 0;
    big_int a;      // a_n
    big_int p;
    big_int q;
    big_int q_next; // q_{n+1}
    real_t err;
    real_t w;
    big_rational tail; // [0; a_{n+2}, ...] to within 2^-96, exact for a finite expansion

    /// err and w as exact rationals from the tail enclosure; these resolve
    /// the strict bounds even when err is within 2^-166 of 1/q_{n+1}.
    big_rational err_exact() const { return big_rational(1) / (big_rational(q_next) + big_rational(q) * tail); }
    big_rational w_exact() const { return err_exact() * big_rational(q_next); }
};

struct convergent_table {
    std::vector<convergent> rows; // rows[i].n == i + 1
    bool truncated = false;       // the stream ended before n_max

    const convergent& at(std::size_t n) const {
        if (n < 1 || n > rows.size()) throw domain_error("convergent index " + std::to_string(n) + " not in table");
        return rows[n - 1];
    }
};

namespace detail {

// t = [0; a_start, a_start+1, ...] enclosed to width 2^-target_bits (or
// exactly, if the expansion ends). Returns the midpoint.
inline big_rational tail_value(const continued_fraction& cf, std::size_t start, unsigned target_bits) {
    // Convergents P_k/Q_k of the tail expansion.
    big_int p_prev = 1, p_cur = 0, q_prev = 0, q_cur = 1;
    const big_int scale = big_int(1) << target_bits;
    for (std::size_t i = start;; ++i) {
        const auto a = cf.coefficient(i);
        if (!a) return big_rational(p_cur, q_cur);
        big_int p_next = *a * p_cur + p_prev;
        big_int q_next = *a * q_cur + q_prev;
        p_prev = std::move(p_cur);
        p_cur = std::move(p_next);
        q_prev = std::move(q_cur);
        q_cur = std::move(q_next);
        // |P_k/Q_k - P_{k-1}/Q_{k-1}| = 1/(Q_k Q_{k-1}) brackets t.
        if (q_prev > 0 && q_cur * q_prev > scale) {
            const big_rational lo(p_cur, q_cur);
            const big_rational hi(p_prev, q_prev);
            return (lo + hi) / 2;
        }
    }
}

} // namespace detail

/// Rows n = 1..n_max. A row needs a_{n+1}, so a finite expansion of length
/// m yields rows 1..m-1 and sets `truncated` when n_max is larger.
inline convergent_table convergents_up_to(const continued_fraction& cf, std::size_t n_max) {
    if (n_max < 1) throw domain_error("convergents_up_to: n_max must be >= 1");
    convergent_table table;
    big_int p_prev = 1, p = 0, q_prev = 0, q = 1; // p_{-1}, p_0, q_{-1}, q_0
    for (std::size_t n = 1; n <= n_max; ++n) {
        const auto a = cf.coefficient(n);
        const auto a_next = cf.coefficient(n + 1);
        if (!a || !a_next) {
            table.truncated = true;
            break;
        }
        big_int p_new = *a * p + p_prev;
        big_int q_new = *a * q + q_prev;
        p_prev = std::move(p);
        p = std::move(p_new);
        q_prev = std::move(q);
        q = std::move(q_new);

        convergent row;
        row.n = n;
        row.a = *a;
        row.p = p;
        row.q = q;
        row.q_next = *a_next * q + q_prev;
        // ||q_n alpha|| = 1 / (q_{n+1} + q_n t), t = [0; a_{n+2}, ...].
        row.tail = detail::tail_value(cf, n + 2, 96);
        const big_rational err = row.err_exact();
        row.err = real_t(err);
        row.w = real_t(err * big_rational(row.q_next));
        table.rows.push_back(std::move(row));
    }
    return table;
}

/// log q_n with relative error well below 2^-50, from bit length and
/// leading bits (q_n may be far beyond any machine word).
inline long double log_q(const convergent& conv) { return log_big(conv.q); }

// ---------------------------------------------------------------------------
// Fixed-point realization of alpha.

/// mantissa / 2^precision_bits with |value - alpha| <= 2^-precision_bits.
struct fixed_point_angle {
    big_int mantissa;
    unsigned precision_bits = 0;

    long double error_bound() const { return std::ldexp(1.0L, -static_cast<int>(precision_bits)); }
    long double to_long_double() const {
        const auto v = dd_from_scaled(mantissa, static_cast<int>(precision_bits));
        return v.to_long_double();
    }
};

namespace detail {

inline big_int round_scaled(const big_int& p, const big_int& q, unsigned bits) {
    // round(p * 2^bits / q) for p, q > 0
    return ((p << (bits + 1)) + q) / (q << 1);
}

inline fixed_point_angle clamp_angle(big_int m, unsigned bits) {
    const big_int one = big_int(1) << bits;
    if (m >= one) m = one - 1;
    return {std::move(m), bits};
}

} // namespace detail

/// alpha to within 2^-P, P >= 64, via the first convergent with
/// q_n q_{n+1} > 2^(P+1) (or exactly, for a rational source).
inline fixed_point_angle angle_value(const continued_fraction& cf, unsigned precision_bits) {
    if (precision_bits < 64) throw domain_error("angle_value: precision must be at least 64 bits");
    const big_int target = big_int(1) << (precision_bits + 1);
    big_int p_prev = 1, p = 0, q_prev = 0, q = 1;
    try {
        for (std::size_t n = 1;; ++n) {
            const auto a = cf.coefficient(n);
            if (!a) return detail::clamp_angle(detail::round_scaled(p, q, precision_bits), precision_bits);
            big_int p_new = *a * p + p_prev;
            big_int q_new = *a * q + q_prev;
            p_prev = std::move(p);
            p = std::move(p_new);
            q_prev = std::move(q);
            q = std::move(q_new);
            // |alpha - p_n/q_n| < 1/(q_n q_{n+1}) and q_{n+1} >= q_n + q_{n-1}.
            if (q * (q + q_prev) > target && cf.coefficient(n + 1))
                return detail::clamp_angle(detail::round_scaled(p, q, precision_bits), precision_bits);
        }
    } catch (const resource_error& e) {
        throw precision_error(std::string("angle_value: cannot reach requested precision: ") + e.what(),
                              precision_bits);
    }
}

} // namespace extrav
