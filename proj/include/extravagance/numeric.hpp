#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/gmp.hpp>
#include <boost/multiprecision/mpfr.hpp>

namespace extrav {

using big_int = boost::multiprecision::mpz_int;
using big_rational = boost::multiprecision::mpq_rational;
// ~166 bits; used for approximation errors and other certified reals.
using real_t = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<50>,
                                             boost::multiprecision::et_off>;
using u128 = unsigned __int128;

// ---------------------------------------------------------------------------
// Errors. Each kind maps to a distinct CLI exit code.

class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class domain_error : public error {
public:
    using error::error;
};

class precision_error : public error {
public:
    precision_error(const std::string& what, unsigned required_bits)
        : error(what), required_bits_(required_bits) {}
    unsigned required_bits() const noexcept { return required_bits_; }

private:
    unsigned required_bits_;
};

// A computed point sits closer to the singularity than its own error bound.
class singularity_error : public precision_error {
public:
    using precision_error::precision_error;
};

class resource_error : public error {
public:
    resource_error(const std::string& what, std::size_t index)
        : error(what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class integration_error : public error {
public:
    using error::error;
};

// ---------------------------------------------------------------------------

inline std::size_t bit_length(const big_int& v) {
    if (v == 0) return 0;
    return boost::multiprecision::msb(v) + 1;
}

inline unsigned bit_length(u128 v) {
    const auto hi = static_cast<std::uint64_t>(v >> 64);
    if (hi != 0) return 128u - static_cast<unsigned>(std::countl_zero(hi));
    return 64u - static_cast<unsigned>(std::countl_zero(static_cast<std::uint64_t>(v)));
}

/// Natural logarithm of a positive big integer from its bit length and
/// leading 64 bits. Relative error is at the long double rounding level.
inline long double log_big(const big_int& v) {
    if (v <= 0) throw domain_error("log_big: argument must be positive");
    const std::size_t bits = bit_length(v);
    if (bits <= 64) return std::log(static_cast<long double>(v.convert_to<std::uint64_t>()));
    const std::size_t shift = bits - 64;
    const big_int top = v >> shift;
    const auto lead = top.convert_to<std::uint64_t>();
    // lead in [2^63, 2^64); the discarded tail only adds a relative 2^-63.
    const long double ln2 = 0.693147180559945309417232121458176568L;
    return std::log(static_cast<long double>(lead)) + static_cast<long double>(shift) * ln2;
}

// ---------------------------------------------------------------------------
// Double-double arithmetic (about 106 significant bits). Used for streaming
// Birkhoff sums where mpfr per term would be too slow.

struct double_double {
    double hi = 0.0;
    double lo = 0.0;

    constexpr double_double() = default;
    constexpr double_double(double h) : hi(h), lo(0.0) {}
    constexpr double_double(double h, double l) : hi(h), lo(l) {}

    static double_double from_long_double(long double v) {
        const double h = static_cast<double>(v);
        return {h, static_cast<double>(v - static_cast<long double>(h))};
    }

    double to_double() const { return hi + lo; }
    long double to_long_double() const {
        return static_cast<long double>(hi) + static_cast<long double>(lo);
    }
};

namespace dd_detail {

inline double_double quick_two_sum(double a, double b) {
    const double s = a + b;
    return {s, b - (s - a)};
}

inline double_double two_sum(double a, double b) {
    const double s = a + b;
    const double bb = s - a;
    return {s, (a - (s - bb)) + (b - bb)};
}

inline double_double two_prod(double a, double b) {
    const double p = a * b;
    return {p, std::fma(a, b, -p)};
}

} // namespace dd_detail

inline double_double operator+(const double_double& a, const double_double& b) {
    using namespace dd_detail;
    double_double s = two_sum(a.hi, b.hi);
    double_double t = two_sum(a.lo, b.lo);
    s.lo += t.hi;
    s = quick_two_sum(s.hi, s.lo);
    s.lo += t.lo;
    return quick_two_sum(s.hi, s.lo);
}

inline double_double operator-(const double_double& a) { return {-a.hi, -a.lo}; }
inline double_double operator-(const double_double& a, const double_double& b) { return a + (-b); }

inline double_double operator*(const double_double& a, const double_double& b) {
    using namespace dd_detail;
    double_double p = two_prod(a.hi, b.hi);
    p.lo += a.hi * b.lo + a.lo * b.hi;
    return quick_two_sum(p.hi, p.lo);
}

inline double_double operator/(const double_double& a, const double_double& b) {
    using namespace dd_detail;
    const double q1 = a.hi / b.hi;
    double_double r = a - b * double_double(q1);
    const double q2 = r.hi / b.hi;
    r = r - b * double_double(q2);
    const double q3 = r.hi / b.hi;
    return quick_two_sum(q1, q2) + double_double(q3);
}

inline double_double& operator+=(double_double& a, const double_double& b) { return a = a + b; }
inline double_double& operator-=(double_double& a, const double_double& b) { return a = a - b; }

inline bool operator<(const double_double& a, const double_double& b) {
    return a.hi < b.hi || (a.hi == b.hi && a.lo < b.lo);
}
inline bool operator>(const double_double& a, const double_double& b) { return b < a; }
inline bool operator==(const double_double& a, const double_double& b) {
    return a.hi == b.hi && a.lo == b.lo;
}

inline double_double abs(const double_double& a) { return a.hi < 0.0 ? -a : a; }

/// m * 2^-scale as a double-double, keeping the leading ~106 bits of m.
inline double_double dd_from_scaled(u128 m, int scale) {
    const unsigned bits = bit_length(m);
    if (bits <= 53) return {std::ldexp(static_cast<double>(static_cast<std::uint64_t>(m)), -scale), 0.0};
    const unsigned shift = bits - 53;
    const auto head = static_cast<std::uint64_t>(m >> shift);
    const u128 tail = m & ((u128(1) << shift) - 1);
    const double h = std::ldexp(static_cast<double>(head), static_cast<int>(shift) - scale);
    // tail < 2^shift <= 2^75: the u128 -> double conversion rounds once.
    const double l = std::ldexp(static_cast<double>(tail), -scale);
    return dd_detail::quick_two_sum(h, l);
}

inline u128 to_u128(const big_int& v) {
    const big_int mask64 = (big_int(1) << 64) - 1;
    return static_cast<u128>((v & mask64).convert_to<std::uint64_t>()) |
           (static_cast<u128>(((v >> 64) & mask64).convert_to<std::uint64_t>()) << 64);
}

inline double_double dd_from_scaled(const big_int& m, int scale) {
    const std::size_t bits = bit_length(m);
    if (bits <= 128) return dd_from_scaled(to_u128(m), scale);
    const std::size_t shift = bits - 128;
    return dd_from_scaled(to_u128(m >> shift), scale - static_cast<int>(shift));
}

inline big_int from_u128(u128 v) {
    big_int r = static_cast<std::uint64_t>(v >> 64);
    r <<= 64;
    r += static_cast<std::uint64_t>(v);
    return r;
}

} // namespace extrav
