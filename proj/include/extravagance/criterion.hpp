#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <mpfr.h>

#include "continued_fraction.hpp"
#include "numeric.hpp"

namespace extrav {

enum class gap_regime { small_gap, large_gap };

inline const char* to_string(gap_regime r) { return r == gap_regime::small_gap ? "SmallGap" : "LargeGap"; }

/// SmallGap iff q_next < 2 q log q (natural log), decided exactly: 2 q log q
/// is enclosed with directed rounding and the precision doubles until the
/// enclosure excludes q_next. The boundary itself is never attained for
/// integer q >= 2 since log q is irrational.
inline gap_regime regime_of(const big_int& q, const big_int& q_next) {
    if (q < 2) throw domain_error("regime_of: q must be >= 2");
    // Compare logs first; log_big is accurate to far better than the margin.
    const long double lq = log_big(q);
    const long double gap = log_big(q_next) - (std::log(2.0L) + lq + std::log(lq));
    if (std::fabs(gap) > 1e-9L * (1.0L + lq)) return gap < 0 ? gap_regime::small_gap : gap_regime::large_gap;
    mpfr_prec_t prec = static_cast<mpfr_prec_t>(bit_length(q_next) + 64);
    for (;;) {
        mpfr_t lo, hi;
        mpfr_init2(lo, prec);
        mpfr_init2(hi, prec);
        mpfr_set_z(lo, q.backend().data(), MPFR_RNDD);
        mpfr_set_z(hi, q.backend().data(), MPFR_RNDU);
        mpfr_log(lo, lo, MPFR_RNDD);
        mpfr_log(hi, hi, MPFR_RNDU);
        mpfr_mul_z(lo, lo, q.backend().data(), MPFR_RNDD);
        mpfr_mul_z(hi, hi, q.backend().data(), MPFR_RNDU);
        mpfr_mul_2ui(lo, lo, 1, MPFR_RNDD);
        mpfr_mul_2ui(hi, hi, 1, MPFR_RNDU);
        const int below = mpfr_cmp_z(lo, q_next.backend().data()); // > 0: q_next < lo
        const int above = mpfr_cmp_z(hi, q_next.backend().data()); // <= 0: q_next >= hi
        mpfr_clear(lo);
        mpfr_clear(hi);
        if (below > 0) return gap_regime::small_gap;
        if (above <= 0) return gap_regime::large_gap;
        prec *= 2;
    }
}

struct wterm {
    std::size_t n = 0;
    gap_regime regime = gap_regime::small_gap;
    long double value = 0.0L;
    long double log_qn = 0.0L;
    long double log_qn1 = 0.0L;
};

/// W_n from rows n and n+1 of the table (row n carries q_{n+1}). Returns
/// nullopt for q_n < 3, where the formula degenerates.
inline std::optional<wterm> w_term(const convergent_table& table, std::size_t n) {
    const convergent& row = table.at(n);
    if (row.q < 3) return std::nullopt;
    if (row.q_next <= 0) throw domain_error("w_term: q_" + std::to_string(n + 1) + " not available");
    wterm w;
    w.n = n;
    w.regime = regime_of(row.q, row.q_next);
    w.log_qn = log_big(row.q);
    w.log_qn1 = log_big(row.q_next);
    if (w.regime == gap_regime::small_gap) {
        w.value = (w.log_qn1 - w.log_qn) / w.log_qn;
    } else {
        // log(q_{n+1} / (q_n log q_n)) >= log 2 in this regime.
        const long double inner = w.log_qn1 - w.log_qn - std::log(w.log_qn);
        w.value = std::max(1.0L, std::log(w.log_qn) - std::log(inner)) / w.log_qn;
    }
    return w;
}

enum class series_verdict_kind { converges_heuristic, diverges_heuristic, inconclusive };

inline const char* to_string(series_verdict_kind v) {
    switch (v) {
    case series_verdict_kind::converges_heuristic: return "ConvergesHeuristic";
    case series_verdict_kind::diverges_heuristic: return "DivergesHeuristic";
    default: return "Inconclusive";
    }
}

struct classify_params {
    double kappa = 0.1;             // harmonic minorant W_n >= kappa/n
    double tail_tolerance = 1e-6;   // geometric tail bound threshold
};

struct series_verdict {
    std::size_t n_terms = 0; // terms with q_n >= 3 that entered the sum
    long double partial_sum = 0.0L;
    long double tail_estimate = 0.0L; // +inf when no geometric fit exists
    series_verdict_kind verdict = series_verdict_kind::inconclusive;
    std::string rationale;
    bool truncated = false;
    std::vector<wterm> terms;
    std::vector<long double> partial_sums; // after each entry of terms
};

/// Heuristic reading of sum W_n from n <= n_max. The window is the last
/// ceil(n_max/2) indices. Divergence: every window term has W_n >= kappa/n.
/// Convergence: r = max consecutive ratio W_{n+1}/W_n over the window,
/// tail = W_last * r/(1-r) < tolerance.
inline series_verdict classify(const continued_fraction& cf, std::size_t n_max, const classify_params& params = {}) {
    if (n_max < 10) throw domain_error("classify: n_max must be >= 10");
    const convergent_table table = convergents_up_to(cf, n_max);
    series_verdict out;
    const std::size_t last = table.rows.size();
    out.truncated = table.truncated;
    for (std::size_t n = 1; n <= last; ++n) {
        const auto w = w_term(table, n);
        if (!w) continue;
        out.partial_sum += w->value;
        out.terms.push_back(*w);
        out.partial_sums.push_back(out.partial_sum);
    }
    out.n_terms = out.terms.size();
    out.tail_estimate = std::numeric_limits<long double>::infinity();

    const std::size_t window = (n_max + 1) / 2;
    std::vector<const wterm*> tail;
    for (const auto& w : out.terms)
        if (w.n + window > last) tail.push_back(&w);
    if (tail.size() < 2) {
        out.rationale = "too few terms in the window of " + std::to_string(window) + " indices";
        return out;
    }

    bool minorant = tail.size() == window;
    std::size_t first_below = 0;
    for (const wterm* w : tail) {
        if (w->value < params.kappa / static_cast<long double>(w->n)) {
            minorant = false;
            if (first_below == 0) first_below = w->n;
        }
    }
    long double r = 0.0L;
    for (std::size_t i = 1; i < tail.size(); ++i) r = std::max(r, tail[i]->value / tail[i - 1]->value);
    if (r < 1.0L) out.tail_estimate = tail.back()->value * r / (1.0L - r);

    char buf[256];
    if (minorant) {
        out.verdict = series_verdict_kind::diverges_heuristic;
        std::snprintf(buf, sizeof buf, "harmonic minorant: W_n >= %.3g/n for all n in [%zu, %zu]", params.kappa,
                      tail.front()->n, tail.back()->n);
    } else if (out.tail_estimate < params.tail_tolerance) {
        out.verdict = series_verdict_kind::converges_heuristic;
        std::snprintf(buf, sizeof buf, "geometric tail: ratio %.6Lg over n in [%zu, %zu], tail %.6Lg < %.3g", r,
                      tail.front()->n, tail.back()->n, out.tail_estimate, params.tail_tolerance);
    } else {
        std::snprintf(buf, sizeof buf,
                      "neither rule fired: W_%zu < %.3g/n; geometric ratio %.6Lg, tail %.6Lg >= %.3g",
                      first_below, params.kappa, r, out.tail_estimate, params.tail_tolerance);
    }
    out.rationale = buf;
    return out;
}

/// Sanity bound W_n <= C log log q_n / log q_n, meaningful for q_n >= 16.
inline bool within_loglog_bound(const wterm& w, long double constant = 10.0L) {
    return w.value <= constant * std::log(w.log_qn) / w.log_qn;
}

} // namespace extrav
