#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "birkhoff.hpp"
#include "continued_fraction.hpp"
#include "criterion.hpp"
#include "flow.hpp"
#include "io.hpp"
#include "orbit.hpp"
#include "sampling.hpp"

namespace extrav {

/// Runs body(i) for i in [0, count) on up to `threads` workers. The first
/// exception (lowest index) is rethrown after all workers stop.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex m;
    std::size_t failed_at = count;
    std::exception_ptr failure;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(m);
                    if (i < failed_at) {
                        failed_at = i;
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

struct run_options {
    std::optional<unsigned> precision_bits;
    std::optional<std::uint64_t> seed;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
};

/// File name -> contents.
using run_output = std::map<std::string, std::string>;

namespace detail {

inline constexpr unsigned default_precision_bits = 128;

// The config with command-line overrides folded in; this is what gets hashed.
inline json effective_config(json cfg, const run_options& opt) {
    if (!cfg.is_object()) throw config_error("", "config must be a JSON object");
    if (opt.precision_bits) cfg["precision_bits"] = *opt.precision_bits;
    if (opt.seed) cfg["seed"] = *opt.seed;
    return cfg;
}

inline unsigned precision_of(const json& cfg) {
    const auto p = get_or<unsigned>(cfg, "precision_bits", default_precision_bits, "");
    if (p < 64) throw config_error("precision_bits", "must be at least 64");
    return p;
}

inline std::uint64_t seed_of(const json& cfg) { return get_or<std::uint64_t>(cfg, "seed", 0, ""); }

inline const json& section(const json& cfg, const std::string& name) {
    static const json empty = json::object();
    const auto it = cfg.find(name);
    if (it == cfg.end()) return empty;
    if (!it->is_object()) throw config_error(name, "expected an object");
    return *it;
}

inline std::string mantissa_hex(const big_int& m, unsigned bits) {
    std::ostringstream os;
    os << std::hex << m;
    std::string s = os.str();
    const std::size_t width = (bits + 3) / 4;
    if (s.size() < width) s.insert(0, width - s.size(), '0');
    return "0x" + s;
}

inline std::vector<torus_point> draw_samples(const json& sec, const json& cfg, unsigned bits, const std::string& path) {
    std::vector<torus_point> xs;
    if (sec.contains("x")) {
        const big_rational v = parse_big_rational(sec["x"], path + ".x");
        xs.push_back(torus_point::from_rational(boost::multiprecision::numerator(v),
                                                boost::multiprecision::denominator(v), bits));
        return xs;
    }
    const auto n = get_or<std::size_t>(sec, "samples", 1, path);
    const std::uint64_t seed = seed_of(cfg);
    for (std::size_t i = 0; i < n; ++i) xs.push_back(sample_point_at(seed, i, bits));
    return xs;
}

inline csv_table samples_table(const std::vector<torus_point>& xs) {
    csv_table t({"sample", "x_mantissa", "x"}, "x as a P-bit hex mantissa and its decimal value in [0,1)");
    for (std::size_t i = 0; i < xs.size(); ++i)
        t.row({std::to_string(i), mantissa_hex(xs[i].mantissa, xs[i].precision_bits), fmt_real(xs[i].to_long_double())});
    return t;
}

inline observable observable_from_json(const json& spec, const std::string& path) {
    const std::string kind = get_or<std::string>(spec, "kind", "phi", path);
    if (kind == "phi") return phi_standard{};
    if (kind == "phi_gamma") {
        const double g = get_required<double>(spec, "gamma", path);
        if (!(g > 1.0)) throw config_error(join_path(path, "gamma"), "must exceed 1");
        return phi_gamma{g};
    }
    if (kind == "indicator")
        return bv_table::indicator(parse_big_rational(field(spec, "lo", path), join_path(path, "lo")),
                                   parse_big_rational(field(spec, "hi", path), join_path(path, "hi")));
    if (kind == "sawtooth") return bv_table::sawtooth();
    if (kind == "constant") return bv_table::constant(parse_big_rational(field(spec, "value", path), join_path(path, "value")));
    throw config_error(join_path(path, "kind"), "unknown observable '" + kind + "'");
}

inline sample_schedule schedule_from_json(const json& spec, const std::string& path) {
    sample_schedule s;
    s.powers_of_two = get_or<bool>(spec, "powers_of_two", true, path);
    s.distance_records = get_or<bool>(spec, "records", true, path);
    s.extra = get_or<std::vector<std::uint64_t>>(spec, "extra", {}, path);
    s.window_start = get_or<std::uint64_t>(spec, "window_start", 1, path);
    if (s.window_start < 1) throw config_error(join_path(path, "window_start"), "must be >= 1");
    return s;
}

inline std::string pass_str(bool b) { return b ? "1" : "0"; }

} // namespace detail

/// Convergent table: cf.csv plus the coefficient record cf_record.json.
inline run_output run_cf(const json& config, const run_options& opt = {}) {
    const json cfg = detail::effective_config(config, opt);
    const continued_fraction cf = cf_from_json(detail::field(cfg, "alpha", ""), "alpha");
    std::size_t n_default = 20;
    if (const auto* lz = std::get_if<luczak_source>(&cf.source())) n_default = lz->count;
    const auto n_max = get_or<std::size_t>(detail::section(cfg, "cf"), "n_max", n_default, "cf");
    if (n_max < 1) throw config_error("cf.n_max", "must be >= 1");
    const convergent_table table = convergents_up_to(cf, n_max);
    csv_table t({"n", "a", "p", "q", "err", "w"},
                "n index; a, p, q exact integers; err = ||q_n alpha|| and w = err*q_{n+1} (dimensionless)");
    for (const auto& r : table.rows)
        t.row({std::to_string(r.n), r.a.str(), r.p.str(), r.q.str(), fmt_real(r.err), fmt_real(r.w)});
    json rec = cf_to_json(cf, n_max);
    rec["truncated"] = table.truncated;
    const std::string hash = config_hash(cfg);
    rec["config_hash"] = hash;
    return {{"cf.csv", t.render(hash)}, {"cf_record.json", rec.dump(2) + "\n"}};
}

/// W_n series: wterms.csv and verdict.json.
inline run_output run_classify(const json& config, const run_options& opt = {}) {
    const json cfg = detail::effective_config(config, opt);
    const continued_fraction cf = cf_from_json(detail::field(cfg, "alpha", ""), "alpha");
    const json& sec = detail::section(cfg, "classify");
    classify_params params;
    params.kappa = get_or<double>(sec, "kappa", params.kappa, "classify");
    params.tail_tolerance = get_or<double>(sec, "tail_tolerance", params.tail_tolerance, "classify");
    const auto n_max = get_or<std::size_t>(sec, "n_max", 60, "classify");
    const series_verdict v = classify(cf, n_max, params);
    csv_table t({"n", "regime", "value", "partial_sum"}, "n index; value and partial_sum dimensionless (natural log)");
    for (std::size_t i = 0; i < v.terms.size(); ++i)
        t.row({std::to_string(v.terms[i].n), to_string(v.terms[i].regime), fmt_real(v.terms[i].value),
               fmt_real(v.partial_sums[i])});
    const std::string hash = config_hash(cfg);
    json j = {{"config_hash", hash},
              {"n_terms", v.n_terms},
              {"partial_sum", fmt_real(v.partial_sum)},
              {"tail_estimate", fmt_real(v.tail_estimate)},
              {"verdict", to_string(v.verdict)},
              {"rationale", v.rationale},
              {"truncated", v.truncated},
              {"kappa", params.kappa},
              {"tail_tolerance", params.tail_tolerance}};
    return {{"wterms.csv", t.render(hash)}, {"verdict.json", j.dump(2) + "\n"}};
}

/// Extravagance ratios per sampled x: ratios.csv and samples.csv.
inline run_output run_simulate(const json& config, const run_options& opt = {}) {
    const json cfg = detail::effective_config(config, opt);
    const unsigned bits = detail::precision_of(cfg);
    const continued_fraction cf = cf_from_json(detail::field(cfg, "alpha", ""), "alpha");
    const fixed_point_angle alpha = angle_value(cf, bits);
    const json& sec = detail::section(cfg, "simulate");
    const observable obs = detail::observable_from_json(sec.value("observable", json::object()), "simulate.observable");
    const auto n_max = get_or<std::uint64_t>(sec, "n_max", 1000000, "simulate");
    const sample_schedule sched = detail::schedule_from_json(sec.value("schedule", json::object()), "simulate.schedule");
    const auto xs = detail::draw_samples(sec, cfg, bits, "simulate");
    std::vector<std::vector<ratio_sample>> results(xs.size());
    parallel_for(xs.size(), opt.threads, [&](std::size_t i) { results[i] = extravagance_series(obs, xs[i], alpha, n_max, sched); });
    csv_table t({"sample", "N", "ratio", "running_max"}, "N steps; ratio = f(R^N x)/S_N(f)(x) (dimensionless)");
    for (std::size_t i = 0; i < results.size(); ++i)
        for (const auto& r : results[i])
            t.row({std::to_string(i), std::to_string(r.N), fmt_real(r.ratio), fmt_real(r.running_max_ratio)});
    const std::string hash = config_hash(cfg);
    return {{"ratios.csv", t.render(hash)}, {"samples.csv", detail::samples_table(xs).render(hash)}};
}

/// Theta series per sampled x: theta.csv and samples.csv.
inline run_output run_theta(const json& config, const run_options& opt = {}) {
    const json cfg = detail::effective_config(config, opt);
    const unsigned bits = detail::precision_of(cfg);
    const fixed_point_angle alpha = angle_value(cf_from_json(detail::field(cfg, "alpha", ""), "alpha"), bits);
    const json& sec = detail::section(cfg, "theta");
    const json& beta_spec = detail::field(sec, "beta", "theta");
    const fixed_point_angle beta = get_or<std::string>(beta_spec, "kind", "", "theta.beta") == "zero"
                                       ? fixed_point_angle{big_int(0), bits}
                                       : angle_value(cf_from_json(beta_spec, "theta.beta"), bits);
    const auto n_max = get_or<std::uint64_t>(sec, "n_max", 1000000, "theta");
    const sample_schedule sched = detail::schedule_from_json(sec.value("schedule", json::object()), "theta.schedule");
    const auto xs = detail::draw_samples(sec, cfg, bits, "theta");
    std::vector<std::vector<theta_sample>> results(xs.size());
    parallel_for(xs.size(), opt.threads, [&](std::size_t i) { results[i] = theta_series(xs[i], beta, alpha, n_max, sched); });
    csv_table t({"sample", "N", "theta", "running_max", "running_min"},
                "N steps; theta = S_N(phi)(x)/S_N(phi)(x-beta) (dimensionless)");
    for (std::size_t i = 0; i < results.size(); ++i)
        for (const auto& r : results[i])
            t.row({std::to_string(i), std::to_string(r.N), fmt_real(r.theta), fmt_real(r.running_max),
                   fmt_real(r.running_min)});
    const std::string hash = config_hash(cfg);
    return {{"theta.csv", t.render(hash)}, {"samples.csv", detail::samples_table(xs).render(hash)}};
}

/// Runtime verifiers per sampled x: checks.csv and samples.csv. Each check
/// row is lower <= lhs <= bound; one-sided checks report lower = 0.
inline run_output run_checks(const json& config, const run_options& opt = {}) {
    const json cfg = detail::effective_config(config, opt);
    const unsigned bits = detail::precision_of(cfg);
    const json& sec = detail::section(cfg, "checks");
    const auto n_max = get_or<std::size_t>(sec, "n_max", 18, "checks");
    const rotation rot(cf_from_json(detail::field(cfg, "alpha", ""), "alpha"), bits, n_max + 1);
    if (rot.table.rows.size() < n_max) throw config_error("checks.n_max", "expansion has fewer rows");
    const auto kinds = get_or<std::vector<std::string>>(sec, "kinds", {"dk_adapted"}, "checks");
    const double constant = get_or<double>(sec, "constant", 2.0, "checks");
    const double gamma = get_or<double>(sec, "gamma", 2.0, "checks");
    const double gamma_constant = get_or<double>(sec, "gamma_constant", 50.0, "checks");
    std::vector<observable> functions;
    if (sec.contains("functions")) {
        for (std::size_t i = 0; i < sec["functions"].size(); ++i)
            functions.push_back(detail::observable_from_json(sec["functions"][i], "checks.functions[" + std::to_string(i) + "]"));
    } else {
        functions.push_back(bv_table::indicator(big_rational(0), big_rational(1, 2)));
    }
    for (const auto& k : kinds)
        if (k != "dk" && k != "dk_adapted" && k != "block_bounds" && k != "phigamma")
            throw config_error("checks.kinds", "unknown check '" + k + "' (dk, dk_adapted, block_bounds, phigamma)");
    const auto xs = detail::draw_samples(sec, cfg, bits, "checks");
    using row_t = std::vector<std::string>;
    std::vector<std::vector<row_t>> results(xs.size());
    parallel_for(xs.size(), opt.threads, [&](std::size_t i) {
        auto& rows = results[i];
        const std::string s = std::to_string(i);
        for (const auto& k : kinds) {
            if (k == "dk") {
                for (std::size_t f = 0; f < functions.size(); ++f) {
                    const auto* table = std::get_if<bv_table>(&functions[f]);
                    if (!table) throw config_error("checks.functions", "dk needs bounded-variation functions");
                    for (const auto& c : dk_residual_sweep(*table, rot, xs[i], n_max))
                        rows.push_back({s, "dk[" + std::to_string(f) + "]", std::to_string(c.n), "0", fmt_real(c.residual),
                                        "0", fmt_real(c.bound), detail::pass_str(c.pass)});
                }
            } else if (k == "dk_adapted") {
                for (const auto& c : lemma_dk_adapted_sweep(xs[i], rot, n_max, constant))
                    rows.push_back({s, k, std::to_string(c.n), "0", fmt_real(c.lhs), "0", fmt_real(c.bound),
                                    detail::pass_str(c.pass)});
            } else if (k == "block_bounds") {
                for (const auto& c : lemma_block_bounds_sweep(xs[i], rot, n_max))
                    rows.push_back({s, k, std::to_string(c.n), std::to_string(c.j), fmt_real(c.value), fmt_real(c.lower),
                                    fmt_real(c.upper), detail::pass_str(c.pass)});
            } else {
                for (const auto& c : phigamma_sum_sweep(xs[i], rot, gamma, n_max, gamma_constant))
                    rows.push_back({s, k, std::to_string(c.n), "0", fmt_real(c.sum), "0", fmt_real(c.bound),
                                    detail::pass_str(c.pass)});
            }
        }
    });
    csv_table t({"sample", "check", "n", "j", "lhs", "lower", "bound", "pass"},
                "n convergent index; j block index; lhs, lower, bound in units of the observable; pass 1/0");
    for (const auto& rows : results)
        for (const auto& r : rows) t.row(r);
    const std::string hash = config_hash(cfg);
    return {{"checks.csv", t.render(hash)}, {"samples.csv", detail::samples_table(xs).render(hash)}};
}

/// Flow occupation: flow.csv and historic.json.
inline run_output run_flow(const json& config, const run_options& opt = {}) {
    const json cfg = detail::effective_config(config, opt);
    const unsigned bits = detail::precision_of(cfg);
    const json& sec = detail::section(cfg, "flow");
    flow_params fp;
    fp.alpha = angle_value(cf_from_json(detail::field(cfg, "alpha", ""), "alpha"), bits);
    const auto pt = [&](const char* key, point2 fallback) {
        if (!sec.contains(key)) return fallback;
        const auto v = get_required<std::vector<double>>(sec, key, "flow");
        if (v.size() != 2) throw config_error(std::string("flow.") + key, "expected [x, y]");
        return point2{v[0], v[1]};
    };
    fp.p = pt("p", {0.0L, 0.0L});
    fp.q = pt("q", {0.5L, 0.5L});
    const std::string kind = get_or<std::string>(sec, "speed", "product", "flow");
    if (kind == "unit") fp.kind = speed_kind::unit;
    else if (kind != "product") throw config_error("flow.speed", "expected 'product' or 'unit'");
    fp.ball_radius = get_or<double>(sec, "ball_radius", 0.05, "flow");
    fp.tolerance = get_or<double>(sec, "tolerance", 1e-10, "flow");
    const auto t_max = get_or<double>(sec, "t_max", 1e4, "flow");
    const auto t_min = get_or<double>(sec, "t_min", 1.0, "flow");
    const auto per_decade = get_or<unsigned>(sec, "per_decade", 10, "flow");
    std::vector<point2> starts;
    if (sec.contains("start")) {
        starts.push_back(pt("start", {}));
    } else {
        splitmix64 rng(detail::seed_of(cfg));
        const auto n = get_or<std::size_t>(sec, "samples", 1, "flow");
        for (std::size_t i = 0; i < n; ++i) {
            const double x = rng.uniform();
            starts.push_back({x, rng.uniform()});
        }
    }
    const auto grid = log_grid(t_min, t_max, per_decade);
    std::vector<empirical_report> reports(starts.size());
    parallel_for(starts.size(), opt.threads, [&](std::size_t i) { reports[i] = empirical_measures(starts[i], fp, t_max, grid); });
    csv_table t({"sample", "t", "z_x", "z_y", "mass_p", "mass_q"},
                "t flow time; z on the unit torus; masses are time fractions in the eps-balls");
    json summary = json::array();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        for (const auto& r : reports[i].rows)
            t.row({std::to_string(i), fmt_real(r.t), fmt_real(r.z.x), fmt_real(r.z.y), fmt_real(r.mass_p),
                   fmt_real(r.mass_q)});
        json h = {{"sample", i}, {"start", {fmt_real(starts[i].x), fmt_real(starts[i].y)}}};
        if (t_max >= 100.0 * t_min) {
            const historic_summary hs = historic_indicator(reports[i]);
            h["limsup_p"] = fmt_real(hs.limsup_p);
            h["liminf_p"] = fmt_real(hs.liminf_p);
            h["limsup_q"] = fmt_real(hs.limsup_q);
            h["liminf_q"] = fmt_real(hs.liminf_q);
            h["extreme"] = hs.extreme;
        }
        summary.push_back(h);
    }
    const std::string hash = config_hash(cfg);
    json j = {{"config_hash", hash}, {"samples", summary}};
    return {{"flow.csv", t.render(hash)}, {"historic.json", j.dump(2) + "\n"}};
}

using runner = run_output (*)(const json&, const run_options&);

inline runner find_runner(const std::string& name) {
    static const std::map<std::string, runner> table = {{"cf", &run_cf},           {"classify", &run_classify},
                                                        {"simulate", &run_simulate}, {"theta", &run_theta},
                                                        {"checks", &run_checks},   {"flow", &run_flow}};
    const auto it = table.find(name);
    return it == table.end() ? nullptr : it->second;
}

/// 0 ok, 2 domain/config/resource errors, 3 precision/singularity/integration.
inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const precision_error*>(&e) || dynamic_cast<const integration_error*>(&e)) return 3;
    return 2;
}

} // namespace extrav
