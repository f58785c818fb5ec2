#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "continued_fraction.hpp"
#include "numeric.hpp"

namespace extrav {

using json = nlohmann::json;

/// A malformed or inconsistent config field.
class config_error : public domain_error {
public:
    config_error(const std::string& field, const std::string& what)
        : domain_error("config field '" + field + "': " + what), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// ---------------------------------------------------------------------------
// Formatting

inline std::string fmt_real(long double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(v));
    return buf;
}

inline std::string fmt_real(const real_t& v) { return fmt_real(v.convert_to<long double>()); }

/// FNV-1a, 64-bit.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Hash of the canonical (sorted-key, compact) JSON text.
inline std::string config_hash(const json& cfg) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(cfg.dump())));
    return buf;
}

/// CSV text with a leading comment line carrying the config hash and the
/// column units, then the column header.
class csv_table {
public:
    csv_table(std::vector<std::string> columns, std::string units) : columns_(std::move(columns)), units_(std::move(units)) {}

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_.size()) throw std::logic_error("csv_table: row width mismatch");
        rows_.push_back(cells);
    }

    std::string render(const std::string& hash) const {
        std::ostringstream os;
        os << "# config_hash=" << hash << " units: " << units_ << '\n';
        write_line(os, columns_);
        for (const auto& r : rows_) write_line(os, r);
        return os.str();
    }

    std::size_t size() const { return rows_.size(); }

private:
    static void write_line(std::ostringstream& os, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os << ',';
            os << cells[i];
        }
        os << '\n';
    }

    std::vector<std::string> columns_;
    std::string units_;
    std::vector<std::vector<std::string>> rows_;
};

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw domain_error("cannot open output file " + path);
    f << text;
    if (!f) throw domain_error("failed writing " + path);
}

// ---------------------------------------------------------------------------
// Config field access

namespace detail {

inline const json& field(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) throw config_error(path, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) throw config_error(path.empty() ? key : path + "." + key, "missing");
    return *it;
}

inline std::string join_path(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

} // namespace detail

/// Big integer from a decimal string (or a small JSON integer).
inline big_int parse_big_int(const json& v, const std::string& path) {
    if (v.is_number_integer()) return big_int(v.get<long long>());
    if (!v.is_string()) throw config_error(path, "expected a decimal integer string");
    const std::string s = v.get<std::string>();
    const std::size_t start = !s.empty() && (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (s.size() == start || s.find_first_not_of("0123456789", start) != std::string::npos)
        throw config_error(path, "not a decimal integer: '" + s + "'");
    return big_int(s);
}

/// Rational from "p/q", "p" or an integer.
inline big_rational parse_big_rational(const json& v, const std::string& path) {
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        const auto slash = s.find('/');
        if (slash != std::string::npos) {
            const big_int p = parse_big_int(json(s.substr(0, slash)), path);
            const big_int q = parse_big_int(json(s.substr(slash + 1)), path);
            if (q == 0) throw config_error(path, "zero denominator");
            return big_rational(p, q);
        }
    }
    return big_rational(parse_big_int(v, path));
}

inline std::vector<big_int> parse_big_int_list(const json& v, const std::string& path) {
    if (!v.is_array()) throw config_error(path, "expected an array of decimal strings");
    std::vector<big_int> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(parse_big_int(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

template <class T>
T get_or(const json& obj, const std::string& key, const T& fallback, const std::string& path) {
    if (!obj.is_object()) throw config_error(path, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw config_error(detail::join_path(path, key), "wrong type");
    }
}

template <class T>
T get_required(const json& obj, const std::string& key, const std::string& path) {
    const json& v = detail::field(obj, key, path);
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw config_error(detail::join_path(path, key), "wrong type");
    }
}

// ---------------------------------------------------------------------------
// Continued fraction records

/// Source spec -> continued fraction. Kinds: rational {p, q}, surd
/// {a, b, c, d} for (a + b sqrt d)/c, luczak {b, c, count[, bit_budget]},
/// explicit {prefix, period}.
inline continued_fraction cf_from_json(const json& spec, const std::string& path) {
    const std::string kind = get_required<std::string>(spec, "kind", path);
    const auto f = [&](const char* key) -> const json& { return detail::field(spec, key, path); };
    const auto p = [&](const char* key) { return detail::join_path(path, key); };
    if (kind == "rational") return cf_from_rational(parse_big_int(f("p"), p("p")), parse_big_int(f("q"), p("q")));
    if (kind == "surd")
        return cf_from_quadratic(parse_big_int(f("a"), p("a")), parse_big_int(f("b"), p("b")),
                                 parse_big_int(f("c"), p("c")), parse_big_int(f("d"), p("d")));
    if (kind == "luczak") {
        const auto count = get_required<std::size_t>(spec, "count", path);
        const auto budget = get_or<std::size_t>(spec, "bit_budget", default_luczak_bit_budget, path);
        return luczak_coefficients(parse_big_rational(f("b"), p("b")), parse_big_int(f("c"), p("c")), count, budget);
    }
    if (kind == "explicit") {
        std::vector<big_int> prefix, period;
        if (spec.contains("prefix")) prefix = parse_big_int_list(spec["prefix"], p("prefix"));
        if (spec.contains("period")) period = parse_big_int_list(spec["period"], p("period"));
        return cf_from_coefficients(std::move(prefix), std::move(period));
    }
    throw config_error(p("kind"), "unknown kind '" + kind + "' (rational, surd, luczak, explicit)");
}

inline json big_list_json(const std::vector<big_int>& v) {
    json out = json::array();
    for (const auto& x : v) out.push_back(x.str());
    return out;
}

/// Self-describing record: source kind and parameters plus the first
/// `prefix_len` coefficients (fewer for a short finite expansion).
inline json cf_to_json(const continued_fraction& cf, std::size_t prefix_len) {
    json src;
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, rational_source>) {
                src = {{"kind", "rational"}, {"p", s.p.str()}, {"q", s.q.str()}};
            } else if constexpr (std::is_same_v<S, quadratic_source>) {
                src = {{"kind", "surd"}, {"a", s.a.str()}, {"b", s.b.str()}, {"c", s.c.str()}, {"d", s.d.str()}};
            } else if constexpr (std::is_same_v<S, explicit_source>) {
                src = {{"kind", "explicit"}, {"prefix", big_list_json(s.prefix)}, {"period", big_list_json(s.period)}};
            } else {
                const std::string b = boost::multiprecision::denominator(s.b) == 1
                                          ? boost::multiprecision::numerator(s.b).str()
                                          : boost::multiprecision::numerator(s.b).str() + "/" +
                                                boost::multiprecision::denominator(s.b).str();
                src = {{"kind", "luczak"}, {"b", b}, {"c", s.c.str()}, {"count", s.count}, {"bit_budget", s.bit_budget}};
            }
        },
        cf.source());
    return {{"source", src}, {"coefficients", big_list_json(cf.prefix(prefix_len))}};
}

/// Rebuilds from a record and checks the stored prefix against the source.
inline continued_fraction cf_from_record(const json& record) {
    const continued_fraction cf = cf_from_json(detail::field(record, "source", ""), "source");
    const auto stored = parse_big_int_list(detail::field(record, "coefficients", ""), "coefficients");
    const auto fresh = cf.prefix(stored.size());
    if (fresh != stored) throw config_error("coefficients", "stored prefix disagrees with the source");
    return cf;
}

} // namespace extrav
