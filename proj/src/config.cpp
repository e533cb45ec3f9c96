#include "volcascade/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "volcascade/error.hpp"

namespace volcascade {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Shortest decimal that parses back to the same double.
std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw InputError("config: " + key + " expects a number, got '" + s + "'");
    return v;
}

long long parse_int(const std::string& key, const std::string& s) {
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw InputError("config: " + key + " expects an integer, got '" + s + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw InputError("config: " + key + " expects an unsigned integer, got '" + s + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw InputError("config: " + key + " expects true/false, got '" + s + "'");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& s, F parse_one) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(static_cast<T>(parse_one(key, item)));
    }
    return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F fmt) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += fmt(xs[i]);
    }
    return out;
}

// Binds config keys to struct members for both directions.
class Binder {
public:
    void number(const std::string& key, double& v) {
        entries_.push_back({key, [&v] { return format_double(v); },
                            [&v, key](const std::string& s) { v = parse_double(key, s); }});
    }
    void integer(const std::string& key, int& v) {
        entries_.push_back({key, [&v] { return std::to_string(v); },
                            [&v, key](const std::string& s) { v = static_cast<int>(parse_int(key, s)); }});
    }
    void u64(const std::string& key, std::uint64_t& v) {
        entries_.push_back({key, [&v] { return std::to_string(v); },
                            [&v, key](const std::string& s) { v = parse_u64(key, s); }});
    }
    void boolean(const std::string& key, bool& v) {
        entries_.push_back({key, [&v] { return std::string(v ? "true" : "false"); },
                            [&v, key](const std::string& s) { v = parse_bool(key, s); }});
    }
    void text(const std::string& key, std::string& v) {
        entries_.push_back({key, [&v] { return v; }, [&v](const std::string& s) { v = s; }});
    }
    void optional_number(const std::string& key, std::optional<double>& v) {
        entries_.push_back({key, [&v] { return v ? format_double(*v) : std::string{}; },
                            [&v, key](const std::string& s) {
                                if (s.empty() || s == "none")
                                    v.reset();
                                else
                                    v = parse_double(key, s);
                            }});
    }
    void int_list(const std::string& key, std::vector<int>& v) {
        entries_.push_back({key, [&v] { return join(v, [](int x) { return std::to_string(x); }); },
                            [&v, key](const std::string& s) {
                                v = parse_list<int>(key, s, [](const std::string& k, const std::string& x) {
                                    return parse_int(k, x);
                                });
                            }});
    }
    void number_list(const std::string& key, std::vector<double>& v) {
        entries_.push_back({key, [&v] { return join(v, format_double); },
                            [&v, key](const std::string& s) { v = parse_list<double>(key, s, parse_double); }});
    }

    KeyValues dump() const {
        KeyValues kv;
        for (const auto& e : entries_) kv[e.key] = e.get();
        return kv;
    }

    void load(const KeyValues& kv, const std::string& what) const {
        for (const auto& [k, v] : kv) {
            bool found = false;
            for (const auto& e : entries_) {
                if (e.key == k) {
                    e.set(v);
                    found = true;
                    break;
                }
            }
            if (!found) throw InputError(what + ": unknown key '" + k + "'");
        }
    }

private:
    struct Entry {
        std::string key;
        std::function<std::string()> get;
        std::function<void(const std::string&)> set;
    };
    std::vector<Entry> entries_;
};

void bind(Binder& b, PipelineConfig& c) {
    b.number("q", c.q);
    b.number("xc", c.x_c);
    b.integer("dl", c.gap_minutes);
    b.integer("dt", c.horizon);
    b.integer("dt_alt", c.alt_horizon);
    b.integer("step", c.step);
    b.integer("smooth", c.smooth_minutes);
    b.integer("min_days", c.min_days);
    b.number("activity_floor", c.activity_floor);
    b.text("calendar", c.calendar);
    b.u64("seed", c.seed);
    b.integer("pdf_bins_per_decade", c.pdf_bins_per_decade);
    b.number("pdf_lo", c.pdf_lo);
    b.number("pdf_hi", c.pdf_hi);
    b.number("calibration_ratio", c.calibration_ratio);
    b.boolean("use_calibrated_xc", c.use_calibrated_x_c);
    b.integer("bath_bins", c.bath_bins);
    b.integer("activity_bins", c.activity_bins);
    b.number("eta_v", c.eta_v);
    b.number("m_lo", c.m_lo);
    b.number("m_hi", c.m_hi);
    b.number("m_width", c.m_width);
    b.integer("magnitude_window", c.magnitude_window);
    b.int_list("resolution_steps", c.resolution_steps);
    b.number_list("resolution_xc", c.resolution_x_c);
}

std::string magnitude_law_name(MagnitudeLaw law) { return law == MagnitudeLaw::pareto ? "pareto" : "log_uniform"; }

void bind(Binder& b, GeneratorSpec& s, std::string& law) {
    b.integer("days", s.days);
    b.integer("symbols", s.symbols);
    b.integer("day_length", s.day_length);
    b.integer("dt", s.horizon);
    b.integer("tc_lo", s.tc_lo);
    b.integer("tc_hi", s.tc_hi);
    b.number("shock_fraction", s.shock_fraction);
    b.number("omega_b", s.omega_b);
    b.number("omega_a", s.omega_a);
    b.number("alpha_b", s.alpha_b);
    b.number("alpha_a", s.alpha_a);
    b.number("omega_spread", s.omega_spread);
    b.number("background", s.background);
    b.number("max_probability", s.max_probability);
    b.number("q", s.q);
    b.number("eta_v", s.eta_v);
    b.text("magnitude_law", law);
    b.number("v_min", s.v_min);
    b.number("v_max", s.v_max);
    b.number("stock_dispersion", s.stock_dispersion);
    b.optional_number("pi_b", s.laws.pi_b);
    b.optional_number("pi_a", s.laws.pi_a);
    b.number("productivity_scale", s.laws.productivity_scale);
    b.optional_number("c_b_b", s.laws.c_b_b);
    b.optional_number("c_b_a", s.laws.c_b_a);
    b.number("bath_noise", s.laws.bath_noise);
    b.number("price_scale", s.price_scale);
    b.number("trades_min", s.trades_min);
    b.number("trades_max", s.trades_max);
    b.text("start_date", s.start_date);
    b.u64("seed", s.seed);
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw InputError("config line " + std::to_string(lineno) + ": expected key = value");
        const auto key = trim(t.substr(0, eq));
        if (key.empty()) throw InputError("config line " + std::to_string(lineno) + ": empty key");
        if (kv.count(key)) throw InputError("config line " + std::to_string(lineno) + ": duplicate key " + key);
        kv[key] = trim(t.substr(eq + 1));
    }
    return kv;
}

KeyValues read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_key_values(ss.str());
}

std::string format_key_values(const KeyValues& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

void PipelineConfig::validate() const {
    auto fail = [](const std::string& m) { throw InputError("config: " + m); };
    if (!(q > 0.0) || !(x_c > 0.0)) fail("q and xc must be positive");
    if (gap_minutes <= 0 || smooth_minutes <= 0 || min_days <= 0) fail("dl, smooth and min_days must be positive");
    if (horizon <= 0 || alt_horizon <= 0) fail("dt must be positive");
    if (2 * horizon >= kRegularDayMinutes || 2 * alt_horizon >= kRegularDayMinutes)
        fail("dt must be shorter than half a trading day");
    if (step != 1 && step != 5 && step != 10) fail("step must be 1, 5 or 10");
    if (horizon % step != 0) fail("dt must be a multiple of step");
    if (activity_floor < 0.0) fail("activity_floor must be non-negative");
    if (pdf_bins_per_decade <= 0 || !(pdf_lo > 0.0) || !(pdf_hi > pdf_lo)) fail("invalid pdf binning");
    if (!(calibration_ratio > 1.0)) fail("calibration_ratio must exceed 1");
    if (bath_bins < 2 || activity_bins < 1) fail("bin counts too small");
    if (!(eta_v > 0.0)) fail("eta_v must be positive");
    if (!(m_width > 0.0) || !(m_hi > m_lo)) fail("invalid magnitude grid");
    if (magnitude_window < 0) fail("magnitude_window must be non-negative");
    for (int s : resolution_steps)
        if (s != 1 && s != 5 && s != 10) fail("resolution steps must be 1, 5 or 10");
    if (!resolution_x_c.empty() && resolution_x_c.size() != resolution_steps.size())
        fail("resolution_xc needs one value per resolution step");
}

KeyValues PipelineConfig::to_key_values() const {
    Binder b;
    auto copy = *this;
    bind(b, copy);
    return b.dump();
}

PipelineConfig PipelineConfig::from_key_values(const KeyValues& kv) {
    PipelineConfig c;
    Binder b;
    bind(b, c);
    b.load(kv, "pipeline config");
    c.validate();
    return c;
}

KeyValues to_key_values(const GeneratorSpec& spec) {
    Binder b;
    auto copy = spec;
    std::string law = magnitude_law_name(spec.magnitude_law);
    bind(b, copy, law);
    return b.dump();
}

GeneratorSpec generator_spec_from_key_values(const KeyValues& kv) {
    GeneratorSpec spec;
    std::string law = magnitude_law_name(spec.magnitude_law);
    Binder b;
    bind(b, spec, law);
    b.load(kv, "generator spec");
    if (law == "pareto")
        spec.magnitude_law = MagnitudeLaw::pareto;
    else if (law == "log_uniform")
        spec.magnitude_law = MagnitudeLaw::log_uniform;
    else
        throw InputError("generator spec: magnitude_law must be pareto or log_uniform");
    spec.validate();
    return spec;
}

}  // namespace volcascade
