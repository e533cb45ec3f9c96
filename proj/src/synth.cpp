#include "volcascade/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "volcascade/error.hpp"
#include "volcascade/parallel.hpp"
#include "volcascade/random.hpp"

namespace volcascade {

namespace {

// Random stream identifiers for derive_seed.
constexpr std::uint64_t kDayStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kSignStream = 3;
constexpr std::uint64_t kActivityStream = 4;
constexpr std::uint64_t kTradeStream = 5;

constexpr int kMaxRedraws = 1000;

// Upper-tail quantile of the standard normal by bisection on erfc.
double normal_upper_quantile(double p) {
    double lo = 0.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (0.5 * std::erfc(mid / std::sqrt(2.0)) > p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double draw_magnitude(const GeneratorSpec& spec, Rng& rng) {
    const double u = rng.uniform();
    if (spec.magnitude_law == MagnitudeLaw::log_uniform) return spec.v_min * std::pow(spec.v_max / spec.v_min, u);
    const double tail = std::pow(spec.v_min / spec.v_max, spec.eta_v);
    return spec.v_min * std::pow(1.0 - u * (1.0 - tail), -1.0 / spec.eta_v);
}

// Per-stock multipliers with mean exactly one.
std::vector<double> stock_factors(int symbols, double dispersion, Rng& rng) {
    std::vector<double> f(static_cast<std::size_t>(symbols));
    double s = 0.0;
    for (auto& x : f) {
        x = std::exp(dispersion * rng.normal());
        s += x;
    }
    for (auto& x : f) x *= symbols / s;
    return f;
}

}  // namespace

void GeneratorSpec::validate() const {
    auto fail = [](const std::string& m) { throw InputError("generator spec: " + m); };
    if (days < 1 || symbols < 1) fail("days and symbols must be positive");
    if (day_length < 2 || day_length > kRegularDayMinutes) fail("day_length out of range");
    if (horizon < 1) fail("horizon must be positive");
    if (tc_lo < horizon || tc_hi > day_length - 1 - horizon || tc_lo > tc_hi)
        fail("T_c placement range must keep the horizon inside the day");
    if (shock_fraction < 0.0 || shock_fraction > 1.0) fail("shock_fraction must be in [0, 1]");
    if (alpha_b < 0.0 || alpha_a < 0.0) fail("alpha must be non-negative");
    if (omega_b + omega_spread >= 1.0 || omega_a + omega_spread >= 1.0) fail("omega must stay below 1");
    if (omega_spread < 0.0) fail("omega_spread must be non-negative");
    if (background < 0.0 || background >= 1.0) fail("background rate must be in [0, 1)");
    if (!(q > 0.0)) fail("q must be positive");
    if (!(eta_v > 1.0)) fail("eta_V must exceed 1");
    if (!(v_min > 0.0) || !(v_max > v_min)) fail("need 0 < v_min < v_max");
    if ((laws.pi_a || laws.pi_b) && v_max < 10.0 * v_min) fail("magnitude range must span at least one decade");
    if (!(laws.productivity_scale > 0.0)) fail("productivity_scale must be positive");
    for (const auto& c : {laws.c_b_b, laws.c_b_a})
        if (c && (!(*c > 0.0) || *c > 1.0)) fail("C_B must be in (0, 1]");
    if (laws.bath_noise < 0.0) fail("bath_noise must be non-negative");
    if (!(max_probability > 0.0 && max_probability <= 1.0)) fail("max_probability must be in (0, 1]");
    if (stock_dispersion < 0.0) fail("stock_dispersion must be non-negative");
    if (!(price_scale > 0.0)) fail("price_scale must be positive");
    if (trades_min < 0.0 || (trades_min > 0.0 && trades_max < trades_min)) fail("invalid trades range");
}

std::vector<double> omori_minute_probabilities(double alpha, double omega, int n, bool* clipped, double cap) {
    std::vector<double> p(static_cast<std::size_t>(std::max(n, 0)), 0.0);
    if (clipped) *clipped = false;
    if (alpha <= 0.0) return p;
    const double beta = alpha / (1.0 - omega);
    double assigned = 0.0;
    for (int t = 1; t <= n; ++t) {
        const double target = beta * std::pow(static_cast<double>(t), 1.0 - omega);
        double r = target - assigned;
        if (r > cap) {
            r = cap;
            if (clipped) *clipped = true;
        }
        r = std::max(r, 0.0);
        p[static_cast<std::size_t>(t - 1)] = r;
        assigned += r;
    }
    return p;
}

std::vector<std::string> weekday_calendar(const std::string& start, int count) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(start.c_str(), "%d-%u-%u", &y, &m, &d) != 3) throw InputError("bad start date " + start);
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) throw InputError("bad start date " + start);
    sys_days day_point{ymd};
    std::vector<std::string> out;
    while (static_cast<int>(out.size()) < count) {
        const weekday wd{day_point};
        if (wd != Saturday && wd != Sunday) {
            const year_month_day cur{day_point};
            char buf[16];
            std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(cur.year()),
                          static_cast<unsigned>(cur.month()), static_cast<unsigned>(cur.day()));
            out.emplace_back(buf);
        }
        day_point += days{1};
    }
    return out;
}

GeneratedDay generate_omori_day(const GeneratorSpec& spec, int day_index) {
    const int L = spec.day_length;
    const int S = spec.symbols;
    const auto idx = [S](int m, int j) { return static_cast<std::size_t>(m) * S + j; };
    Rng rng(derive_seed(spec.seed, kDayStream, static_cast<std::uint64_t>(day_index)));

    const double bg_scale = spec.background > 0.0 ? spec.q / normal_upper_quantile(spec.background / 2.0) : 1.0;
    auto background_value = [&]() {
        for (;;) {
            const double v = std::fabs(rng.normal()) * bg_scale;
            if (v < spec.q) return v;
        }
    };
    auto event_value = [&]() { return spec.q * std::pow(rng.uniform_open0(), -1.0 / spec.eta_v); };

    const bool wants_shock = spec.alpha_b > 0.0 || spec.alpha_a > 0.0 || spec.laws.pi_a || spec.laws.pi_b;
    GeneratedDay out;
    out.truth.has_shock = wants_shock && rng.bernoulli(spec.shock_fraction);

    for (int attempt = 0;; ++attempt) {
        if (attempt > kMaxRedraws) throw InputError("generator could not satisfy the injected laws");
        auto& t = out.truth;
        t.redraws = attempt;
        t.clipped = false;
        t.v2_b_minute.reset();
        t.v2_a_minute.reset();
        out.values.assign(static_cast<std::size_t>(L) * S, kNaN);

        std::vector<double> prob(static_cast<std::size_t>(L), spec.background);
        if (t.has_shock) {
            t.t_c = spec.tc_lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.tc_hi - spec.tc_lo + 1)));
            t.v1 = draw_magnitude(spec, rng);
            t.omega_b = spec.omega_b + spec.omega_spread * (2.0 * rng.uniform() - 1.0);
            t.omega_a = spec.omega_a + spec.omega_spread * (2.0 * rng.uniform() - 1.0);
            t.alpha_b = spec.alpha_b;
            t.alpha_a = spec.alpha_a;
            bool feasible = true;
            auto scale_alpha = [&](const std::optional<double>& pi, double omega, double& alpha, double& expected) {
                if (!pi) return;
                // Background exceedances count towards P as well.
                expected = spec.laws.productivity_scale * std::pow(t.v1, *pi);
                const double omori_part = expected - spec.background * spec.horizon;
                if (expected > spec.horizon || omori_part <= 0.0) feasible = false;
                alpha = omori_part / std::pow(static_cast<double>(spec.horizon), 1.0 - omega) * (1.0 - omega);
            };
            scale_alpha(spec.laws.pi_b, t.omega_b, t.alpha_b, t.expected_P_b);
            scale_alpha(spec.laws.pi_a, t.omega_a, t.alpha_a, t.expected_P_a);
            if (!feasible) continue;

            bool cb = false, ca = false;
            const auto pb = omori_minute_probabilities(t.alpha_b, t.omega_b, t.t_c, &cb, spec.max_probability);
            const auto pa = omori_minute_probabilities(t.alpha_a, t.omega_a, L - 1 - t.t_c, &ca, spec.max_probability);
            t.clipped = cb || ca;
            for (int k = 1; k <= t.t_c; ++k)
                prob[static_cast<std::size_t>(t.t_c - k)] =
                    std::min(1.0, spec.background + pb[static_cast<std::size_t>(k - 1)]);
            for (int k = 1; t.t_c + k < L; ++k)
                prob[static_cast<std::size_t>(t.t_c + k)] =
                    std::min(1.0, spec.background + pa[static_cast<std::size_t>(k - 1)]);
            if (!spec.laws.pi_b) t.expected_P_b = 0.0;
            if (!spec.laws.pi_a) t.expected_P_a = 0.0;
            for (int k = 1; k <= spec.horizon; ++k) {
                if (!spec.laws.pi_b) t.expected_P_b += prob[static_cast<std::size_t>(t.t_c - k)];
                if (!spec.laws.pi_a) t.expected_P_a += prob[static_cast<std::size_t>(t.t_c + k)];
            }
        }

        for (int m = 1; m < L; ++m) {
            const double p = prob[static_cast<std::size_t>(m)];
            for (int j = 0; j < S; ++j) out.values[idx(m, j)] = rng.bernoulli(p) ? event_value() : background_value();
        }
        if (!t.has_shock) break;

        const auto main = stock_factors(S, spec.stock_dispersion, rng);
        for (int j = 0; j < S; ++j) out.values[idx(t.t_c, j)] = t.v1 * main[static_cast<std::size_t>(j)];

        auto market_at = [&](int m) {
            double s = 0.0;
            for (int j = 0; j < S; ++j) s += out.values[idx(m, j)];
            return s / S;
        };
        bool ok = true;
        // The second-largest shock rescales the stocks already exceeding q at a
        // window minute, so indicators (and n, x, the response curves) are kept.
        auto enforce = [&](const std::optional<double>& c_b, int sign, std::optional<int>& where, double& v2) {
            if (!c_b || !ok) return;
            std::vector<int> candidates;
            for (int k = 1; k <= spec.horizon; ++k) {
                const int m = t.t_c + sign * k;
                for (int j = 0; j < S; ++j)
                    if (out.values[idx(m, j)] >= spec.q) {
                        candidates.push_back(m);
                        break;
                    }
            }
            if (candidates.empty()) {
                ok = false;
                return;
            }
            const int minute = candidates[static_cast<std::size_t>(rng.below(candidates.size()))];
            const double factor = std::max(1.0 + spec.laws.bath_noise * rng.normal(), 0.05);
            const double target = *c_b * market_at(t.t_c) * factor;
            double events = 0.0, rest = 0.0, smallest = kNaN;
            for (int j = 0; j < S; ++j) {
                const double v = out.values[idx(minute, j)];
                if (v >= spec.q) {
                    events += v;
                    smallest = std::isnan(smallest) ? v : std::min(smallest, v);
                } else {
                    rest += v;
                }
            }
            const double scale = (target * S - rest) / events;
            if (!(scale * smallest >= spec.q)) {
                ok = false;
                return;
            }
            for (int j = 0; j < S; ++j)
                if (out.values[idx(minute, j)] >= spec.q) out.values[idx(minute, j)] *= scale;
            where = minute;
            v2 = market_at(minute);
            for (int k = 1; k <= spec.horizon; ++k) {
                const int m = t.t_c + sign * k;
                if (m != minute && market_at(m) >= v2) ok = false;
            }
        };
        enforce(spec.laws.c_b_b, -1, t.v2_b_minute, t.v2_b);
        enforce(spec.laws.c_b_a, +1, t.v2_a_minute, t.v2_a);
        if (ok) break;
    }
    return out;
}

SyntheticPanel generate_ensemble(const GeneratorSpec& spec, unsigned threads) {
    spec.validate();
    const int L = spec.day_length;
    const int S = spec.symbols;
    const auto dates = weekday_calendar(spec.start_date, spec.days);

    std::vector<GeneratedDay> days(static_cast<std::size_t>(spec.days));
    parallel_for(days.size(), threads, [&](std::size_t d) { days[d] = generate_omori_day(spec, static_cast<int>(d)); });

    SyntheticPanel out;
    auto& nv = out.volatility;
    nv.v.step = 1;
    for (int j = 0; j < S; ++j) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "S%04d", j);
        nv.v.symbols.emplace_back(buf);
    }
    nv.sigma_full.assign(static_cast<std::size_t>(S), 1.0);
    nv.pattern.assign(static_cast<std::size_t>(L), 1.0);
    nv.pattern[0] = kNaN;

    auto& grid = out.grid;
    grid.symbols = nv.v.symbols;
    const bool with_trades = spec.trades_min > 0.0;
    std::vector<double> activity(static_cast<std::size_t>(S), 0.0);
    if (with_trades) {
        Rng arng(derive_seed(spec.seed, kActivityStream, 0));
        for (auto& w : activity) w = spec.trades_min * std::pow(spec.trades_max / spec.trades_min, arng.uniform());
        grid.trades.emplace();
    }

    for (int d = 0; d < spec.days; ++d) {
        auto& day = days[static_cast<std::size_t>(d)];
        day.truth.date = dates[static_cast<std::size_t>(d)];
        if (day.truth.clipped) ++out.clipped_days;
        out.redraws += day.truth.redraws;
        const DayInfo info{day.truth.date, L, false};
        nv.v.days.push_back(info);
        nv.v.samples.push_back(L);
        nv.v.present.emplace_back(static_cast<std::size_t>(S), 1);

        std::vector<double> prices(static_cast<std::size_t>(L) * S);
        Rng sign(derive_seed(spec.seed, kSignStream, static_cast<std::uint64_t>(d)));
        for (int j = 0; j < S; ++j) {
            double p = 50.0 * (1.0 + 0.01 * j);
            prices[static_cast<std::size_t>(j)] = p;
            for (int m = 1; m < L; ++m) {
                const double r = spec.price_scale * day.values[static_cast<std::size_t>(m) * S + j];
                p *= std::exp(sign.bernoulli(0.5) ? r : -r);
                prices[static_cast<std::size_t>(m) * S + j] = p;
            }
        }
        grid.days.push_back(info);
        grid.price.push_back(std::move(prices));
        grid.present.emplace_back(static_cast<std::size_t>(S), 1);
        if (with_trades) {
            Rng trng(derive_seed(spec.seed, kTradeStream, static_cast<std::uint64_t>(d)));
            std::vector<double> tr(static_cast<std::size_t>(L) * S);
            for (int m = 0; m < L; ++m)
                for (int j = 0; j < S; ++j)
                    tr[static_cast<std::size_t>(m) * S + j] =
                        std::round(activity[static_cast<std::size_t>(j)] * (0.5 + trng.uniform()));
            grid.trades->push_back(std::move(tr));
        }
        nv.v.values.push_back(std::move(day.values));
        out.truth.push_back(std::move(day.truth));
    }
    return out;
}

VolatilityPanel shuffle_intraday(const VolatilityPanel& panel, std::uint64_t seed) {
    VolatilityPanel out = panel;
    const std::size_t S = panel.symbol_count();
    std::vector<double> buf;
    for (std::size_t d = 0; d < panel.days.size(); ++d) {
        const auto K = static_cast<std::size_t>(panel.samples[d]);
        for (std::size_t j = 0; j < S; ++j) {
            if (!panel.present[d][j] || K < 2) continue;
            Rng rng(derive_seed(seed, kShuffleStream, d * S + j));
            buf.clear();
            for (std::size_t k = 1; k < K; ++k) buf.push_back(panel.values[d][k * S + j]);
            rng.shuffle(std::span<double>(buf));
            for (std::size_t k = 1; k < K; ++k) out.values[d][k * S + j] = buf[k - 1];
        }
    }
    return out;
}

NormalizedVolatility shuffle_intraday(const NormalizedVolatility& nv, std::uint64_t seed) {
    NormalizedVolatility out = nv;
    out.v = shuffle_intraday(nv.v, seed);
    return out;
}

}  // namespace volcascade
