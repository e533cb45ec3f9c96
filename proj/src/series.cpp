#include "volcascade/series.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "volcascade/error.hpp"

namespace volcascade {

void MinuteGrid::validate() const {
    const std::size_t S = symbols.size();
    if (price.size() != days.size() || present.size() != days.size())
        throw InputError("grid: per-day buffers do not match day count");
    if (trades && trades->size() != days.size())
        throw InputError("grid: trade buffers do not match day count");
    for (std::size_t d = 0; d < days.size(); ++d) {
        const auto minutes = static_cast<std::size_t>(days[d].minutes);
        if (days[d].minutes <= 0 || days[d].minutes > kRegularDayMinutes)
            throw InputError("grid: day " + days[d].date + " has invalid length");
        if (price[d].size() != minutes * S || present[d].size() != S)
            throw InputError("grid: day " + days[d].date + " buffer size mismatch");
        for (std::size_t j = 0; j < S; ++j) {
            if (!present[d][j]) continue;
            for (std::size_t m = 0; m < minutes; ++m) {
                const double p = price[d][m * S + j];
                if (std::isnan(p)) {
                    std::ostringstream os;
                    os << "missing minute " << m << " for symbol " << symbols[j] << " on " << days[d].date;
                    throw InputError(os.str());
                }
                if (!(p > 0.0) || !std::isfinite(p)) {
                    std::ostringstream os;
                    os << "non-positive price " << p << " for symbol " << symbols[j] << " on "
                       << days[d].date << " minute " << m;
                    throw InputError(os.str());
                }
                if (trades) {
                    const double t = (*trades)[d][m * S + j];
                    if (!(t >= 0.0) || !std::isfinite(t)) {
                        std::ostringstream os;
                        os << "invalid trade count for symbol " << symbols[j] << " on " << days[d].date
                           << " minute " << m;
                        throw InputError(os.str());
                    }
                }
            }
        }
    }
}

void MinuteGrid::canonicalize() {
    const std::size_t S = symbols.size();
    std::vector<std::size_t> order(S);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return symbols[a] < symbols[b]; });
    if (std::is_sorted(order.begin(), order.end())) return;

    auto permute = [&](std::vector<double>& buf, std::size_t rows) {
        std::vector<double> out(buf.size());
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < S; ++j) out[r * S + j] = buf[r * S + order[j]];
        buf = std::move(out);
    };
    for (std::size_t d = 0; d < days.size(); ++d) {
        const auto rows = static_cast<std::size_t>(days[d].minutes);
        permute(price[d], rows);
        if (trades) permute((*trades)[d], rows);
        std::vector<std::uint8_t> p(S);
        for (std::size_t j = 0; j < S; ++j) p[j] = present[d][order[j]];
        present[d] = std::move(p);
    }
    std::vector<std::string> names(S);
    for (std::size_t j = 0; j < S; ++j) names[j] = symbols[order[j]];
    symbols = std::move(names);
}

int VolatilityPanel::max_samples() const {
    int k = 0;
    for (int s : samples) k = std::max(k, s);
    return k;
}

VolatilityPanel compute_volatility(const MinuteGrid& grid, int step_minutes) {
    if (step_minutes != 1 && step_minutes != 5 && step_minutes != 10)
        throw InputError("step must be 1, 5 or 10 minutes");
    grid.validate();

    const std::size_t S = grid.symbol_count();
    VolatilityPanel out;
    out.step = step_minutes;
    out.days = grid.days;
    out.symbols = grid.symbols;
    out.present = grid.present;
    out.samples.resize(grid.days.size());
    out.values.resize(grid.days.size());

    for (std::size_t d = 0; d < grid.days.size(); ++d) {
        const int K = grid.days[d].minutes / step_minutes;
        out.samples[d] = K;
        auto& vals = out.values[d];
        vals.assign(static_cast<std::size_t>(K) * S, kNaN);
        for (std::size_t j = 0; j < S; ++j) {
            if (!grid.present[d][j]) continue;
            for (int k = 1; k < K; ++k) {
                const double p1 = grid.price_at(d, k * step_minutes, j);
                const double p0 = grid.price_at(d, (k - 1) * step_minutes, j);
                vals[static_cast<std::size_t>(k) * S + j] = std::fabs(std::log(p1 / p0));
            }
        }
    }
    return out;
}

NormalizedVolatility normalize_and_detrend(const VolatilityPanel& raw) {
    const std::size_t S = raw.symbol_count();
    const std::size_t D = raw.days.size();

    // Step 1: full-period standard deviation per symbol.
    std::vector<double> sigma(S, 0.0);
    std::vector<std::uint8_t> keep(S, 0);
    std::vector<std::string> dropped;
    for (std::size_t j = 0; j < S; ++j) {
        std::size_t days_with_data = 0;
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t d = 0; d < D; ++d) {
            if (!raw.present[d][j]) continue;
            ++days_with_data;
            for (int k = 0; k < raw.samples[d]; ++k) {
                const double v = raw.at(d, k, j);
                if (std::isnan(v)) continue;
                sum += v;
                ++count;
            }
        }
        if (days_with_data == 0) {
            dropped.push_back(raw.symbols[j]);
            continue;
        }
        if (days_with_data < 2)
            throw InputError("symbol " + raw.symbols[j] + " has fewer than 2 days of data");
        const double m = sum / static_cast<double>(count);
        double ss = 0.0;
        for (std::size_t d = 0; d < D; ++d) {
            if (!raw.present[d][j]) continue;
            for (int k = 0; k < raw.samples[d]; ++k) {
                const double v = raw.at(d, k, j);
                if (!std::isnan(v)) ss += (v - m) * (v - m);
            }
        }
        sigma[j] = std::sqrt(ss / static_cast<double>(count));
        if (sigma[j] > 0.0)
            keep[j] = 1;
        else
            dropped.push_back(raw.symbols[j]);
    }

    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < S; ++j)
        if (keep[j]) kept.push_back(j);
    if (kept.empty()) throw InputError("no symbol with positive volatility variance");

    const std::size_t R = kept.size();
    NormalizedVolatility out;
    out.dropped_symbols = std::move(dropped);
    out.v.step = raw.step;
    out.v.days = raw.days;
    out.v.samples = raw.samples;
    for (std::size_t j : kept) {
        out.v.symbols.push_back(raw.symbols[j]);
        out.sigma_full.push_back(sigma[j]);
    }
    out.v.values.resize(D);
    out.v.present.resize(D);
    for (std::size_t d = 0; d < D; ++d) {
        const auto K = static_cast<std::size_t>(raw.samples[d]);
        out.v.present[d].resize(R);
        out.v.values[d].assign(K * R, kNaN);
        for (std::size_t r = 0; r < R; ++r) {
            const std::size_t j = kept[r];
            out.v.present[d][r] = raw.present[d][j];
            if (!raw.present[d][j]) continue;
            for (std::size_t k = 0; k < K; ++k)
                out.v.values[d][k * R + r] = raw.values[d][k * S + j] / sigma[j];
        }
    }

    // Step 2: intraday pattern from full days only.
    const int K = out.v.max_samples();
    std::vector<double> sum(static_cast<std::size_t>(K), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(K), 0);
    bool any_full = false;
    for (std::size_t d = 0; d < D; ++d) {
        if (out.v.days[d].half_day) continue;
        any_full = true;
        for (int k = 0; k < out.v.samples[d]; ++k) {
            for (std::size_t r = 0; r < R; ++r) {
                const double v = out.v.at(d, k, r);
                if (std::isnan(v)) continue;
                sum[static_cast<std::size_t>(k)] += v;
                ++count[static_cast<std::size_t>(k)];
            }
        }
    }
    if (!any_full) throw InputError("no full trading day available for the intraday pattern");

    out.pattern.assign(static_cast<std::size_t>(K), kNaN);
    for (int k = 1; k < K; ++k) {
        const auto ki = static_cast<std::size_t>(k);
        if (count[ki] == 0) throw InputError("intraday pattern undefined at sample " + std::to_string(k));
        out.pattern[ki] = sum[ki] / static_cast<double>(count[ki]);
        if (!(out.pattern[ki] > 0.0))
            throw InputError("degenerate input: intraday pattern is zero at sample " + std::to_string(k));
    }
    for (std::size_t d = 0; d < D; ++d) {
        for (int k = 1; k < out.v.samples[d]; ++k) {
            const double a = out.pattern[static_cast<std::size_t>(k)];
            for (std::size_t r = 0; r < R; ++r) out.v.values[d][static_cast<std::size_t>(k) * R + r] /= a;
        }
    }
    return out;
}

ExceedancePanel exceedance_panel(const VolatilityPanel& v, double q) {
    if (!(q > 0.0)) throw InputError("threshold q must be positive");
    const std::size_t S = v.symbol_count();
    ExceedancePanel out;
    out.q = q;
    out.step = v.step;
    out.days = v.days;
    out.symbols = S;
    out.samples = v.samples;
    const std::size_t D = v.days.size();
    out.indicator.resize(D);
    out.n_rate.resize(D);
    out.v_market.resize(D);
    out.effective_symbols.resize(D);
    for (std::size_t d = 0; d < D; ++d) {
        const auto K = static_cast<std::size_t>(v.samples[d]);
        int eff = 0;
        for (std::size_t j = 0; j < S; ++j) eff += v.present[d][j] ? 1 : 0;
        out.effective_symbols[d] = eff;
        out.indicator[d].assign(K * S, 0);
        out.n_rate[d].assign(K, kNaN);
        out.v_market[d].assign(K, kNaN);
        for (std::size_t k = 0; k < K; ++k) {
            int hits = 0;
            double vsum = 0.0;
            bool defined = false;
            for (std::size_t j = 0; j < S; ++j) {
                const double x = v.values[d][k * S + j];
                if (std::isnan(x)) continue;
                defined = true;
                const std::uint8_t hit = x >= q ? 1 : 0;
                out.indicator[d][k * S + j] = hit;
                hits += hit;
                vsum += x;
            }
            if (defined && eff > 0) {
                out.n_rate[d][k] = static_cast<double>(hits) / eff;
                out.v_market[d][k] = vsum / eff;
            }
        }
    }
    return out;
}

ExceedancePanel exceedance_panel(const NormalizedVolatility& nv, double q) {
    return exceedance_panel(nv.v, q);
}

std::vector<double> zero_filled(const std::vector<double>& series) {
    std::vector<double> out(series);
    for (double& x : out)
        if (std::isnan(x)) x = 0.0;
    return out;
}

}  // namespace volcascade
