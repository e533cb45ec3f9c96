#include "volcascade/detector.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "volcascade/error.hpp"
#include "volcascade/parallel.hpp"

namespace volcascade {

bool IntradayBaseline::usable(int k) const {
    if (k < 0 || static_cast<std::size_t>(k) >= std_rate.size()) return false;
    const double s = std_rate[static_cast<std::size_t>(k)];
    return std::isfinite(s) && s > 0.0 && std::isfinite(mean_rate[static_cast<std::size_t>(k)]);
}

std::vector<double> smooth_centered(const std::vector<double>& xs, int window) {
    if (window < 1 || window % 2 == 0) throw InputError("smoothing window must be a positive odd integer");
    const int n = static_cast<int>(xs.size());
    const int half = window / 2;
    std::vector<double> out(xs.size());
    for (int i = 0; i < n; ++i) {
        const int h = std::min({half, i, n - 1 - i});
        double s = 0.0;
        for (int k = i - h; k <= i + h; ++k) s += xs[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(i)] = s / (2 * h + 1);
    }
    double sum_in = 0.0, sum_out = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sum_in += xs[i];
        sum_out += out[i];
    }
    if (sum_out > 0.0 && sum_in != sum_out) {
        const double scale = sum_in / sum_out;
        for (double& v : out) v *= scale;
    }
    return out;
}

IntradayBaseline build_baseline(const ExceedancePanel& panel, int smoothing_minutes, int min_days) {
    std::vector<std::size_t> full;
    for (std::size_t d = 0; d < panel.days.size(); ++d)
        if (!panel.days[d].half_day && panel.effective_symbols[d] > 0) full.push_back(d);
    if (static_cast<int>(full.size()) < min_days)
        throw InputError("baseline needs at least " + std::to_string(min_days) + " full days, got " +
                         std::to_string(full.size()));

    int K = 0;
    for (std::size_t d : full) K = std::max(K, panel.samples[d]);

    IntradayBaseline b;
    b.step = panel.step;
    int w = std::max(1, static_cast<int>(std::lround(static_cast<double>(smoothing_minutes) / panel.step)));
    if (w % 2 == 0) ++w;
    b.smoothing_window = w;
    b.raw_mean.assign(static_cast<std::size_t>(K), kNaN);
    b.raw_std.assign(static_cast<std::size_t>(K), kNaN);

    for (int k = 0; k < K; ++k) {
        double s = 0.0;
        std::size_t c = 0;
        for (std::size_t d : full) {
            if (k >= panel.samples[d]) continue;
            const double v = panel.n_rate[d][static_cast<std::size_t>(k)];
            if (std::isnan(v)) continue;
            s += v;
            ++c;
        }
        if (c == 0) continue;
        const double m = s / static_cast<double>(c);
        double ss = 0.0;
        for (std::size_t d : full) {
            if (k >= panel.samples[d]) continue;
            const double v = panel.n_rate[d][static_cast<std::size_t>(k)];
            if (!std::isnan(v)) ss += (v - m) * (v - m);
        }
        b.raw_mean[static_cast<std::size_t>(k)] = m;
        // Rounding in the mean leaves ~1e-17 spread on constant input.
        const double sd = std::sqrt(ss / static_cast<double>(c));
        b.raw_std[static_cast<std::size_t>(k)] = sd > 1e-12 * std::max(1.0, std::fabs(m)) ? sd : 0.0;
    }

    // Smooth the contiguous defined block (sample 0 is never defined).
    b.mean_rate = b.raw_mean;
    b.std_rate = b.raw_std;
    int first = 0;
    while (first < K && std::isnan(b.raw_mean[static_cast<std::size_t>(first)])) ++first;
    int last = K - 1;
    while (last >= first && std::isnan(b.raw_mean[static_cast<std::size_t>(last)])) --last;
    if (first <= last) {
        const auto lo = b.raw_mean.begin() + first;
        const auto hi = b.raw_mean.begin() + last + 1;
        std::vector<double> m(lo, hi);
        std::vector<double> sd(b.raw_std.begin() + first, b.raw_std.begin() + last + 1);
        if (std::none_of(m.begin(), m.end(), [](double v) { return std::isnan(v); })) {
            m = smooth_centered(m, w);
            sd = smooth_centered(sd, w);
        }
        std::copy(m.begin(), m.end(), b.mean_rate.begin() + first);
        std::copy(sd.begin(), sd.end(), b.std_rate.begin() + first);
    }
    for (int k = 0; k < K; ++k)
        if (!b.usable(k)) b.excluded.push_back(k);
    return b;
}

ComovementSeries comovement_score(const std::vector<double>& n, const IntradayBaseline& baseline, std::string date,
                                  int step) {
    ComovementSeries out;
    out.date = std::move(date);
    out.step = step;
    out.n = n;
    out.nprime.assign(n.size(), kNaN);
    out.x.assign(n.size(), kNaN);
    for (std::size_t k = 0; k < n.size(); ++k) {
        if (std::isnan(n[k]) || !baseline.usable(static_cast<int>(k))) continue;
        const double z = (n[k] - baseline.mean_rate[k]) / baseline.std_rate[k];
        out.nprime[k] = z;
        out.x[k] = n[k] * z;
    }
    return out;
}

std::vector<Cascade> find_cascades(const ComovementSeries& series, double x_c, int gap_minutes) {
    if (gap_minutes <= 0) throw InputError("cascade window must be positive");
    std::vector<Cascade> out;
    int last = 0;
    for (std::size_t k = 0; k < series.x.size(); ++k) {
        const double x = series.x[k];
        if (!(x > x_c)) continue;
        const int minute = series.minute(k);
        if (out.empty() || minute - last > gap_minutes) out.emplace_back();
        auto& c = out.back();
        c.minutes.push_back(minute);
        c.scores.push_back(x);
        c.weight += x;
        last = minute;
    }
    return out;
}

std::string to_string(Rejection r) {
    switch (r) {
        case Rejection::none: return "";
        case Rejection::near_open: return "near-open";
        case Rejection::near_close: return "near-close";
        case Rejection::half_day: return "half-day";
        case Rejection::no_cascade: return "no-cascade";
    }
    return "unknown";
}

int last_sample_minute(int minutes, int step) { return (minutes / step - 1) * step; }

ShockRecord select_main_shock(const std::vector<Cascade>& cascades, const DayInfo& day, int edge_minutes,
                              int step) {
    ShockRecord rec;
    rec.date = day.date;
    if (cascades.empty()) {
        rec.reason = Rejection::no_cascade;
        return rec;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < cascades.size(); ++i)
        if (cascades[i].weight > cascades[best].weight) best = i;
    const auto& c = cascades[best];
    std::size_t peak = 0;
    for (std::size_t i = 1; i < c.scores.size(); ++i)
        if (c.scores[i] > c.scores[peak]) peak = i;

    rec.t_c = c.minutes[peak];
    rec.x_peak = c.scores[peak];
    rec.cascade = c.minutes;
    rec.weight = c.weight;
    // The after-window must stay on defined samples, hence the last sample
    // minute rather than the nominal close.
    if (day.half_day)
        rec.reason = Rejection::half_day;
    else if (rec.t_c < edge_minutes)
        rec.reason = Rejection::near_open;
    else if (rec.t_c + edge_minutes > last_sample_minute(day.minutes, step))
        rec.reason = Rejection::near_close;
    else
        rec.reason = Rejection::none;
    rec.accepted = rec.reason == Rejection::none;
    return rec;
}

Calibration calibrate_threshold(const Pdf& structured, const Pdf& shuffled, double ratio, double fallback) {
    if (structured.edges != shuffled.edges) throw InputError("pdfs must share identical bins");
    Calibration cal;
    cal.x_c = fallback;
    const std::size_t nb = structured.bins();
    std::optional<std::size_t> lowest;
    bool seen_mass = false;
    for (std::size_t i = nb; i-- > 0;) {
        const double a = structured.density[i];
        const double b = shuffled.density[i];
        if (a == 0.0 && b == 0.0) continue;
        if (a > 0.0 && a >= ratio * b) {
            lowest = i;
            seen_mass = true;
            continue;
        }
        break;
    }
    if (!seen_mass || !lowest) {
        cal.warning = "no divergence between structured and shuffled pdfs; using default x_c";
        return cal;
    }
    cal.diverged = true;
    cal.x_c = structured.edges[*lowest];
    return cal;
}

Detection detect_shocks(const ExceedancePanel& panel, const DetectorParams& params, unsigned threads) {
    Detection det;
    det.baseline = build_baseline(panel, params.smooth_minutes, params.min_days);
    const std::size_t D = panel.days.size();
    det.scores.resize(D);
    det.shocks.resize(D);
    parallel_for(D, threads, [&](std::size_t d) {
        det.scores[d] = comovement_score(panel.n_rate[d], det.baseline, panel.days[d].date, panel.step);
        const auto cascades = find_cascades(det.scores[d], params.x_c, params.gap_minutes);
        det.shocks[d] = select_main_shock(cascades, panel.days[d], params.edge_minutes, panel.step);
    });
    return det;
}

ResolutionTable resolution_consistency(const MinuteGrid& grid, const std::vector<int>& steps,
                                       const std::vector<double>& x_c, const DetectorParams& params,
                                       unsigned threads) {
    ResolutionTable table;
    if (steps.size() < 2) return table;
    if (x_c.size() != steps.size()) throw InputError("one x_c per resolution step is required");

    std::vector<std::map<std::string, int>> accepted(steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto raw = compute_volatility(grid, steps[i]);
        const auto nv = normalize_and_detrend(raw);
        const auto panel = exceedance_panel(nv, params.q);
        DetectorParams p = params;
        p.x_c = x_c[i];
        const auto det = detect_shocks(panel, p, threads);
        for (const auto& s : det.shocks)
            if (s.accepted) accepted[i][s.date] = s.t_c;
    }
    for (std::size_t i = 1; i < steps.size(); ++i) {
        ResolutionPair pair;
        pair.step_a = steps[i];
        pair.step_b = steps[0];
        double total = 0.0;
        for (const auto& day : grid.days) {
            const auto a = accepted[i].find(day.date);
            const auto b = accepted[0].find(day.date);
            const bool in_a = a != accepted[i].end();
            const bool in_b = b != accepted[0].end();
            if (!in_a && !in_b) continue;
            if (!in_a || !in_b) {
                ++pair.skipped;
                continue;
            }
            ResolutionRow row{day.date, steps[i], steps[0], a->second, b->second, std::abs(a->second - b->second)};
            total += row.diff;
            ++pair.days;
            table.rows.push_back(row);
        }
        pair.mean_abs_diff = pair.days ? total / static_cast<double>(pair.days) : 0.0;
        table.pairs.push_back(pair);
    }
    return table;
}

}  // namespace volcascade
