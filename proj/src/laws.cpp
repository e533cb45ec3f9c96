#include "volcascade/laws.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "volcascade/error.hpp"

namespace volcascade {

namespace {

double sample(std::span<const double> xs, std::size_t i) {
    const double v = xs[i];
    return std::isnan(v) ? 0.0 : v;
}

}  // namespace

ResponsePair displaced_curves_at(std::span<const double> rate, int step, int t_c, int horizon) {
    if (step <= 0 || horizon <= 0 || t_c < 0) throw InputError("invalid response-curve arguments");
    if (t_c % step != 0) throw InputError("T_c is not on the sampling grid");
    const int tc = t_c / step;
    const int h = horizon / step;
    if (tc - h < 0 || tc + h >= static_cast<int>(rate.size()))
        throw InputError("response horizon runs past the trading day");

    ResponsePair out;
    out.before.side = Side::before;
    out.after.side = Side::after;
    out.before.horizon = out.after.horizon = horizon;
    double nb = 0.0, na = 0.0;
    for (int k = 1; k <= h; ++k) {
        nb += sample(rate, static_cast<std::size_t>(tc - k));
        na += sample(rate, static_cast<std::size_t>(tc + k));
        out.before.tau.push_back(k * step);
        out.after.tau.push_back(k * step);
        out.before.N.push_back(nb);
        out.after.N.push_back(na);
    }
    return out;
}

ResponsePair displaced_curves(std::span<const double> rate, const ShockRecord& shock, int horizon, int step) {
    if (!shock.accepted)
        throw InputError("refusing response curves for unaccepted shock on " + shock.date + " (" +
                         to_string(shock.reason) + ")");
    return displaced_curves_at(rate, step, shock.t_c, horizon);
}

std::optional<OmoriFit> fit_omori(const ResponseCurve& curve) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < curve.N.size(); ++i) {
        if (curve.N[i] > 0.0 && curve.tau[i] > 0) {
            lx.push_back(std::log10(static_cast<double>(curve.tau[i])));
            ly.push_back(std::log10(curve.N[i]));
        }
    }
    if (lx.size() < kMinOmoriPoints) return std::nullopt;
    const auto lf = ols(lx, ly);
    if (!lf) return std::nullopt;
    OmoriFit fit;
    fit.omega = 1.0 - lf->slope;
    fit.beta = std::pow(10.0, lf->intercept);
    fit.alpha = fit.beta * (1.0 - fit.omega);
    fit.stderr_omega = lf->slope_stderr;
    fit.r = lf->r;
    fit.n_points = lx.size();
    return fit;
}

std::optional<double> magnitude(std::span<const double> v_market, std::size_t t_c_index) {
    if (t_c_index >= v_market.size()) return std::nullopt;
    const double v = v_market[t_c_index];
    if (!(v > 0.0)) return std::nullopt;
    return std::log10(v);
}

std::optional<double> magnitude_windowed(std::span<const double> v_market, std::size_t t_c_index, int half_width) {
    if (t_c_index >= v_market.size()) return std::nullopt;
    const auto lo = t_c_index >= static_cast<std::size_t>(half_width) ? t_c_index - half_width : 0;
    const auto hi = std::min(v_market.size() - 1, t_c_index + static_cast<std::size_t>(half_width));
    double best = 0.0;
    for (std::size_t k = lo; k <= hi; ++k)
        if (!std::isnan(v_market[k])) best = std::max(best, v_market[k]);
    if (!(best > 0.0)) return std::nullopt;
    return std::log10(best);
}

double productivity(const ResponseCurve& curve) { return curve.N.empty() ? 0.0 : curve.N.back(); }

namespace {

std::optional<ProductivityFit> fit_log_p(std::span<const MagnitudeProductivity> rows, bool log_magnitude) {
    std::vector<double> x, y;
    ProductivityFit fit;
    for (const auto& r : rows) {
        if (!(r.P > 0.0)) {
            ++fit.zero_rows;
            continue;
        }
        if (log_magnitude) {
            if (!(r.M > 0.0)) continue;
            x.push_back(std::log10(r.M));
        } else {
            x.push_back(r.M);
        }
        y.push_back(std::log10(r.P));
    }
    if (x.size() < kMinEnsembleRows) return std::nullopt;
    const auto lf = ols(x, y);
    if (!lf) return std::nullopt;
    fit.pi = lf->slope;
    fit.stderr_pi = lf->slope_stderr;
    fit.intercept = lf->intercept;
    fit.r = lf->r;
    fit.n_rows = x.size();
    return fit;
}

}  // namespace

std::optional<ProductivityFit> fit_productivity(std::span<const MagnitudeProductivity> rows) {
    return fit_log_p(rows, false);
}

std::optional<ProductivityFit> fit_productivity_vs_log_magnitude(std::span<const MagnitudeProductivity> rows) {
    return fit_log_p(rows, true);
}

std::string to_string(Trend t) {
    switch (t) {
        case Trend::decreasing: return "decreasing";
        case Trend::flat: return "flat";
        case Trend::increasing: return "increasing";
    }
    return "unknown";
}

TriggeringExponent total_triggering_exponent(double pi_a, double eta_v) {
    if (!(eta_v > 0.0)) throw InputError("eta_V must be positive");
    TriggeringExponent t;
    t.exponent = pi_a - eta_v;
    t.trend = t.exponent < 0.0 ? Trend::decreasing : (t.exponent > 0.0 ? Trend::increasing : Trend::flat);
    return t;
}

BathExtremes bath_extremes(std::span<const double> series, std::size_t t_c_index, int horizon_samples) {
    if (t_c_index >= series.size()) throw InputError("T_c outside the series");
    BathExtremes e;
    e.v1 = sample(series, t_c_index);
    const auto h = static_cast<std::size_t>(horizon_samples);
    const std::size_t lo = t_c_index >= h ? t_c_index - h : 0;
    const std::size_t hi = std::min(series.size() - 1, t_c_index + h);
    for (std::size_t k = lo; k < t_c_index; ++k) e.v2_before = std::max(e.v2_before, sample(series, k));
    for (std::size_t k = t_c_index + 1; k <= hi; ++k) e.v2_after = std::max(e.v2_after, sample(series, k));
    return e;
}

std::optional<BathFit> fit_bath_proportional(std::span<const double> v1, std::span<const double> v2) {
    if (v1.size() != v2.size() || v1.size() < kMinEnsembleRows) return std::nullopt;
    double s12 = 0.0, s11 = 0.0;
    for (std::size_t i = 0; i < v1.size(); ++i) {
        s12 += v1[i] * v2[i];
        s11 += v1[i] * v1[i];
    }
    if (!(s11 > 0.0) || !(s12 > 0.0)) return std::nullopt;
    BathFit fit;
    fit.n = v1.size();
    fit.c_b = s12 / s11;
    fit.b = -std::log10(fit.c_b);
    for (std::size_t i = 0; i < v1.size(); ++i) {
        const double e = v2[i] - fit.c_b * v1[i];
        fit.chi2 += e * e;
    }
    fit.r = pearson(v1, v2).value_or(0.0);
    return fit;
}

std::optional<BinnedBath> fit_bath_binned(std::span<const double> v1, std::span<const double> v2, std::size_t bins) {
    if (v1.size() != v2.size() || v1.size() < kMinEnsembleRows || bins < 2) return std::nullopt;
    std::vector<std::size_t> order(v1.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v1[a] < v1[b]; });
    const auto starts = equal_count_partition(order.size(), bins);

    BinnedBath out;
    std::vector<double> bx, by;
    for (std::size_t b = 0; b + 1 < starts.size(); ++b) {
        std::vector<double> xs, ys;
        for (std::size_t i = starts[b]; i < starts[b + 1]; ++i) {
            xs.push_back(v1[order[i]]);
            ys.push_back(v2[order[i]]);
        }
        if (xs.empty()) continue;
        BathBin bin{mean(xs), mean(ys), stddev(ys), xs.size()};
        out.bins.push_back(bin);
        bx.push_back(bin.v1_mean);
        by.push_back(bin.v2_mean);
    }
    const auto lf = ols(bx, by);
    if (!lf) return std::nullopt;
    out.fit = *lf;
    return out;
}

std::optional<std::vector<Relation>> before_after_relations(std::span<const ShockLawRow> rows) {
    std::vector<double> ob, oa, ab, aa, pb, pa;
    for (const auto& r : rows) {
        if (!r.before || !r.after) continue;
        ob.push_back(r.before->omega);
        oa.push_back(r.after->omega);
        ab.push_back(r.before->alpha);
        aa.push_back(r.after->alpha);
        pb.push_back(r.P_b);
        pa.push_back(r.P_a);
    }
    if (ob.size() < kMinEnsembleRows) return std::nullopt;
    auto relate = [](std::string name, const std::vector<double>& b, const std::vector<double>& a) {
        Relation rel;
        rel.name = std::move(name);
        rel.n = b.size();
        rel.correlation = pearson(b, a).value_or(0.0);
        if (const auto lf = ols(b, a)) rel.slope = lf->slope;
        return rel;
    };
    return std::vector<Relation>{relate("omega", ob, oa), relate("alpha", ab, aa), relate("P", pb, pa)};
}

std::vector<ActivityBucket> activity_profile(std::span<const ShockLawRow> stock_rows,
                                             const std::map<std::string, double>& mean_trades, int bins) {
    if (mean_trades.empty()) throw InputError("activity profile unavailable: no trade counts supplied");
    if (bins < 1) throw InputError("activity profile needs at least one bucket");

    std::set<std::string> with_rows;
    for (const auto& r : stock_rows)
        if (mean_trades.count(r.symbol)) with_rows.insert(r.symbol);
    if (with_rows.empty()) return {};

    double lo = INFINITY, hi = 0.0;
    for (const auto& s : with_rows) {
        const double w = mean_trades.at(s);
        if (!(w > 0.0)) throw InputError("non-positive mean trade rate for " + s);
        lo = std::min(lo, w);
        hi = std::max(hi, w);
    }
    const int nb = hi > lo ? bins : 1;
    const double llo = std::log10(lo), lhi = std::log10(hi);
    auto bucket_of = [&](double w) {
        if (nb == 1) return 0;
        const int b = static_cast<int>(std::floor((std::log10(w) - llo) / (lhi - llo) * nb));
        return std::clamp(b, 0, nb - 1);
    };

    std::vector<ActivityBucket> out(static_cast<std::size_t>(nb));
    std::vector<std::set<std::string>> members(out.size());
    std::vector<double> omega_sum(out.size(), 0.0);
    std::vector<std::size_t> fit_b(out.size(), 0), fit_a(out.size(), 0);
    for (int b = 0; b < nb; ++b) {
        auto& bk = out[static_cast<std::size_t>(b)];
        bk.omega_lo = nb == 1 ? lo : std::pow(10.0, llo + (lhi - llo) * b / nb);
        bk.omega_hi = nb == 1 ? hi : std::pow(10.0, llo + (lhi - llo) * (b + 1) / nb);
    }
    for (const auto& r : stock_rows) {
        const auto it = mean_trades.find(r.symbol);
        if (it == mean_trades.end()) continue;
        const auto b = static_cast<std::size_t>(bucket_of(it->second));
        auto& bk = out[b];
        if (members[b].insert(r.symbol).second) omega_sum[b] += it->second;
        ++bk.rows;
        if (r.before) {
            bk.alpha_b += r.before->alpha;
            bk.omega_b += r.before->omega;
            ++fit_b[b];
        }
        if (r.after) {
            bk.alpha_a += r.after->alpha;
            bk.omega_a += r.after->omega;
            ++fit_a[b];
        }
        bk.P_b += r.P_b;
        bk.P_a += r.P_a;
        bk.v1 += r.V1;
        bk.v2_b += r.V2_b;
        bk.v2_a += r.V2_a;
    }
    for (std::size_t b = 0; b < out.size(); ++b) {
        auto& bk = out[b];
        bk.stocks = members[b].size();
        if (bk.stocks) bk.omega_mean = omega_sum[b] / static_cast<double>(bk.stocks);
        if (fit_b[b]) {
            bk.alpha_b /= static_cast<double>(fit_b[b]);
            bk.omega_b /= static_cast<double>(fit_b[b]);
        }
        if (fit_a[b]) {
            bk.alpha_a /= static_cast<double>(fit_a[b]);
            bk.omega_a /= static_cast<double>(fit_a[b]);
        }
        if (bk.rows) {
            const auto n = static_cast<double>(bk.rows);
            bk.P_b /= n;
            bk.P_a /= n;
            bk.v1 /= n;
            bk.v2_b /= n;
            bk.v2_a /= n;
        }
    }
    return out;
}

CrossoverScan crossover_scan(std::span<const ShockLawRow> rows, const std::vector<double>& m_edges, ScanSide side) {
    CrossoverScan scan;
    if (m_edges.size() < 2 || !std::is_sorted(m_edges.begin(), m_edges.end()))
        throw InputError("crossover scan needs ascending M bin edges");
    if (rows.size() < kMinCrossoverRows) {
        scan.status = "insufficient rows (" + std::to_string(rows.size()) + " < " +
                      std::to_string(kMinCrossoverRows) + ")";
        return scan;
    }
    const std::size_t nb = m_edges.size() - 1;
    scan.bins.resize(nb);
    std::vector<double> om(nb, 0.0), al(nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
        scan.bins[b].lo = m_edges[b];
        scan.bins[b].hi = m_edges[b + 1];
    }
    auto add = [&](std::size_t b, const std::optional<OmoriFit>& f) {
        if (!f) return;
        om[b] += f->omega;
        al[b] += f->alpha;
        ++scan.bins[b].count;
    };
    for (const auto& r : rows) {
        if (r.M < m_edges.front() || r.M >= m_edges.back()) continue;
        const auto b = static_cast<std::size_t>(std::upper_bound(m_edges.begin(), m_edges.end(), r.M) - m_edges.begin()) - 1;
        if (side != ScanSide::after) add(b, r.before);
        if (side != ScanSide::before) add(b, r.after);
    }
    std::optional<bool> prev_positive;
    for (std::size_t b = 0; b < nb; ++b) {
        auto& bin = scan.bins[b];
        if (bin.count == 0) continue;
        bin.mean_omega = om[b] / static_cast<double>(bin.count);
        bin.mean_alpha = al[b] / static_cast<double>(bin.count);
        const bool positive = bin.mean_omega > 0.0;
        if (prev_positive && *prev_positive != positive && !scan.m_x) scan.m_x = bin.lo;
        prev_positive = positive;
    }
    if (!scan.m_x) scan.status = "no sign change";
    return scan;
}

}  // namespace volcascade
