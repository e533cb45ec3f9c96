#include "volcascade/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "volcascade/error.hpp"
#include "volcascade/parallel.hpp"
#include "volcascade/synth.hpp"

namespace volcascade {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- hashing

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 failed");
    }
    EVP_MD_CTX_free(ctx);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

// ---------------------------------------------------------------- ingest

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

bool is_iso_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (s[i] < '0' || s[i] > '9') return false;
    auto digits = [&](std::size_t at, std::size_t n) {
        int v = 0;
        for (std::size_t i = at; i < at + n; ++i) v = v * 10 + (s[i] - '0');
        return v;
    };
    const std::chrono::year_month_day ymd{std::chrono::year{digits(0, 4)},
                                          std::chrono::month{static_cast<unsigned>(digits(5, 2))},
                                          std::chrono::day{static_cast<unsigned>(digits(8, 2))}};
    return ymd.ok();
}

template <typename T>
bool parse_number(std::string_view s, T& v) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

struct Row {
    std::uint32_t date;
    std::uint32_t symbol;
    std::int32_t minute;
    std::uint32_t line;
    double price;
    double trades;
};

}  // namespace

std::vector<std::string> read_calendar(const std::string& path) {
    std::vector<std::string> out;
    if (path.empty()) return out;
    std::ifstream in(path);
    if (!in) throw InputError("cannot open calendar " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!is_iso_date(line))
            throw InputError(path + " line " + std::to_string(lineno) + ": expected an ISO date, got '" + line + "'");
        out.push_back(line);
    }
    return out;
}

Ingested ingest_text(const std::string& csv_text, const std::vector<std::string>& half_days,
                     const PipelineConfig& config, const std::string& source) {
    std::istringstream in(csv_text);
    std::string line;
    auto fail = [&](std::uint32_t lineno, const std::string& msg) {
        throw InputError(source + " line " + std::to_string(lineno) + ": " + msg);
    };

    if (!std::getline(in, line)) throw InputError(source + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool with_trades = false;
    if (line == "date,minute,symbol,price,trades")
        with_trades = true;
    else if (line != "date,minute,symbol,price")
        fail(1, "expected header 'date,minute,symbol,price[,trades]'");
    const std::size_t fields = with_trades ? 5 : 4;

    std::map<std::string, std::uint32_t> date_ids, symbol_ids;
    std::vector<Row> rows;
    std::uint32_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_commas(line);
        if (f.size() != fields) fail(lineno, "expected " + std::to_string(fields) + " fields");
        if (!is_iso_date(f[0])) fail(lineno, "bad date '" + std::string(f[0]) + "'");
        Row r{};
        r.line = lineno;
        if (!parse_number(f[1], r.minute) || r.minute < 0 || r.minute >= kRegularDayMinutes)
            fail(lineno, "minute must be an integer in [0, 389]");
        if (f[2].empty()) fail(lineno, "empty symbol");
        if (!parse_number(f[3], r.price) || !std::isfinite(r.price)) fail(lineno, "bad price");
        if (!(r.price > 0.0))
            fail(lineno, "non-positive price for symbol " + std::string(f[2]) + " on " + std::string(f[0]));
        r.trades = 0.0;
        if (with_trades && (!parse_number(f[4], r.trades) || !(r.trades >= 0.0) || !std::isfinite(r.trades)))
            fail(lineno, "bad trade count");
        r.date = date_ids.try_emplace(std::string(f[0]), static_cast<std::uint32_t>(date_ids.size())).first->second;
        r.symbol =
            symbol_ids.try_emplace(std::string(f[2]), static_cast<std::uint32_t>(symbol_ids.size())).first->second;
        rows.push_back(r);
    }
    if (rows.empty()) throw InputError(source + ": no data rows");

    // Canonical order: dates and symbols ascending.
    std::vector<std::uint32_t> date_rank(date_ids.size()), symbol_rank(symbol_ids.size());
    std::vector<std::string> dates, symbols;
    for (const auto& [name, id] : date_ids) {
        date_rank[id] = static_cast<std::uint32_t>(dates.size());
        dates.push_back(name);
    }
    for (const auto& [name, id] : symbol_ids) {
        symbol_rank[id] = static_cast<std::uint32_t>(symbols.size());
        symbols.push_back(name);
    }

    const std::size_t D = dates.size(), S = symbols.size();
    std::vector<int> length(D, 0);
    for (auto& r : rows) {
        r.date = date_rank[r.date];
        r.symbol = symbol_rank[r.symbol];
        length[r.date] = std::max(length[r.date], r.minute + 1);
    }

    MinuteGrid grid;
    grid.symbols = symbols;
    const std::set<std::string> half(half_days.begin(), half_days.end());
    Ingested result;
    for (std::size_t d = 0; d < D; ++d) {
        DayInfo info{dates[d], length[d], half.count(dates[d]) > 0};
        if (!info.half_day && info.minutes < kRegularDayMinutes) {
            info.half_day = true;
            result.report.short_days_not_in_calendar.push_back(info.date);
        }
        if (info.half_day) result.report.half_days.push_back(info.date);
        grid.days.push_back(info);
        grid.price.emplace_back(static_cast<std::size_t>(info.minutes) * S, kNaN);
        grid.present.emplace_back(S, 0);
    }
    if (with_trades) {
        grid.trades.emplace();
        for (std::size_t d = 0; d < D; ++d)
            grid.trades->emplace_back(static_cast<std::size_t>(length[d]) * S, 0.0);
    }
    for (const auto& r : rows) {
        const std::size_t cell = static_cast<std::size_t>(r.minute) * S + r.symbol;
        double& slot = grid.price[r.date][cell];
        if (!std::isnan(slot))
            fail(r.line, "duplicate row for (" + dates[r.date] + ", " + std::to_string(r.minute) + ", " +
                             symbols[r.symbol] + ")");
        slot = r.price;
        grid.present[r.date][r.symbol] = 1;
        if (with_trades) (*grid.trades)[r.date][cell] = r.trades;
    }
    grid.validate();

    // Activity floor on mean trades per minute.
    auto& rep = result.report;
    rep.rows = rows.size();
    rep.symbols_seen = S;
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < S; ++j) {
        if (!with_trades) {
            keep.push_back(j);
            continue;
        }
        double total = 0.0;
        std::size_t minutes = 0;
        for (std::size_t d = 0; d < D; ++d) {
            if (!grid.present[d][j]) continue;
            for (int m = 0; m < grid.days[d].minutes; ++m) total += (*grid.trades)[d][static_cast<std::size_t>(m) * S + j];
            minutes += static_cast<std::size_t>(grid.days[d].minutes);
        }
        const double w = minutes ? total / static_cast<double>(minutes) : 0.0;
        if (w > config.activity_floor) {
            keep.push_back(j);
            rep.mean_trades[symbols[j]] = w;
        } else {
            rep.dropped_low_activity.emplace_back(symbols[j], w);
        }
    }
    rep.activity_filter_applied = with_trades;
    if (keep.empty()) throw InputError(source + ": no symbol passes the activity floor");

    if (keep.size() != S) {
        MinuteGrid filtered;
        filtered.days = grid.days;
        for (std::size_t j : keep) filtered.symbols.push_back(symbols[j]);
        const std::size_t R = keep.size();
        if (with_trades) filtered.trades.emplace();
        for (std::size_t d = 0; d < D; ++d) {
            const auto L = static_cast<std::size_t>(grid.days[d].minutes);
            std::vector<double> p(L * R);
            std::vector<double> t(with_trades ? L * R : 0);
            std::vector<std::uint8_t> pr(R);
            for (std::size_t r = 0; r < R; ++r) {
                pr[r] = grid.present[d][keep[r]];
                for (std::size_t m = 0; m < L; ++m) {
                    p[m * R + r] = grid.price[d][m * S + keep[r]];
                    if (with_trades) t[m * R + r] = (*grid.trades)[d][m * S + keep[r]];
                }
            }
            filtered.price.push_back(std::move(p));
            filtered.present.push_back(std::move(pr));
            if (with_trades) filtered.trades->push_back(std::move(t));
        }
        grid = std::move(filtered);
    }
    for (std::size_t d = 0; d < D; ++d)
        for (auto p : grid.present[d]) rep.missing_symbol_days += p ? 0 : 1;
    result.grid = std::move(grid);
    return result;
}

Ingested ingest(const std::string& csv_path, const std::string& calendar_path, const PipelineConfig& config) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw InputError("cannot open input " + csv_path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ingest_text(ss.str(), read_calendar(calendar_path), config, csv_path);
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

void write_grid_csv(const MinuteGrid& grid, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    const std::size_t S = grid.symbol_count();
    out << (grid.trades ? "date,minute,symbol,price,trades\n" : "date,minute,symbol,price\n");
    std::string buf;
    for (std::size_t d = 0; d < grid.days.size(); ++d) {
        buf.clear();
        for (int m = 0; m < grid.days[d].minutes; ++m) {
            for (std::size_t j = 0; j < S; ++j) {
                if (!grid.present[d][j]) continue;
                const std::size_t cell = static_cast<std::size_t>(m) * S + j;
                buf += grid.days[d].date;
                buf += ',';
                buf += std::to_string(m);
                buf += ',';
                buf += grid.symbols[j];
                buf += ',';
                buf += num(grid.price[d][cell]);
                if (grid.trades) {
                    buf += ',';
                    buf += num((*grid.trades)[d][cell]);
                }
                buf += '\n';
            }
        }
        out << buf;
    }
    if (!out) throw InputError("failed writing " + path);
}

// ---------------------------------------------------------------- analysis

std::string to_string(Stage s) {
    switch (s) {
        case Stage::ingest: return "ingest";
        case Stage::detect: return "detect";
        case Stage::fit: return "fit";
        case Stage::laws: return "laws";
        case Stage::report: return "report";
    }
    return "unknown";
}

Stage stage_from_string(const std::string& s) {
    for (Stage st : {Stage::ingest, Stage::detect, Stage::fit, Stage::laws, Stage::report})
        if (to_string(st) == s) return st;
    throw InputError("unknown stage " + s);
}

namespace {

std::vector<double> stock_column(const std::vector<double>& values, std::size_t S, std::size_t j, std::size_t K) {
    std::vector<double> col(K);
    for (std::size_t k = 0; k < K; ++k) col[k] = values[k * S + j];
    return col;
}

std::vector<double> indicator_column(const std::vector<std::uint8_t>& ind, std::size_t S, std::size_t j,
                                     std::size_t K) {
    std::vector<double> col(K);
    for (std::size_t k = 0; k < K; ++k) col[k] = ind[k * S + j];
    return col;
}

struct ShockRows {
    std::optional<ShockLawRow> market;
    std::optional<ShockLawRow> market_alt;
    std::vector<ShockLawRow> stocks;
    std::size_t zero_volatility = 0;
};

ShockLawRow law_row(std::span<const double> rate, std::span<const double> series, const ShockRecord& shock,
                    int horizon, int step, double M) {
    const auto curves = displaced_curves(rate, shock, horizon, step);
    ShockLawRow row;
    row.date = shock.date;
    row.t_c = shock.t_c;
    row.horizon = horizon;
    row.M = M;
    row.before = fit_omori(curves.before);
    row.after = fit_omori(curves.after);
    row.P_b = productivity(curves.before);
    row.P_a = productivity(curves.after);
    const auto ext = bath_extremes(series, static_cast<std::size_t>(shock.t_c / step), horizon / step);
    row.V1 = ext.v1;
    row.V2_b = ext.v2_before;
    row.V2_a = ext.v2_after;
    return row;
}

}  // namespace

void compute_law_rows(const PipelineConfig& config, const NormalizedVolatility& nv, const ExceedancePanel& panel,
                      const std::vector<ShockRecord>& shocks, PipelineOutputs& out, unsigned threads) {
    std::map<std::string, std::size_t> day_index;
    for (std::size_t d = 0; d < panel.days.size(); ++d) day_index[panel.days[d].date] = d;

    std::vector<const ShockRecord*> accepted;
    for (const auto& s : shocks)
        if (s.accepted) accepted.push_back(&s);

    const int step = panel.step;
    const std::size_t S = panel.symbols;
    std::vector<ShockRows> results(accepted.size());
    parallel_for(accepted.size(), threads, [&](std::size_t i) {
        const ShockRecord& shock = *accepted[i];
        const std::size_t d = day_index.at(shock.date);
        const auto K = static_cast<std::size_t>(panel.samples[d]);
        const auto tc = static_cast<std::size_t>(shock.t_c / step);
        const auto rate = zero_filled(panel.n_rate[d]);
        const auto vm = zero_filled(panel.v_market[d]);
        auto& res = results[i];

        if (const auto M = magnitude(vm, tc)) {
            res.market = law_row(rate, vm, shock, config.horizon, step, *M);
            const int last = last_sample_minute(panel.days[d].minutes, step);
            if (config.alt_horizon % step == 0 && shock.t_c >= config.alt_horizon &&
                shock.t_c + config.alt_horizon <= last)
                res.market_alt = law_row(rate, vm, shock, config.alt_horizon, step, *M);
        } else {
            ++res.zero_volatility;
        }

        const auto M_stock = magnitude_windowed(vm, tc, config.magnitude_window / step);
        if (!M_stock) return;
        for (std::size_t j = 0; j < S; ++j) {
            if (!nv.v.present[d][j]) continue;
            const auto ind = indicator_column(panel.indicator[d], S, j, K);
            const auto vj = zero_filled(stock_column(nv.v.values[d], S, j, K));
            auto row = law_row(ind, vj, shock, config.horizon, step, *M_stock);
            row.symbol = nv.v.symbols[j];
            res.stocks.push_back(std::move(row));
        }
    });

    out.market_rows.clear();
    out.market_rows_alt.clear();
    out.stock_rows.clear();
    for (auto& r : results) {
        if (r.market) out.market_rows.push_back(std::move(*r.market));
        if (r.market_alt) out.market_rows_alt.push_back(std::move(*r.market_alt));
        out.counts.stock_rows_zero_volatility += r.zero_volatility;
        for (auto& s : r.stocks) out.stock_rows.push_back(std::move(s));
    }
    auto& c = out.counts;
    c.market_rows = out.market_rows.size();
    c.market_rows_alt = out.market_rows_alt.size();
    c.stock_rows = out.stock_rows.size();
    c.market_no_fit_b = c.market_no_fit_a = c.stock_no_fit_b = c.stock_no_fit_a = 0;
    for (const auto& r : out.market_rows) {
        c.market_no_fit_b += r.before ? 0 : 1;
        c.market_no_fit_a += r.after ? 0 : 1;
    }
    for (const auto& r : out.stock_rows) {
        c.stock_no_fit_b += r.before ? 0 : 1;
        c.stock_no_fit_a += r.after ? 0 : 1;
    }
}

EnsembleLaws compute_ensemble(const PipelineConfig& config, const PipelineOutputs& out) {
    EnsembleLaws e;
    auto mp = [](const std::vector<ShockLawRow>& rows, bool after) {
        std::vector<MagnitudeProductivity> v;
        for (const auto& r : rows) v.push_back({r.M, after ? r.P_a : r.P_b});
        return v;
    };
    const auto mb = mp(out.market_rows, false), ma = mp(out.market_rows, true);
    e.pi_b = fit_productivity(mb);
    e.pi_a = fit_productivity(ma);
    e.pi_b_log_m = fit_productivity_vs_log_magnitude(mb);
    e.pi_a_log_m = fit_productivity_vs_log_magnitude(ma);
    e.stock_pi_b = fit_productivity(mp(out.stock_rows, false));
    e.stock_pi_a = fit_productivity(mp(out.stock_rows, true));
    if (e.pi_a) e.triggering = total_triggering_exponent(e.pi_a->pi, config.eta_v);

    auto column = [](const std::vector<ShockLawRow>& rows, double ShockLawRow::*field) {
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(r.*field);
        return v;
    };
    const auto v1 = column(out.market_rows, &ShockLawRow::V1);
    e.bath_b = fit_bath_proportional(v1, column(out.market_rows, &ShockLawRow::V2_b));
    e.bath_a = fit_bath_proportional(v1, column(out.market_rows, &ShockLawRow::V2_a));
    const auto sv1 = column(out.stock_rows, &ShockLawRow::V1);
    const auto bins = static_cast<std::size_t>(config.bath_bins);
    e.stock_bath_b = fit_bath_binned(sv1, column(out.stock_rows, &ShockLawRow::V2_b), bins);
    e.stock_bath_a = fit_bath_binned(sv1, column(out.stock_rows, &ShockLawRow::V2_a), bins);

    std::vector<double> edges;
    const auto nb = static_cast<int>(std::lround((config.m_hi - config.m_lo) / config.m_width));
    for (int i = 0; i <= nb; ++i) edges.push_back(config.m_lo + config.m_width * i);
    e.crossover = crossover_scan(out.stock_rows, edges, ScanSide::pooled);
    e.crossover_b = crossover_scan(out.stock_rows, edges, ScanSide::before);
    e.crossover_a = crossover_scan(out.stock_rows, edges, ScanSide::after);

    e.relations[config.horizon] = before_after_relations(out.market_rows);
    e.relations[config.alt_horizon] = before_after_relations(out.market_rows_alt);

    if (!out.ingest.activity_filter_applied) {
        e.activity_status = "unavailable: input has no trades column";
    } else {
        try {
            e.activity = activity_profile(out.stock_rows, out.ingest.mean_trades, config.activity_bins);
        } catch (const InputError& err) {
            e.activity_status = std::string("unavailable: ") + err.what();
        }
    }

    // Market curve parameters against the mean of per-stock parameters.
    std::map<std::string, std::array<std::vector<double>, 4>> per_day;  // omega_b, omega_a, alpha_b, alpha_a
    for (const auto& r : out.stock_rows) {
        auto& acc = per_day[r.date];
        if (r.before) {
            acc[0].push_back(r.before->omega);
            acc[2].push_back(r.before->alpha);
        }
        if (r.after) {
            acc[1].push_back(r.after->omega);
            acc[3].push_back(r.after->alpha);
        }
    }
    const char* names[4][2] = {{"before", "omega"}, {"after", "omega"}, {"before", "alpha"}, {"after", "alpha"}};
    for (int p = 0; p < 4; ++p) {
        std::vector<double> market, stock;
        for (const auto& r : out.market_rows) {
            const auto& fit = (p % 2 == 0) ? r.before : r.after;
            const auto it = per_day.find(r.date);
            if (!fit || it == per_day.end() || it->second[static_cast<std::size_t>(p)].empty()) continue;
            market.push_back(p < 2 ? fit->omega : fit->alpha);
            stock.push_back(mean(it->second[static_cast<std::size_t>(p)]));
        }
        if (market.size() < 3) continue;
        MarketStockConsistency m;
        m.side = names[p][0];
        m.parameter = names[p][1];
        m.shocks = market.size();
        m.correlation = pearson(market, stock).value_or(0.0);
        e.market_stock.push_back(m);
    }
    return e;
}

PipelineOutputs analyze(const Ingested& ingested, const PipelineConfig& config, Stage until, unsigned threads) {
    config.validate();
    const auto raw = compute_volatility(ingested.grid, config.step);
    return analyze_normalized(normalize_and_detrend(raw), ingested.report, config, until, threads, &ingested.grid);
}

PipelineOutputs analyze_normalized(NormalizedVolatility nv, const IngestReport& report, const PipelineConfig& config,
                                   Stage until, unsigned threads, const MinuteGrid* grid) {
    config.validate();
    PipelineOutputs out;
    out.ingest = report;
    auto& c = out.counts;
    c.ingest_rows = report.rows;
    c.symbols_dropped_activity = report.dropped_low_activity.size();
    c.days = nv.v.days.size();
    for (const auto& d : nv.v.days) c.half_days += d.half_day ? 1 : 0;
    out.normalized = std::move(nv);
    c.symbols_retained = out.normalized.v.symbols.size();
    c.symbols_dropped_variance = out.normalized.dropped_symbols.size();
    if (until == Stage::ingest) return out;

    out.exceedance = exceedance_panel(out.normalized, config.q);
    DetectorParams params;
    params.q = config.q;
    params.x_c = config.x_c;
    params.gap_minutes = config.gap_minutes;
    params.edge_minutes = config.horizon;
    params.smooth_minutes = config.smooth_minutes;
    params.min_days = config.min_days;
    out.detection = detect_shocks(out.exceedance, params, threads);

    // Shuffle null model and threshold calibration.
    const auto shuffled = shuffle_intraday(out.normalized, config.seed);
    const auto sh_panel = exceedance_panel(shuffled, config.q);
    const auto sh_baseline = build_baseline(sh_panel, config.smooth_minutes, config.min_days);
    std::vector<double> xs, xs_sh;
    for (std::size_t d = 0; d < sh_panel.days.size(); ++d) {
        for (double x : out.detection.scores[d].x)
            if (!std::isnan(x)) xs.push_back(x);
        const auto sh = comovement_score(sh_panel.n_rate[d], sh_baseline, sh_panel.days[d].date, sh_panel.step);
        for (double x : sh.x)
            if (!std::isnan(x)) xs_sh.push_back(x);
    }
    const LogBins bins{config.pdf_lo, config.pdf_hi, config.pdf_bins_per_decade};
    if (xs.size() >= kMinPdfSamples && xs_sh.size() >= kMinPdfSamples) {
        out.pdf_x = empirical_pdf(xs, bins);
        out.pdf_x_sh = empirical_pdf(xs_sh, bins);
        out.calibration = calibrate_threshold(*out.pdf_x, *out.pdf_x_sh, config.calibration_ratio, config.x_c);
    } else {
        out.calibration.x_c = config.x_c;
        out.calibration.warning = "too few scored minutes for threshold calibration";
    }
    if (!out.calibration.warning.empty()) out.notes.push_back(out.calibration.warning);
    out.x_c_used = config.x_c;
    if (config.use_calibrated_x_c && out.calibration.diverged) {
        out.x_c_used = out.calibration.x_c;
        for (std::size_t d = 0; d < out.detection.scores.size(); ++d) {
            const auto cascades = find_cascades(out.detection.scores[d], out.x_c_used, config.gap_minutes);
            out.detection.shocks[d] =
                select_main_shock(cascades, out.exceedance.days[d], config.horizon, out.exceedance.step);
        }
    }
    for (const auto& s : out.detection.scores) {
        for (double x : s.x) {
            if (std::isnan(x)) continue;
            ++c.scored_samples;
            if (x > out.x_c_used) ++c.samples_above_xc;
        }
    }
    for (const auto& s : out.detection.shocks) {
        if (s.accepted)
            ++c.shocks_accepted;
        else
            ++c.shocks_rejected[to_string(s.reason)];
    }

    if (grid && config.resolution_steps.size() >= 2) {
        auto xc = config.resolution_x_c;
        if (xc.empty()) xc.assign(config.resolution_steps.size(), config.x_c);
        out.resolution = resolution_consistency(*grid, config.resolution_steps, xc, params, threads);
    }
    if (until == Stage::detect) return out;

    compute_law_rows(config, out.normalized, out.exceedance, out.detection.shocks, out, threads);
    if (until == Stage::fit) return out;

    out.ensemble = compute_ensemble(config, out);
    if (out.detection.shocks.empty() || c.shocks_accepted == 0)
        out.notes.push_back("no accepted shocks; law tables are empty");
    return out;
}

// ---------------------------------------------------------------- manifest

std::string RunManifest::to_json() const {
    json j;
    j["tool"] = "volcascade";
    j["tool_version"] = tool_version;
    j["config_hash"] = config_hash;
    j["completed_stage"] = completed_stage;
    j["inputs"] = json::array();
    for (const auto& [name, digest] : inputs) j["inputs"].push_back({{"name", name}, {"sha256", digest}});
    j["outputs"] = json::array();
    for (const auto& [name, digest] : outputs) j["outputs"].push_back({{"file", name}, {"sha256", digest}});
    const auto& c = counts;
    j["counts"] = {{"ingest_rows", c.ingest_rows},
                   {"symbols_retained", c.symbols_retained},
                   {"symbols_dropped_activity", c.symbols_dropped_activity},
                   {"symbols_dropped_variance", c.symbols_dropped_variance},
                   {"days", c.days},
                   {"half_days", c.half_days},
                   {"scored_samples", c.scored_samples},
                   {"samples_above_xc", c.samples_above_xc},
                   {"shocks_accepted", c.shocks_accepted},
                   {"shocks_rejected", c.shocks_rejected},
                   {"market_rows", c.market_rows},
                   {"market_no_fit_before", c.market_no_fit_b},
                   {"market_no_fit_after", c.market_no_fit_a},
                   {"market_rows_alt_horizon", c.market_rows_alt},
                   {"stock_rows", c.stock_rows},
                   {"stock_no_fit_before", c.stock_no_fit_b},
                   {"stock_no_fit_after", c.stock_no_fit_a},
                   {"rows_zero_volatility", c.stock_rows_zero_volatility}};
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- writers

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << content;
    if (!out) throw InputError("failed writing " + path.string());
}

std::string fit_field(const std::optional<OmoriFit>& f, double OmoriFit::*field) {
    return f ? num((*f).*field) : std::string{};
}

std::string law_rows_csv(const std::vector<ShockLawRow>& rows, bool with_symbol) {
    std::ostringstream os;
    os << (with_symbol ? "date,symbol," : "date,")
       << "M,omega_b,omega_a,alpha_b,alpha_a,P_b,P_a,V1,V2b,V2a,r_b,r_a\n";
    for (const auto& r : rows) {
        os << r.date << ',';
        if (with_symbol) os << r.symbol << ',';
        os << num(r.M) << ',' << fit_field(r.before, &OmoriFit::omega) << ',' << fit_field(r.after, &OmoriFit::omega)
           << ',' << fit_field(r.before, &OmoriFit::alpha) << ',' << fit_field(r.after, &OmoriFit::alpha) << ','
           << num(r.P_b) << ',' << num(r.P_a) << ',' << num(r.V1) << ',' << num(r.V2_b) << ',' << num(r.V2_a) << ','
           << fit_field(r.before, &OmoriFit::r) << ',' << fit_field(r.after, &OmoriFit::r) << '\n';
    }
    return os.str();
}

json shock_json(const ShockRecord& s) {
    json j;
    j["date"] = s.date;
    j["t_c"] = s.t_c >= 0 ? json(s.t_c) : json(nullptr);
    j["x_peak"] = s.t_c >= 0 ? json(s.x_peak) : json(nullptr);
    j["cascade"] = s.cascade;
    j["weight"] = s.weight;
    j["accepted"] = s.accepted;
    j["reason"] = s.reason == Rejection::none ? json(nullptr) : json(to_string(s.reason));
    return j;
}

json optional_fit(const std::optional<ProductivityFit>& f) {
    if (!f) return nullptr;
    return {{"Pi", f->pi}, {"stderr", f->stderr_pi}, {"intercept", f->intercept}, {"r", f->r},
            {"rows", f->n_rows}, {"zero_rows_excluded", f->zero_rows}};
}

json optional_bath(const std::optional<BathFit>& f) {
    if (!f) return nullptr;
    return {{"C_B", f->c_b}, {"B", f->b}, {"r", f->r}, {"chi2", f->chi2}, {"rows", f->n}};
}

json optional_binned(const std::optional<BinnedBath>& f) {
    if (!f) return nullptr;
    return {{"slope", f->fit.slope}, {"intercept", f->fit.intercept}, {"r", f->fit.r}, {"bins", f->bins.size()}};
}

json crossover_json(const CrossoverScan& s) {
    json j;
    j["M_x"] = s.m_x ? json(*s.m_x) : json(nullptr);
    j["status"] = s.status;
    return j;
}

}  // namespace

std::string ensemble_json(const PipelineOutputs& out, const PipelineConfig& config) {
    const auto& e = out.ensemble;
    json j;
    j["Pi_b"] = optional_fit(e.pi_b);
    j["Pi_a"] = optional_fit(e.pi_a);
    j["Pi_b_vs_log_M"] = optional_fit(e.pi_b_log_m);
    j["Pi_a_vs_log_M"] = optional_fit(e.pi_a_log_m);
    j["stock_Pi_b"] = optional_fit(e.stock_pi_b);
    j["stock_Pi_a"] = optional_fit(e.stock_pi_a);
    j["C_B_b"] = e.bath_b ? json(e.bath_b->c_b) : json(nullptr);
    j["C_B_a"] = e.bath_a ? json(e.bath_a->c_b) : json(nullptr);
    j["B_b"] = e.bath_b ? json(e.bath_b->b) : json(nullptr);
    j["B_a"] = e.bath_a ? json(e.bath_a->b) : json(nullptr);
    j["bath_b"] = optional_bath(e.bath_b);
    j["bath_a"] = optional_bath(e.bath_a);
    j["stock_bath_b"] = optional_binned(e.stock_bath_b);
    j["stock_bath_a"] = optional_binned(e.stock_bath_a);
    j["M_x"] = e.crossover.m_x ? json(*e.crossover.m_x) : json(nullptr);
    j["crossover"] = {{"pooled", crossover_json(e.crossover)},
                      {"before", crossover_json(e.crossover_b)},
                      {"after", crossover_json(e.crossover_a)}};
    json corr = json::object();
    for (const auto& [h, rels] : e.relations) {
        if (!rels) {
            corr[std::to_string(h)] = nullptr;
            continue;
        }
        json r = json::object();
        for (const auto& rel : *rels)
            r[rel.name] = {{"correlation", rel.correlation}, {"slope", rel.slope}, {"rows", rel.n}};
        corr[std::to_string(h)] = r;
    }
    j["correlations"] = corr;
    if (e.triggering)
        j["total_triggering"] = {{"exponent", e.triggering->exponent},
                                 {"eta_V", config.eta_v},
                                 {"trend", to_string(e.triggering->trend)}};
    else
        j["total_triggering"] = nullptr;
    j["market_stock_correlation"] = json::array();
    for (const auto& m : e.market_stock)
        j["market_stock_correlation"].push_back(
            {{"side", m.side}, {"parameter", m.parameter}, {"correlation", m.correlation}, {"shocks", m.shocks}});
    j["activity_profile"] = e.activity_status.empty() ? json("available") : json(e.activity_status);
    j["x_c"] = out.x_c_used;
    j["x_c_calibrated"] = out.calibration.x_c;
    j["x_c_calibration_diverged"] = out.calibration.diverged;
    const auto& c = out.counts;
    j["fraction_minutes_above_x_c"] =
        c.scored_samples ? static_cast<double>(c.samples_above_xc) / static_cast<double>(c.scored_samples) : 0.0;
    j["shocks_accepted"] = c.shocks_accepted;
    j["notes"] = out.notes;
    return j.dump(2) + "\n";
}

RunManifest run_pipeline(const PipelineConfig& config, const PipelineInputs& inputs, const fs::path& out_dir,
                         Stage until, unsigned threads) {
    using clock = std::chrono::steady_clock;
    std::string stage = "setup";
    std::vector<std::string> written;
    json timing = json::object();
    RunManifest manifest;
    PipelineOutputs out;
    auto timed = [&](const std::string& name, auto&& fn) {
        stage = name;
        const auto t0 = clock::now();
        fn();
        timing[name + "_ms"] = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };
    auto emit = [&](const std::string& name, const std::string& content) {
        write_file(out_dir / name, content);
        written.push_back(name);
    };

    try {
        config.validate();
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw InputError("cannot create output directory " + out_dir.string());
        fs::remove(out_dir / "FAILED", ec);

        manifest.config_hash = sha256_hex(config.serialize());
        manifest.inputs.emplace_back(fs::path(inputs.csv_path).filename().string(), sha256_file(inputs.csv_path));
        if (!inputs.calendar_path.empty())
            manifest.inputs.emplace_back(fs::path(inputs.calendar_path).filename().string(),
                                         sha256_file(inputs.calendar_path));
        emit("config.cfg", config.serialize());

        Ingested ingested;
        timed("ingest", [&] {
            ingested = ingest(inputs.csv_path, inputs.calendar_path, config);
            out = analyze(ingested, config, Stage::ingest, threads);
            json rep;
            rep["rows"] = ingested.report.rows;
            rep["symbols_seen"] = ingested.report.symbols_seen;
            rep["activity_filter_applied"] = ingested.report.activity_filter_applied;
            rep["activity_floor"] = config.activity_floor;
            rep["dropped_low_activity"] = json::array();
            for (const auto& [s, w] : ingested.report.dropped_low_activity)
                rep["dropped_low_activity"].push_back({{"symbol", s}, {"mean_trades", w}});
            rep["dropped_zero_variance"] = out.normalized.dropped_symbols;
            rep["missing_symbol_days"] = ingested.report.missing_symbol_days;
            rep["half_days"] = ingested.report.half_days;
            rep["short_days_not_in_calendar"] = ingested.report.short_days_not_in_calendar;
            emit("ingest_report.json", rep.dump(2) + "\n");

            std::ostringstream norm;
            norm << "sample,minute,pattern\n";
            for (std::size_t k = 1; k < out.normalized.pattern.size(); ++k)
                norm << k << ',' << k * static_cast<std::size_t>(config.step) << ',' << num(out.normalized.pattern[k])
                     << '\n';
            emit("normalization.csv", norm.str());

            std::ostringstream sym;
            sym << "symbol,sigma_full,mean_trades\n";
            for (std::size_t j = 0; j < out.normalized.v.symbols.size(); ++j) {
                const auto& s = out.normalized.v.symbols[j];
                const auto it = ingested.report.mean_trades.find(s);
                sym << s << ',' << num(out.normalized.sigma_full[j]) << ','
                    << (it == ingested.report.mean_trades.end() ? std::string{} : num(it->second)) << '\n';
            }
            emit("symbols.csv", sym.str());
        });
        manifest.completed_stage = "ingest";

        if (until != Stage::ingest) {
            timed("detect", [&] {
                out = analyze(ingested, config, Stage::detect, threads);
                const auto& det = out.detection;
                std::ostringstream base;
                base << "sample,minute,mean_rate,std_rate,raw_mean,raw_std,usable\n";
                for (std::size_t k = 0; k < det.baseline.mean_rate.size(); ++k)
                    base << k << ',' << k * static_cast<std::size_t>(config.step) << ','
                         << num(det.baseline.mean_rate[k]) << ',' << num(det.baseline.std_rate[k]) << ','
                         << num(det.baseline.raw_mean[k]) << ',' << num(det.baseline.raw_std[k]) << ','
                         << (det.baseline.usable(static_cast<int>(k)) ? 1 : 0) << '\n';
                emit("baseline.csv", base.str());

                std::ostringstream series;
                series << "date,minute,n,V,nprime,x\n";
                for (std::size_t d = 0; d < det.scores.size(); ++d) {
                    const auto& s = det.scores[d];
                    for (std::size_t k = 1; k < s.n.size(); ++k)
                        series << s.date << ',' << s.minute(k) << ',' << num(s.n[k]) << ','
                               << num(out.exceedance.v_market[d][k]) << ',' << num(s.nprime[k]) << ','
                               << num(s.x[k]) << '\n';
                }
                emit("market_series.csv", series.str());

                std::string shocks;
                for (const auto& s : det.shocks) shocks += shock_json(s).dump() + "\n";
                emit("shocks.jsonl", shocks);

                std::ostringstream cal;
                cal << "bin,bin_lo,bin_hi,center,pdf_x,pdf_x_sh\n";
                if (out.pdf_x && out.pdf_x_sh)
                    for (std::size_t i = 0; i < out.pdf_x->bins(); ++i)
                        cal << i << ',' << num(out.pdf_x->edges[i]) << ',' << num(out.pdf_x->edges[i + 1]) << ','
                            << num(out.pdf_x->center(i)) << ',' << num(out.pdf_x->density[i]) << ','
                            << num(out.pdf_x_sh->density[i]) << '\n';
                emit("calibration_pdf.csv", cal.str());

                if (out.resolution) {
                    std::ostringstream res;
                    res << "date,step_a,step_b,t_c_a,t_c_b,abs_diff\n";
                    for (const auto& r : out.resolution->rows)
                        res << r.date << ',' << r.step_a << ',' << r.step_b << ',' << r.t_c_a << ',' << r.t_c_b << ','
                            << r.diff << '\n';
                    for (const auto& p : out.resolution->pairs)
                        res << "mean," << p.step_a << ',' << p.step_b << ",,," << num(p.mean_abs_diff) << '\n';
                    emit("resolution.csv", res.str());
                }
            });
            manifest.completed_stage = "detect";
        }

        if (until == Stage::fit || until == Stage::laws || until == Stage::report) {
            timed("fit", [&] {
                compute_law_rows(config, out.normalized, out.exceedance, out.detection.shocks, out, threads);
                emit("market_laws.csv", law_rows_csv(out.market_rows, false));
                emit("market_laws_dt" + std::to_string(config.alt_horizon) + ".csv",
                     law_rows_csv(out.market_rows_alt, false));
                emit("stock_laws.csv", law_rows_csv(out.stock_rows, true));
            });
            manifest.completed_stage = "fit";
        }

        if (until == Stage::laws || until == Stage::report) {
            timed("laws", [&] {
                out.ensemble = compute_ensemble(config, out);
                if (out.counts.shocks_accepted == 0) out.notes.push_back("no accepted shocks; law tables are empty");
                emit("ensemble.json", ensemble_json(out, config));
            });
            manifest.completed_stage = "laws";
        }

        if (until == Stage::report) {
            timed("report", [&] {
                for (const auto& f : report(out, config, out_dir, default_fixture_path())) written.push_back(f);
            });
            manifest.completed_stage = "report";
        }

        stage = "manifest";
        manifest.counts = out.counts;
        std::sort(written.begin(), written.end());
        for (const auto& f : written) manifest.outputs.emplace_back(f, sha256_file(out_dir / f));
        write_file(out_dir / "manifest.json", manifest.to_json());
        write_file(out_dir / "timing.json", timing.dump(2) + "\n");
        return manifest;
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& err) {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        std::ofstream marker(out_dir / "FAILED");
        marker << "stage=" << stage << "\nerror=" << err.what() << "\n";
        const bool input = dynamic_cast<const InputError*>(&err) != nullptr;
        throw StageError(stage, err.what(), input);
    }
}

}  // namespace volcascade
