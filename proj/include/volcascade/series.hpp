#pragma once

// Minute panels, normalized volatility and market exceedance aggregates.
//
// Every per-day buffer is laid out sample-major: value for sample k and
// symbol j lives at [k * symbols + j]. Symbols are kept in ascending lexical
// order so that all reductions run in one fixed order.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace volcascade {

inline constexpr int kRegularDayMinutes = 390;
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct DayInfo {
    std::string date;  // ISO-8601
    int minutes = kRegularDayMinutes;
    bool half_day = false;
};

/// Day x minute x symbol price panel with optional trade counts.
struct MinuteGrid {
    std::vector<DayInfo> days;
    std::vector<std::string> symbols;
    std::vector<std::vector<double>> price;          // per day, minutes * S
    std::vector<std::vector<std::uint8_t>> present;  // per day, S
    std::optional<std::vector<std::vector<double>>> trades;  // per day, minutes * S

    std::size_t symbol_count() const { return symbols.size(); }
    double price_at(std::size_t d, int m, std::size_t j) const {
        return price[d][static_cast<std::size_t>(m) * symbols.size() + j];
    }

    /// Checks every MinuteGrid invariant; throws InputError naming the
    /// offending symbol/day.
    void validate() const;

    /// Reorders symbols into ascending lexical order (data moved along).
    void canonicalize();
};

/// Volatility sampled every `step` minutes. Sample k covers minute k * step;
/// sample 0 of every day is undefined (NaN), as are missing symbol-days.
struct VolatilityPanel {
    int step = 1;
    std::vector<DayInfo> days;
    std::vector<std::string> symbols;
    std::vector<int> samples;                        // per day
    std::vector<std::vector<double>> values;         // per day, samples * S
    std::vector<std::vector<std::uint8_t>> present;  // per day, S

    std::size_t symbol_count() const { return symbols.size(); }
    double at(std::size_t d, int k, std::size_t j) const {
        return values[d][static_cast<std::size_t>(k) * symbols.size() + j];
    }
    int max_samples() const;
};

struct NormalizedVolatility {
    VolatilityPanel v;
    std::vector<double> sigma_full;  // per retained symbol, raw units
    std::vector<double> pattern;     // intraday factor A per sample index
    std::vector<std::string> dropped_symbols;  // zero variance
};

struct ExceedancePanel {
    double q = 3.0;
    int step = 1;
    std::vector<DayInfo> days;
    std::size_t symbols = 0;
    std::vector<int> samples;                          // per day
    std::vector<std::vector<std::uint8_t>> indicator;  // per day, samples * S
    std::vector<std::vector<double>> n_rate;           // per day, samples (NaN undefined)
    std::vector<std::vector<double>> v_market;         // per day, samples (NaN undefined)
    std::vector<int> effective_symbols;                // per day
};

/// v_raw = |ln(p[m] / p[m - step])| on the decimated grid m = k * step.
/// Trailing minutes that do not fill a whole step are dropped.
VolatilityPanel compute_volatility(const MinuteGrid& grid, int step_minutes);

/// Scales each symbol by its full-period standard deviation, then divides by
/// the intraday pattern A (mean over symbols and full days per sample).
/// Half-days are normalized but never contribute to A.
NormalizedVolatility normalize_and_detrend(const VolatilityPanel& raw);

/// Binary exceedance v >= q plus the market fraction n(t) and mean V(t).
ExceedancePanel exceedance_panel(const NormalizedVolatility& nv, double q = 3.0);
ExceedancePanel exceedance_panel(const VolatilityPanel& v, double q = 3.0);

/// Market series with undefined samples read as zero (no exceedance, no
/// volatility). Used by the response-curve and extreme-value code.
std::vector<double> zero_filled(const std::vector<double>& series);

}  // namespace volcascade
