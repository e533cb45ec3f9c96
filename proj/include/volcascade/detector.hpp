#pragma once

// Market shock detection: co-movement score, threshold calibration, cascade
// grouping and main-shock selection.

#include <optional>
#include <string>
#include <vector>

#include "volcascade/pdf.hpp"
#include "volcascade/series.hpp"

namespace volcascade {

struct DetectorParams {
    double q = 3.0;
    double x_c = 1.0;
    int gap_minutes = 60;      // cascade window
    int edge_minutes = 90;     // exclusion distance from open/close
    int smooth_minutes = 15;
    int min_days = 30;
};

/// Per-sample mean and dispersion of n(t) across full days, smoothed.
struct IntradayBaseline {
    int step = 1;
    int smoothing_window = 15;  // in samples, odd
    std::vector<double> mean_rate;
    std::vector<double> std_rate;
    std::vector<double> raw_mean;
    std::vector<double> raw_std;
    std::vector<int> excluded;  // samples with no usable dispersion

    bool usable(int k) const;
};

/// Centered moving average; the window shrinks symmetrically near the ends.
/// The result is rescaled so its mean equals the input mean.
std::vector<double> smooth_centered(const std::vector<double>& xs, int window);

IntradayBaseline build_baseline(const ExceedancePanel& panel, int smoothing_minutes = 15, int min_days = 30);

struct ComovementSeries {
    std::string date;
    int step = 1;
    std::vector<double> n;
    std::vector<double> nprime;
    std::vector<double> x;  // NaN where the baseline has no score

    int minute(std::size_t k) const { return static_cast<int>(k) * step; }
};

ComovementSeries comovement_score(const std::vector<double>& n, const IntradayBaseline& baseline,
                                  std::string date = {}, int step = 1);

struct Cascade {
    std::vector<int> minutes;
    std::vector<double> scores;
    double weight = 0.0;
};

/// Groups minutes with x > x_c; a gap strictly greater than `gap_minutes`
/// between consecutive members opens a new cascade.
std::vector<Cascade> find_cascades(const ComovementSeries& series, double x_c, int gap_minutes = 60);

enum class Rejection { none, near_open, near_close, half_day, no_cascade };
std::string to_string(Rejection r);

struct ShockRecord {
    std::string date;
    int t_c = -1;  // minutes after the open
    double x_peak = 0.0;
    std::vector<int> cascade;
    double weight = 0.0;
    bool accepted = false;
    Rejection reason = Rejection::no_cascade;
};

/// Last minute with a defined volatility sample for a day of `minutes`
/// minutes sampled every `step`.
int last_sample_minute(int minutes, int step);

ShockRecord select_main_shock(const std::vector<Cascade>& cascades, const DayInfo& day, int edge_minutes = 90,
                              int step = 1);

struct Calibration {
    double x_c = 1.0;
    bool diverged = false;
    std::string warning;
};

/// Smallest bin edge above which every non-empty bin of the structured pdf
/// carries at least `ratio` times the shuffled density.
Calibration calibrate_threshold(const Pdf& structured, const Pdf& shuffled, double ratio = 2.0,
                                double fallback = 1.0);

struct Detection {
    IntradayBaseline baseline;
    std::vector<ComovementSeries> scores;
    std::vector<ShockRecord> shocks;
};

/// Baseline + per-day scoring + cascade selection over a whole panel.
Detection detect_shocks(const ExceedancePanel& panel, const DetectorParams& params, unsigned threads = 1);

struct ResolutionRow {
    std::string date;
    int step_a = 1;
    int step_b = 1;
    int t_c_a = -1;
    int t_c_b = -1;
    int diff = 0;
};

struct ResolutionPair {
    int step_a = 1;
    int step_b = 1;
    double mean_abs_diff = 0.0;
    std::size_t days = 0;
    std::size_t skipped = 0;
};

struct ResolutionTable {
    std::vector<ResolutionRow> rows;
    std::vector<ResolutionPair> pairs;
};

/// Runs detection at each step and compares accepted T_c against the first
/// step. `x_c` holds one threshold per step.
ResolutionTable resolution_consistency(const MinuteGrid& grid, const std::vector<int>& steps,
                                       const std::vector<double>& x_c, const DetectorParams& params,
                                       unsigned threads = 1);

}  // namespace volcascade
