#pragma once

// Response curves around a main shock and the Omori, productivity and Bath
// law estimators built on them.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "volcascade/detector.hpp"
#include "volcascade/stats.hpp"

namespace volcascade {

enum class Side { before, after };

/// Cumulative exceedance count against displaced time tau = |t - T_c|.
/// The main-shock minute itself belongs to neither side.
struct ResponseCurve {
    Side side = Side::after;
    int horizon = 90;         // minutes
    std::vector<int> tau;     // minutes, strictly increasing, starts at one step
    std::vector<double> N;    // non-decreasing
};

struct ResponsePair {
    ResponseCurve before;
    ResponseCurve after;
};

/// `rate` holds one value per sample (market fraction n(t) or a single
/// stock's 0/1 indicator); NaN samples count as no event. Throws InputError
/// if the horizon runs past either end of the day.
ResponsePair displaced_curves_at(std::span<const double> rate, int step, int t_c, int horizon);

/// Same, for a detected shock. Refuses shocks that were not accepted.
ResponsePair displaced_curves(std::span<const double> rate, const ShockRecord& shock, int horizon, int step = 1);

struct OmoriFit {
    double omega = 0.0;
    double beta = 0.0;
    double alpha = 0.0;  // beta * (1 - omega)
    double stderr_omega = 0.0;
    double r = 0.0;
    std::size_t n_points = 0;
};

inline constexpr std::size_t kMinOmoriPoints = 5;

/// Log-log OLS of N on tau over points with N > 0. nullopt when fewer than
/// kMinOmoriPoints remain.
std::optional<OmoriFit> fit_omori(const ResponseCurve& curve);

/// M = log10 V(T_c); nullopt when V(T_c) is not positive.
std::optional<double> magnitude(std::span<const double> v_market, std::size_t t_c_index);

/// M from the largest market volatility within +-half_width samples of T_c
/// (used for per-stock rows).
std::optional<double> magnitude_windowed(std::span<const double> v_market, std::size_t t_c_index, int half_width = 3);

/// P = N(horizon); zero for an empty curve.
double productivity(const ResponseCurve& curve);

struct MagnitudeProductivity {
    double M = 0.0;
    double P = 0.0;
};

struct ProductivityFit {
    double pi = 0.0;
    double stderr_pi = 0.0;
    double intercept = 0.0;
    double r = 0.0;
    std::size_t n_rows = 0;
    std::size_t zero_rows = 0;  // P == 0, excluded
};

inline constexpr std::size_t kMinEnsembleRows = 30;

/// Slope of log10 P against M (= log10 V(T_c)).
std::optional<ProductivityFit> fit_productivity(std::span<const MagnitudeProductivity> rows);

/// Alternative reading P ~ M^Pi: slope of log10 P against log10 M, M > 0 only.
std::optional<ProductivityFit> fit_productivity_vs_log_magnitude(std::span<const MagnitudeProductivity> rows);

enum class Trend { decreasing, flat, increasing };
std::string to_string(Trend t);

struct TriggeringExponent {
    double exponent = 0.0;  // Pi_a - eta_V
    Trend trend = Trend::flat;
};

TriggeringExponent total_triggering_exponent(double pi_a, double eta_v = 3.0);

struct BathExtremes {
    double v1 = 0.0;
    double v2_before = 0.0;
    double v2_after = 0.0;
};

/// V_1 at T_c and the largest value in [T_c - h, T_c) and (T_c, T_c + h],
/// all in samples. NaN samples are ignored.
BathExtremes bath_extremes(std::span<const double> series, std::size_t t_c_index, int horizon_samples);

struct BathFit {
    double c_b = 0.0;
    double b = 0.0;  // -log10 c_b
    double r = 0.0;
    double chi2 = 0.0;
    std::size_t n = 0;
};

/// Least squares through the origin: C_B = sum(V1 V2) / sum(V1^2).
std::optional<BathFit> fit_bath_proportional(std::span<const double> v1, std::span<const double> v2);

struct BathBin {
    double v1_mean = 0.0;
    double v2_mean = 0.0;
    double v2_std = 0.0;
    std::size_t count = 0;
};

struct BinnedBath {
    std::vector<BathBin> bins;
    LinearFit fit;
};

/// Equal-count bins of V1, then OLS of bin-mean V2 on bin-mean V1.
std::optional<BinnedBath> fit_bath_binned(std::span<const double> v1, std::span<const double> v2,
                                          std::size_t bins = 10);

/// One row per shock (market: symbol empty) or per shock and stock.
struct ShockLawRow {
    std::string date;
    std::string symbol;
    int t_c = -1;
    int horizon = 90;
    double M = 0.0;
    std::optional<OmoriFit> before;
    std::optional<OmoriFit> after;
    double P_b = 0.0;
    double P_a = 0.0;
    double V1 = 0.0;
    double V2_b = 0.0;
    double V2_a = 0.0;
};

struct Relation {
    std::string name;  // e.g. "omega", "alpha", "P"
    double correlation = 0.0;
    double slope = 0.0;
    std::size_t n = 0;
};

/// Before-vs-after correlation and slope for (Omega), (alpha) and (P).
/// Rows lacking a fit on either side are skipped; needs kMinEnsembleRows.
std::optional<std::vector<Relation>> before_after_relations(std::span<const ShockLawRow> rows);

struct ActivityBucket {
    double omega_lo = 0.0;
    double omega_hi = 0.0;
    double omega_mean = 0.0;
    std::size_t stocks = 0;
    std::size_t rows = 0;
    double alpha_b = 0.0, alpha_a = 0.0;
    double omega_b = 0.0, omega_a = 0.0;
    double P_b = 0.0, P_a = 0.0;
    double v1 = 0.0, v2_b = 0.0, v2_a = 0.0;
};

/// Buckets stocks by mean trades per minute (log-spaced over the observed
/// range) and averages their per-shock response parameters. Throws
/// InputError when no activity data is supplied.
std::vector<ActivityBucket> activity_profile(std::span<const ShockLawRow> stock_rows,
                                             const std::map<std::string, double>& mean_trades, int bins = 8);

enum class ScanSide { before, after, pooled };

struct CrossoverBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double mean_omega = 0.0;
    double mean_alpha = 0.0;
};

struct CrossoverScan {
    std::vector<CrossoverBin> bins;
    std::optional<double> m_x;
    std::string status;  // empty on success
};

inline constexpr std::size_t kMinCrossoverRows = 100;

/// Bins rows by M on the given edges and reports the lower edge of the first
/// non-empty bin whose mean Omega has the opposite sign of the previous one.
CrossoverScan crossover_scan(std::span<const ShockLawRow> rows, const std::vector<double>& m_edges,
                             ScanSide side = ScanSide::pooled);

}  // namespace volcascade
