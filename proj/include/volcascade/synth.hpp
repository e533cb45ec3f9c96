#pragma once

// Synthetic volatility panels with known shock parameters, and the intraday
// shuffle null model.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "volcascade/series.hpp"

namespace volcascade {

enum class MagnitudeLaw { pareto, log_uniform };

/// Laws imposed across the ensemble. Unset members are not enforced.
struct InjectedLaws {
    std::optional<double> pi_b;
    std::optional<double> pi_a;
    double productivity_scale = 1.0;  // expected P = scale * V1^Pi
    std::optional<double> c_b_b;
    std::optional<double> c_b_a;
    double bath_noise = 0.0;  // relative std of the V2 / (C_B V1) factor
};

struct GeneratorSpec {
    int days = 200;
    int symbols = 50;
    int day_length = kRegularDayMinutes;
    int horizon = 90;
    int tc_lo = 90;    // inclusive T_c placement range
    int tc_hi = 299;
    double shock_fraction = 1.0;
    double omega_b = 0.09;
    double omega_a = 0.32;
    double alpha_b = 0.21;
    double alpha_a = 0.81;
    double omega_spread = 0.0;  // per-day uniform jitter of both exponents
    double background = 0.005;  // per-minute exceedance probability
    double max_probability = 1.0;  // cap on the per-minute response probability
    double q = 3.0;
    double eta_v = 3.0;
    MagnitudeLaw magnitude_law = MagnitudeLaw::pareto;
    double v_min = 10.0;
    double v_max = 1000.0;
    double stock_dispersion = 0.3;  // log-normal spread of per-stock shock sizes
    InjectedLaws laws;
    double price_scale = 1e-3;      // log-return per normalized volatility unit
    double trades_min = 5.0;        // per-symbol mean trades/minute range; 0 disables
    double trades_max = 160.0;
    std::string start_date = "2001-01-02";
    std::uint64_t seed = 1;

    /// Throws InputError when the spec violates its invariants.
    void validate() const;
};

struct DayTruth {
    std::string date;
    bool has_shock = false;
    int t_c = -1;
    double v1 = 0.0;
    double omega_b = 0.0, omega_a = 0.0;
    double alpha_b = 0.0, alpha_a = 0.0;
    double expected_P_b = 0.0, expected_P_a = 0.0;
    std::optional<int> v2_b_minute, v2_a_minute;
    double v2_b = 0.0, v2_a = 0.0;
    bool clipped = false;  // per-minute probability reached the cap
    int redraws = 0;
};

struct SyntheticPanel {
    NormalizedVolatility volatility;  // already in normalized units
    MinuteGrid grid;                  // prices (and trades) reproducing it
    std::vector<DayTruth> truth;
    int redraws = 0;
    int clipped_days = 0;
};

/// Per-minute exceedance probabilities for tau = 1..n from a power-law
/// cumulative target beta * tau^(1 - omega). Each minute receives the target
/// increment over its bin; mass that cannot fit under `cap` is carried into
/// the following minutes. `clipped` reports whether that happened.
std::vector<double> omori_minute_probabilities(double alpha, double omega, int n, bool* clipped = nullptr,
                                               double cap = 1.0);

struct GeneratedDay {
    std::vector<double> values;  // day_length * symbols, sample 0 NaN
    DayTruth truth;
};

/// One day from its own derived random stream (seed, day index).
GeneratedDay generate_omori_day(const GeneratorSpec& spec, int day_index);

/// All days plus a price grid that reproduces the values through
/// compute_volatility at step 1 (up to floating-point rounding).
SyntheticPanel generate_ensemble(const GeneratorSpec& spec, unsigned threads = 1);

/// Uniform independent permutation of every symbol-day's defined samples.
VolatilityPanel shuffle_intraday(const VolatilityPanel& panel, std::uint64_t seed);
NormalizedVolatility shuffle_intraday(const NormalizedVolatility& nv, std::uint64_t seed);

/// ISO dates of consecutive weekdays starting at `start`.
std::vector<std::string> weekday_calendar(const std::string& start, int count);

}  // namespace volcascade
