#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <vector>

#include "helpers.hpp"
#include "volcascade/detector.hpp"
#include "volcascade/error.hpp"
#include "volcascade/laws.hpp"
#include "volcascade/random.hpp"
#include "volcascade/stats.hpp"
#include "volcascade/synth.hpp"

using namespace volcascade;

namespace {

VolatilityPanel smooth_panel(int days, int symbols, int K) {
    std::vector<std::vector<std::vector<double>>> v(days, std::vector<std::vector<double>>(symbols, std::vector<double>(K)));
    for (int d = 0; d < days; ++d)
        for (int j = 0; j < symbols; ++j)
            for (int k = 0; k < K; ++k) v[d][j][k] = 1.0 + 3.0 * std::sin(0.05 * k + d + j) * std::sin(0.05 * k + d + j);
    return testing::make_panel(v);
}

double lag1_autocorrelation(const VolatilityPanel& p, std::size_t d, std::size_t j) {
    std::vector<double> a, b;
    for (int k = 2; k < p.samples[d]; ++k) {
        a.push_back(p.at(d, k - 1, j));
        b.push_back(p.at(d, k, j));
    }
    return *pearson(a, b);
}

GeneratorSpec small_spec() {
    GeneratorSpec s;
    s.days = 60;
    s.symbols = 40;
    s.seed = 5;
    return s;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("intraday shuffle preserves each symbol-day multiset") {
    const auto p = smooth_panel(3, 4, 120);
    const auto s = shuffle_intraday(p, 9);
    for (std::size_t d = 0; d < 3; ++d)
        for (std::size_t j = 0; j < 4; ++j) {
            std::vector<double> a, b;
            for (int k = 1; k < 120; ++k) {
                a.push_back(p.at(d, k, j));
                b.push_back(s.at(d, k, j));
            }
            CHECK(a != b);
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            CHECK(a == b);
            CHECK(std::isnan(s.at(d, 0, j)));
        }
}

TEST_CASE("intraday shuffle destroys serial correlation") {
    const auto p = smooth_panel(2, 3, 300);
    const auto s = shuffle_intraday(p, 4);
    for (std::size_t d = 0; d < 2; ++d)
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(lag1_autocorrelation(p, d, j) > 0.9);
            CHECK(std::fabs(lag1_autocorrelation(s, d, j)) < 4.0 / std::sqrt(300.0));
        }
}

TEST_CASE("intraday shuffle is seeded") {
    const auto p = smooth_panel(2, 3, 50);
    CHECK(same_bits(shuffle_intraday(p, 1).values[1], shuffle_intraday(p, 1).values[1]));
    CHECK_FALSE(same_bits(shuffle_intraday(p, 1).values[1], shuffle_intraday(p, 2).values[1]));
}

TEST_CASE("shuffling commutes with the exceedance indicator") {
    const auto p = smooth_panel(2, 5, 80);
    auto ind = p;
    for (auto& day : ind.values)
        for (auto& x : day)
            if (!std::isnan(x)) x = x >= 3.0 ? 1.0 : 0.0;
    const auto a = exceedance_panel(shuffle_intraday(p, 17), 3.0);
    const auto b = shuffle_intraday(ind, 17);
    for (std::size_t d = 0; d < 2; ++d)
        for (int k = 1; k < 80; ++k)
            for (std::size_t j = 0; j < 5; ++j)
                CHECK(static_cast<double>(a.indicator[d][static_cast<std::size_t>(k) * 5 + j]) == b.at(d, k, j));
}

TEST_CASE("minute probabilities follow the cumulative target") {
    for (double omega : {-0.3, 0.0, 0.32, 0.7}) {
        const double alpha = 0.2;
        const auto p = omori_minute_probabilities(alpha, omega, 90);
        const double beta = alpha / (1.0 - omega);
        const auto cum = testing::cumulative(p);
        for (int t = 1; t <= 90; ++t)
            CHECK(cum[t - 1] == doctest::Approx(beta * std::pow(t, 1.0 - omega)).epsilon(1e-12));
    }
    bool clipped = false;
    const auto capped = omori_minute_probabilities(0.81, 0.32, 90, &clipped, 0.8);
    CHECK(clipped);
    for (double x : capped) CHECK(x <= 0.8);
    const double total = testing::cumulative(capped).back();
    CHECK(total == doctest::Approx(0.81 / 0.68 * std::pow(90.0, 0.68)).epsilon(1e-12));
    for (double x : omori_minute_probabilities(0.0, 0.3, 10)) CHECK(x == 0.0);
}

TEST_CASE("event counts match the injected probabilities") {
    auto s = small_spec();
    s.days = 40;
    s.max_probability = 0.8;
    const auto panel = generate_ensemble(s, 2);
    const auto ex = exceedance_panel(panel.volatility, s.q);
    double observed = 0.0, expected = 0.0, var = 0.0;
    for (std::size_t d = 0; d < panel.truth.size(); ++d) {
        const auto& t = panel.truth[d];
        REQUIRE(t.has_shock);
        const auto pa = omori_minute_probabilities(t.alpha_a, t.omega_a, s.day_length - 1 - t.t_c, nullptr, 0.8);
        const auto pb = omori_minute_probabilities(t.alpha_b, t.omega_b, t.t_c, nullptr, 0.8);
        for (int k = 1; k <= s.horizon; ++k) {
            for (const double q : {std::min(1.0, s.background + pa[k - 1]), std::min(1.0, s.background + pb[k - 1])}) {
                expected += q * s.symbols;
                var += q * (1.0 - q) * s.symbols;
            }
            observed += s.symbols * (ex.n_rate[d][static_cast<std::size_t>(t.t_c + k)] +
                                     ex.n_rate[d][static_cast<std::size_t>(t.t_c - k)]);
        }
    }
    CHECK(std::fabs(observed - expected) < 3.0 * std::sqrt(var));
}

TEST_CASE("no triggering leaves days without accepted shocks") {
    auto s = small_spec();
    s.alpha_a = s.alpha_b = 0.0;
    const auto panel = generate_ensemble(s, 2);
    for (const auto& t : panel.truth) CHECK_FALSE(t.has_shock);
    const auto det = detect_shocks(exceedance_panel(panel.volatility, 3.0), DetectorParams{}, 2);
    int accepted = 0;
    for (const auto& sh : det.shocks) accepted += sh.accepted;
    CHECK(accepted <= 0.05 * s.days);
}

TEST_CASE("flat response recovers omega = 0") {
    auto s = small_spec();
    s.omega_a = s.omega_b = 0.0;
    s.alpha_a = s.alpha_b = 0.3;
    s.symbols = 80;
    const auto panel = generate_ensemble(s, 2);
    const auto ex = exceedance_panel(panel.volatility, 3.0);
    std::vector<double> om;
    for (std::size_t d = 0; d < panel.truth.size(); ++d) {
        const auto c = displaced_curves_at(zero_filled(ex.n_rate[d]), 1, panel.truth[d].t_c, s.horizon);
        if (const auto f = fit_omori(c.after)) om.push_back(f->omega);
        if (const auto f = fit_omori(c.before)) om.push_back(f->omega);
    }
    REQUIRE(om.size() > 100);
    CHECK(std::fabs(mean(om)) < 0.05);
}

TEST_CASE("injected productivity exponent is recovered") {
    for (double pi : {0.0, 0.48}) {
        auto s = small_spec();
        s.days = 120;
        s.max_probability = 0.8;
        s.magnitude_law = MagnitudeLaw::log_uniform;
        s.v_min = 3.0;
        s.v_max = 300.0;
        s.laws.pi_a = pi;
        s.laws.productivity_scale = 2.0;
        const auto panel = generate_ensemble(s, 4);
        const auto ex = exceedance_panel(panel.volatility, 3.0);
        std::vector<MagnitudeProductivity> rows;
        for (std::size_t d = 0; d < panel.truth.size(); ++d) {
            const auto& t = panel.truth[d];
            const auto c = displaced_curves_at(zero_filled(ex.n_rate[d]), 1, t.t_c, s.horizon);
            rows.push_back({*magnitude(ex.v_market[d], static_cast<std::size_t>(t.t_c)), productivity(c.after)});
            CHECK(t.expected_P_a == doctest::Approx(2.0 * std::pow(t.v1, pi)));
        }
        const auto f = fit_productivity(rows);
        REQUIRE(f);
        CHECK(std::fabs(f->pi - pi) < 0.06);
    }
}

TEST_CASE("infeasible productivity targets are redrawn") {
    auto s = small_spec();
    s.days = 30;
    s.magnitude_law = MagnitudeLaw::log_uniform;
    s.v_min = 3.0;
    s.v_max = 300.0;
    s.laws.pi_a = 1.0;
    s.laws.productivity_scale = 0.5;
    const auto panel = generate_ensemble(s, 2);
    CHECK(panel.redraws > 0);
    int sum = 0;
    for (const auto& t : panel.truth) {
        CHECK(t.expected_P_a <= s.horizon);
        CHECK(t.expected_P_a > s.background * s.horizon);
        sum += t.redraws;
    }
    CHECK(sum == panel.redraws);
}

TEST_CASE("noise-free Bath ratio is reproduced exactly") {
    auto s = small_spec();
    s.max_probability = 0.8;
    s.laws.c_b_a = 0.9;
    const auto panel = generate_ensemble(s, 2);
    const auto ex = exceedance_panel(panel.volatility, 3.0);
    std::vector<double> v1, v2;
    for (std::size_t d = 0; d < panel.truth.size(); ++d) {
        const auto& t = panel.truth[d];
        REQUIRE(t.v2_a_minute);
        const auto e = bath_extremes(zero_filled(ex.v_market[d]), static_cast<std::size_t>(t.t_c), s.horizon);
        CHECK(e.v2_after / e.v1 == doctest::Approx(0.9).epsilon(1e-9));
        CHECK(e.v1 == doctest::Approx(t.v1).epsilon(1e-12));
        v1.push_back(e.v1);
        v2.push_back(e.v2_after);
    }
    CHECK(fit_bath_proportional(v1, v2)->c_b == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("generation is bit-identical across thread counts") {
    auto s = small_spec();
    s.days = 12;
    const auto a = generate_ensemble(s, 1);
    const auto b = generate_ensemble(s, 5);
    for (std::size_t d = 0; d < a.grid.days.size(); ++d) {
        CHECK(same_bits(a.volatility.v.values[d], b.volatility.v.values[d]));
        CHECK(same_bits(a.grid.price[d], b.grid.price[d]));
        CHECK(same_bits((*a.grid.trades)[d], (*b.grid.trades)[d]));
    }
}

TEST_CASE("main shock magnitudes follow the Pareto tail") {
    GeneratorSpec s;
    s.days = 1000;
    s.symbols = 2;
    s.day_length = 40;
    s.horizon = 10;
    s.tc_lo = 10;
    s.tc_hi = 20;
    s.v_max = 1e6;
    s.trades_min = 0.0;
    const auto panel = generate_ensemble(s, 4);
    std::vector<double> v1;
    for (const auto& t : panel.truth) v1.push_back(t.v1);
    const auto eta = hill_tail_exponent(v1, s.v_min);
    REQUIRE(eta);
    CHECK(std::fabs(*eta - 3.0) < 0.3);
}

TEST_CASE("the price grid reproduces the normalized panel") {
    auto s = small_spec();
    s.days = 4;
    const auto panel = generate_ensemble(s, 1);
    CHECK_NOTHROW(panel.grid.validate());
    const auto raw = compute_volatility(panel.grid, 1);
    for (std::size_t d = 0; d < 4; ++d)
        for (int k = 1; k < s.day_length; ++k)
            for (std::size_t j = 0; j < static_cast<std::size_t>(s.symbols); ++j)
                CHECK(raw.at(d, k, j) / s.price_scale ==
                      doctest::Approx(panel.volatility.v.at(d, k, j)).epsilon(1e-7));
}

TEST_CASE("weekday calendar") {
    const auto c = weekday_calendar("2001-01-04", 4);
    CHECK(c == std::vector<std::string>{"2001-01-04", "2001-01-05", "2001-01-08", "2001-01-09"});
    CHECK_THROWS_AS(weekday_calendar("2001-02-30", 1), InputError);
}

TEST_CASE("generator spec validation") {
    GeneratorSpec s;
    CHECK_NOTHROW(s.validate());
    auto bad = s;
    bad.tc_lo = 10;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = s;
    bad.max_probability = 0.0;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = s;
    bad.laws.c_b_a = 1.5;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = s;
    bad.omega_a = 1.0;
    CHECK_THROWS_AS(bad.validate(), InputError);
}
