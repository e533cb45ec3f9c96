#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "helpers.hpp"
#include "volcascade/error.hpp"
#include "volcascade/random.hpp"
#include "volcascade/series.hpp"

using namespace volcascade;
using testing::make_grid;
using testing::make_panel;

TEST_CASE("constant price gives zero volatility") {
    const auto g = make_grid(2, 1, [](int, int, int) { return 100.0; });
    const auto v = compute_volatility(g, 1);
    CHECK(std::isnan(v.at(0, 0, 0)));
    for (int k = 1; k < 390; ++k) CHECK(v.at(0, k, 0) == 0.0);
}

TEST_CASE("one-minute log return") {
    const auto g = make_grid(1, 1, [](int, int m, int) { return m == 0 ? 100.0 : 101.0; });
    const auto v = compute_volatility(g, 1);
    CHECK(v.at(0, 1, 0) == doctest::Approx(0.00995033).epsilon(1e-6));
    CHECK(v.at(0, 2, 0) == 0.0);
}

TEST_CASE("price path 100, 90, 99") {
    const double path[] = {100.0, 90.0, 99.0};
    const auto g = make_grid(1, 1, [&](int, int m, int) { return m < 3 ? path[m] : 99.0; });
    const auto v = compute_volatility(g, 1);
    CHECK(v.at(0, 1, 0) == doctest::Approx(0.10536052));
    CHECK(v.at(0, 2, 0) == doctest::Approx(0.09531018));
}

TEST_CASE("decimated sampling at 5 minutes") {
    const auto g = make_grid(1, 1, [](int, int m, int) { return 100.0 * std::exp(0.001 * m * m); });
    const auto v = compute_volatility(g, 5);
    CHECK(v.step == 5);
    CHECK(v.samples[0] == 78);
    CHECK(std::isnan(v.at(0, 0, 0)));
    for (int k = 1; k < 78; ++k) {
        const double expect = std::fabs(0.001 * (25.0 * k * k - 25.0 * (k - 1) * (k - 1)));
        CHECK(v.at(0, k, 0) == doctest::Approx(expect));
    }
    CHECK_THROWS_AS(compute_volatility(g, 7), InputError);
}

TEST_CASE("invalid grids are rejected with symbol and day") {
    auto g = make_grid(1, 2, [](int, int m, int j) { return (m == 17 && j == 1) ? 0.0 : 100.0; });
    try {
        g.validate();
        FAIL("expected rejection");
    } catch (const InputError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("S101") != std::string::npos);
        CHECK(msg.find(g.days[0].date) != std::string::npos);
    }
    auto missing = make_grid(1, 1, [](int, int, int) { return 100.0; });
    missing.price[0][40] = kNaN;
    CHECK_THROWS_AS(missing.validate(), InputError);
    CHECK_THROWS_AS(compute_volatility(missing, 1), InputError);
}

TEST_CASE("price scaling leaves volatility unchanged") {
    Rng rng(3);
    std::vector<double> steps(390 * 3);
    for (auto& s : steps) s = 0.01 * rng.normal();
    auto path = [&](int d, int m, int j) {
        double lp = 0.0;
        for (int i = 0; i <= m; ++i) lp += steps[static_cast<std::size_t>(i) + 390u * static_cast<unsigned>(d)];
        return (j == 0 ? 1.0 : 37.0) * 50.0 * std::exp(lp);
    };
    const auto g = make_grid(2, 2, path);
    const auto v = compute_volatility(g, 1);
    for (int k = 1; k < 390; ++k) CHECK(v.at(1, k, 0) == doctest::Approx(v.at(1, k, 1)).epsilon(1e-9));
}

TEST_CASE("exact intraday pattern is removed") {
    // Shape (2, 1, 1, 2) repeated on every day.
    std::vector<std::vector<std::vector<double>>> days(3, {{kNaN, 2.0, 1.0, 1.0, 2.0}});
    const auto nv = normalize_and_detrend(make_panel(days));
    const double first = nv.v.at(0, 1, 0);
    for (std::size_t d = 0; d < 3; ++d)
        for (int k = 1; k < 5; ++k) CHECK(nv.v.at(d, k, 0) == doctest::Approx(first).epsilon(1e-12));
    CHECK(nv.pattern[1] / nv.pattern[2] == doctest::Approx(2.0));
    CHECK(nv.pattern[4] / nv.pattern[3] == doctest::Approx(2.0));
}

TEST_CASE("detrended per-minute cross mean is one and the pattern matches a direct recomputation") {
    Rng rng(17);
    const int D = 6, S = 5, K = 40;
    std::vector<std::vector<std::vector<double>>> days(D, std::vector<std::vector<double>>(S, std::vector<double>(K)));
    for (auto& day : days)
        for (auto& sym : day)
            for (auto& x : sym) x = std::fabs(rng.normal());
    const auto raw = make_panel(days);
    const auto nv = normalize_and_detrend(raw);

    // Independent oracle: population sigma per symbol, then minute means.
    std::vector<double> sigma(S);
    for (int j = 0; j < S; ++j) {
        double s = 0, ss = 0;
        int n = 0;
        for (int d = 0; d < D; ++d)
            for (int k = 1; k < K; ++k) {
                s += days[d][j][k];
                ++n;
            }
        const double m = s / n;
        for (int d = 0; d < D; ++d)
            for (int k = 1; k < K; ++k) ss += (days[d][j][k] - m) * (days[d][j][k] - m);
        sigma[j] = std::sqrt(ss / n);
        CHECK(nv.sigma_full[static_cast<std::size_t>(j)] == doctest::Approx(sigma[j]).epsilon(1e-12));
    }
    for (int k = 1; k < K; ++k) {
        double a = 0, cross = 0;
        for (int d = 0; d < D; ++d)
            for (int j = 0; j < S; ++j) {
                a += days[d][j][k] / sigma[j];
                cross += nv.v.at(static_cast<std::size_t>(d), k, static_cast<std::size_t>(j));
            }
        CHECK(nv.pattern[static_cast<std::size_t>(k)] == doctest::Approx(a / (D * S)).epsilon(1e-12));
        CHECK(std::fabs(cross / (D * S) - 1.0) <= 1e-9);
    }
}

TEST_CASE("iid volatility has a flat pattern up to sampling noise") {
    Rng rng(23);
    const int D = 40, S = 20, K = 60;
    std::vector<std::vector<std::vector<double>>> days(D, std::vector<std::vector<double>>(S, std::vector<double>(K)));
    for (auto& day : days)
        for (auto& sym : day)
            for (auto& x : sym) x = std::fabs(rng.normal());
    const auto nv = normalize_and_detrend(make_panel(days));
    // |N(0,1)| has mean/std = sqrt(2/pi)/sqrt(1-2/pi); per-minute mean of 800 draws.
    const double mean_over_sd = std::sqrt(2.0 / std::numbers::pi) / std::sqrt(1.0 - 2.0 / std::numbers::pi);
    const double se = 1.0 / std::sqrt(static_cast<double>(D * S));
    for (int k = 1; k < K; ++k)
        CHECK(std::fabs(nv.pattern[static_cast<std::size_t>(k)] / mean_over_sd - 1.0) < 4.5 * se / mean_over_sd);
}

TEST_CASE("zero-variance symbols are dropped and half-days never shape the pattern") {
    std::vector<std::vector<std::vector<double>>> days = {
        {{kNaN, 1.0, 2.0, 3.0}, {kNaN, 5.0, 5.0, 5.0}},
        {{kNaN, 2.0, 1.0, 3.0}, {kNaN, 5.0, 5.0, 5.0}},
        {{kNaN, 1.0, 1.0, 100.0}, {kNaN, 5.0, 5.0, 5.0}},
    };
    auto raw = make_panel(days);
    const auto with_half = [&] {
        auto r = raw;
        r.days[2].half_day = true;
        return normalize_and_detrend(r);
    }();
    REQUIRE(with_half.dropped_symbols.size() == 1);
    CHECK(with_half.dropped_symbols[0] == "S101");
    CHECK(with_half.v.symbols.size() == 1);
    // Pattern from the two full days only.
    const double s = with_half.sigma_full[0];
    CHECK(with_half.pattern[3] == doctest::Approx((3.0 / s + 3.0 / s) / 2.0));
}

TEST_CASE("a degenerate all-zero panel aborts") {
    std::vector<std::vector<std::vector<double>>> days(3, {{kNaN, 0.0, 0.0}});
    CHECK_THROWS_AS(normalize_and_detrend(make_panel(days)), InputError);
}

TEST_CASE("exceedance boundary uses >=") {
    std::vector<std::vector<std::vector<double>>> days = {{{kNaN, 2.9, 3.0, 3.1}}};
    const auto ex = exceedance_panel(make_panel(days), 3.0);
    CHECK(ex.indicator[0][1] == 0);
    CHECK(ex.indicator[0][2] == 1);
    CHECK(ex.indicator[0][3] == 1);
    // Single symbol: n equals the indicator and V the series.
    CHECK(ex.n_rate[0][2] == 1.0);
    CHECK(ex.v_market[0][3] == 3.1);
}

TEST_CASE("market fraction of four symbols") {
    std::vector<std::vector<std::vector<double>>> days = {{{kNaN, 4.0}, {kNaN, 1.0}, {kNaN, 0.5}, {kNaN, 3.5}}};
    const auto ex = exceedance_panel(make_panel(days), 3.0);
    CHECK(ex.n_rate[0][1] == 0.5);
    CHECK(ex.v_market[0][1] == doctest::Approx(9.0 / 4.0));
}

TEST_CASE("missing symbol-days shrink the effective symbol count") {
    std::vector<std::vector<std::vector<double>>> days = {{{kNaN, 4.0}, {kNaN, 1.0}, {kNaN, 0.5}, {kNaN, 3.5}}};
    auto panel = make_panel(days);
    panel.present[0][3] = 0;
    panel.values[0][1 * 4 + 3] = kNaN;
    const auto ex = exceedance_panel(panel, 3.0);
    CHECK(ex.effective_symbols[0] == 3);
    CHECK(ex.n_rate[0][1] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("symbol order does not change market aggregates") {
    auto price = [&](int, int m, int j) { return 100.0 + j + 0.5 * std::sin(0.1 * m * (j + 1)); };
    auto a = make_grid(3, 4, price);
    auto b = a;
    std::swap(b.symbols[0], b.symbols[3]);
    for (std::size_t d = 0; d < b.days.size(); ++d)
        for (int m = 0; m < 390; ++m) std::swap(b.price[d][m * 4u + 0], b.price[d][m * 4u + 3]);
    b.canonicalize();
    const auto ea = exceedance_panel(compute_volatility(a, 1), 0.004);
    const auto eb = exceedance_panel(compute_volatility(b, 1), 0.004);
    for (std::size_t d = 0; d < 3; ++d)
        for (int k = 1; k < 390; ++k) {
            CHECK(ea.n_rate[d][k] == eb.n_rate[d][k]);
            CHECK(ea.v_market[d][k] == eb.v_market[d][k]);
        }
}

TEST_CASE("iid synthetic panel: mean n matches the empirical tail mass") {
    GeneratorSpec s;
    s.days = 30;
    s.symbols = 40;
    s.alpha_a = s.alpha_b = 0.0;
    s.background = 0.02;
    const auto panel = generate_ensemble(s, 2);
    const auto ex = exceedance_panel(panel.volatility, 3.0);
    double n_sum = 0.0, count = 0.0, above = 0.0, samples = 0.0;
    for (std::size_t d = 0; d < ex.days.size(); ++d)
        for (std::size_t k = 1; k < ex.n_rate[d].size(); ++k) {
            n_sum += ex.n_rate[d][k];
            count += 1.0;
            for (std::size_t j = 0; j < 40; ++j) {
                above += panel.volatility.v.values[d][k * 40 + j] >= 3.0 ? 1.0 : 0.0;
                samples += 1.0;
            }
        }
    const double tail = above / samples;
    CHECK(n_sum / count == doctest::Approx(tail).epsilon(1e-12));
    CHECK(std::fabs(tail - 0.02) < 3.0 * std::sqrt(0.02 * 0.98 / samples));
}

TEST_CASE("repeat computation is bit-identical") {
    auto g = make_grid(3, 3, [](int d, int m, int j) { return 10.0 + d + j + std::cos(0.3 * m * (j + 1)); });
    const auto a = exceedance_panel(normalize_and_detrend(compute_volatility(g, 1)), 2.0);
    const auto b = exceedance_panel(normalize_and_detrend(compute_volatility(g, 1)), 2.0);
    for (std::size_t d = 0; d < 3; ++d)
        for (std::size_t k = 1; k < a.n_rate[d].size(); ++k) CHECK(a.v_market[d][k] == b.v_market[d][k]);
}
