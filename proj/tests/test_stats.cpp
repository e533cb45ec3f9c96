#include <doctest.h>

#include <cmath>
#include <vector>

#include "volcascade/random.hpp"
#include "volcascade/stats.hpp"

using namespace volcascade;

TEST_CASE("ols recovers an exact line") {
    std::vector<double> x{1, 2, 3, 4, 5}, y;
    for (double v : x) y.push_back(2.5 - 0.75 * v);
    const auto f = ols(x, y);
    REQUIRE(f);
    CHECK(f->slope == doctest::Approx(-0.75).epsilon(1e-14));
    CHECK(f->intercept == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(f->r == doctest::Approx(-1.0));
    CHECK(f->slope_stderr == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(f->n == 5);
}

TEST_CASE("ols rejects degenerate input") {
    std::vector<double> x{2, 2, 2}, y{1, 2, 3};
    CHECK_FALSE(ols(x, y));
    std::vector<double> one{1};
    CHECK_FALSE(ols(one, one));
}

TEST_CASE("ols slope standard error matches the textbook formula") {
    std::vector<double> x{1, 2, 3, 4, 5, 6}, y{1.1, 1.9, 3.2, 3.9, 5.1, 5.8};
    const auto f = ols(x, y);
    REQUIRE(f);
    double mx = 3.5, sxx = 0, sse = 0;
    for (double v : x) sxx += (v - mx) * (v - mx);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - f->intercept - f->slope * x[i];
        sse += e * e;
    }
    CHECK(f->slope_stderr == doctest::Approx(std::sqrt(sse / 4.0 / sxx)));
}

TEST_CASE("population standard deviation and mean") {
    std::vector<double> xs{2, 4, 4, 4, 5, 5, 7, 9};
    CHECK(mean(xs) == doctest::Approx(5.0));
    CHECK(stddev(xs) == doctest::Approx(2.0));
}

TEST_CASE("pearson correlation") {
    std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{4, 3, 2, 1}, flat{1, 1, 1, 1};
    CHECK(*pearson(a, b) == doctest::Approx(1.0));
    CHECK(*pearson(a, c) == doctest::Approx(-1.0));
    CHECK_FALSE(pearson(a, flat));
}

TEST_CASE("hill estimator on a Pareto sample") {
    Rng rng(5);
    std::vector<double> xs;
    for (int i = 0; i < 20000; ++i) xs.push_back(std::pow(rng.uniform_open0(), -1.0 / 3.0));
    const auto eta = hill_tail_exponent(xs, 1.0);
    REQUIRE(eta);
    CHECK(*eta == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("equal count partition") {
    const auto p = equal_count_partition(10, 3);
    REQUIRE(p.size() == 4);
    CHECK(p.front() == 0);
    CHECK(p.back() == 10);
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        const auto size = p[i + 1] - p[i];
        CHECK((size == 3 || size == 4));
    }
}

TEST_CASE("derived random streams are reproducible and distinct") {
    Rng a(derive_seed(1, 2, 3)), b(derive_seed(1, 2, 3)), c(derive_seed(1, 2, 4));
    const auto x = a.next();
    CHECK(x == b.next());
    CHECK(x != c.next());
    Rng r(11);
    for (int i = 0; i < 1000; ++i) {
        const auto k = r.below(7);
        CHECK(k < 7);
        const double u = r.uniform_open0();
        CHECK((u > 0.0 && u <= 1.0));
    }
}
