#include <doctest.h>

#include <cmath>
#include <vector>

#include "volcascade/error.hpp"
#include "volcascade/pdf.hpp"
#include "volcascade/random.hpp"
#include "volcascade/stats.hpp"

using namespace volcascade;

namespace {

double integral(const Pdf& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.bins(); ++i) s += p.density[i] * (p.edges[i + 1] - p.edges[i]);
    return s;
}

}  // namespace

TEST_CASE("log bins") {
    const auto e = LogBins{1e-3, 1e2, 20}.edges();
    REQUIRE(e.size() == 101);
    CHECK(e.front() == doctest::Approx(1e-3));
    CHECK(e.back() == doctest::Approx(1e2));
    CHECK(e[20] == doctest::Approx(1e-2));
}

TEST_CASE("a single repeated value fills one bin") {
    std::vector<double> xs(150, 0.37);
    const auto p = empirical_pdf(xs, LogBins{});
    std::size_t filled = 0;
    for (std::size_t i = 0; i < p.bins(); ++i)
        if (p.counts[i]) {
            ++filled;
            CHECK(p.counts[i] == 150);
            CHECK(p.edges[i] <= 0.37);
            CHECK(p.edges[i + 1] > 0.37);
        }
    CHECK(filled == 1);
    CHECK(integral(p) == doctest::Approx(1.0));
}

TEST_CASE("pdf integrates to one and sorts out-of-range values") {
    Rng rng(10);
    std::vector<double> xs;
    for (int i = 0; i < 5000; ++i) xs.push_back(std::exp(2.0 * rng.normal()));
    xs.push_back(0.0);
    xs.push_back(-1.0);
    xs.push_back(1e-6);
    xs.push_back(1e6);
    const auto p = empirical_pdf(xs, LogBins{});
    CHECK(integral(p) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.non_positive == 2);
    CHECK(p.below_range >= 1);
    CHECK(p.above_range >= 1);
    std::size_t in_range = 0;
    for (auto c : p.counts) in_range += c;
    CHECK(in_range + p.non_positive + p.below_range + p.above_range == xs.size());
}

TEST_CASE("Pareto tail slope on log bins") {
    Rng rng(3);
    std::vector<double> xs;
    for (int i = 0; i < 200000; ++i) xs.push_back(0.01 * std::pow(rng.uniform_open0(), -1.0 / 3.0));
    const auto p = empirical_pdf(xs, LogBins{1e-3, 1e2, 10});
    const auto hill = hill_tail_exponent(xs, 0.01);
    REQUIRE(hill);
    // Density slope is -(eta + 1) over well-populated bins.
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < p.bins(); ++i)
        if (p.counts[i] >= 50 && p.edges[i] >= 0.01) {
            lx.push_back(std::log10(p.center(i)));
            ly.push_back(std::log10(p.density[i]));
        }
    const auto f = ols(lx, ly);
    REQUIRE(f);
    CHECK(std::fabs(f->slope + 4.0) < 0.3);
    CHECK(std::fabs(f->slope + (*hill + 1.0)) < 0.3);
}

TEST_CASE("pdf needs enough samples") {
    std::vector<double> xs(99, 1.0);
    CHECK_THROWS_AS(empirical_pdf(xs, LogBins{}), InputError);
    xs.push_back(1.0);
    CHECK_NOTHROW(empirical_pdf(xs, LogBins{}));
}
