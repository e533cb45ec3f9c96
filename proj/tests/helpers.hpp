#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "volcascade/series.hpp"
#include "volcascade/synth.hpp"

namespace testing {

using namespace volcascade;

// Grid with every symbol present every day; price(d, m, j) supplies values.
template <typename F>
MinuteGrid make_grid(int days, int symbols, F price, int minutes = kRegularDayMinutes) {
    MinuteGrid g;
    for (int j = 0; j < symbols; ++j) g.symbols.push_back("S" + std::to_string(100 + j));
    const auto dates = weekday_calendar("2002-01-02", days);
    for (int d = 0; d < days; ++d) {
        g.days.push_back({dates[static_cast<std::size_t>(d)], minutes, minutes < kRegularDayMinutes});
        std::vector<double> p(static_cast<std::size_t>(minutes) * symbols);
        for (int m = 0; m < minutes; ++m)
            for (int j = 0; j < symbols; ++j) p[static_cast<std::size_t>(m) * symbols + j] = price(d, m, j);
        g.price.push_back(std::move(p));
        g.present.emplace_back(static_cast<std::size_t>(symbols), 1);
    }
    return g;
}

// Volatility panel from explicit per-day sample vectors (sample 0 is forced NaN).
inline VolatilityPanel make_panel(const std::vector<std::vector<std::vector<double>>>& per_day_per_symbol,
                                  int step = 1) {
    VolatilityPanel v;
    v.step = step;
    const std::size_t S = per_day_per_symbol.front().size();
    for (std::size_t j = 0; j < S; ++j) v.symbols.push_back("S" + std::to_string(100 + j));
    const auto dates = weekday_calendar("2002-01-02", static_cast<int>(per_day_per_symbol.size()));
    for (std::size_t d = 0; d < per_day_per_symbol.size(); ++d) {
        const auto K = per_day_per_symbol[d][0].size();
        v.days.push_back({dates[d], static_cast<int>(K) * step, false});
        v.samples.push_back(static_cast<int>(K));
        std::vector<double> vals(K * S);
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t j = 0; j < S; ++j) vals[k * S + j] = k == 0 ? kNaN : per_day_per_symbol[d][j][k];
        v.values.push_back(std::move(vals));
        v.present.emplace_back(S, 1);
    }
    return v;
}

inline std::vector<double> cumulative(const std::vector<double>& xs) {
    std::vector<double> out;
    double s = 0.0;
    for (double x : xs) out.push_back(s += x);
    return out;
}

}  // namespace testing
