#include "volcascade/pdf.hpp"

#include <algorithm>
#include <cmath>

#include "volcascade/error.hpp"

namespace volcascade {

std::vector<double> LogBins::edges() const {
    if (!(lo > 0.0) || !(hi > lo) || per_decade <= 0) throw InputError("invalid log bin specification");
    const double decades = std::log10(hi / lo);
    const auto n = static_cast<int>(std::lround(decades * per_decade));
    std::vector<double> e(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) e[static_cast<std::size_t>(i)] = lo * std::pow(10.0, static_cast<double>(i) / per_decade);
    e.back() = hi;
    return e;
}

double Pdf::center(std::size_t i) const { return std::sqrt(edges[i] * edges[i + 1]); }

Pdf empirical_pdf(std::span<const double> values, const LogBins& bins) {
    if (values.size() < kMinPdfSamples)
        throw InputError("empirical pdf needs at least " + std::to_string(kMinPdfSamples) + " values");
    Pdf pdf;
    pdf.edges = bins.edges();
    const std::size_t nb = pdf.edges.size() - 1;
    pdf.counts.assign(nb, 0);
    pdf.density.assign(nb, 0.0);
    const double log_lo = std::log10(bins.lo);
    std::size_t in_range = 0;
    for (double v : values) {
        if (std::isnan(v)) continue;
        if (!(v > 0.0)) {
            ++pdf.non_positive;
            continue;
        }
        if (v < bins.lo) {
            ++pdf.below_range;
            continue;
        }
        if (v > bins.hi) {
            ++pdf.above_range;
            continue;
        }
        auto i = static_cast<std::size_t>(std::floor((std::log10(v) - log_lo) * bins.per_decade));
        i = std::min(i, nb - 1);
        // Guard against rounding at the edges.
        while (i > 0 && v < pdf.edges[i]) --i;
        while (i + 1 < nb && v >= pdf.edges[i + 1]) ++i;
        ++pdf.counts[i];
        ++in_range;
    }
    if (in_range == 0) return pdf;
    for (std::size_t i = 0; i < nb; ++i) {
        const double width = pdf.edges[i + 1] - pdf.edges[i];
        pdf.density[i] = static_cast<double>(pdf.counts[i]) / (static_cast<double>(in_range) * width);
    }
    return pdf;
}

}  // namespace volcascade
