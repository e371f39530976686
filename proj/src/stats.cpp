#include "snapdefect/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "snapdefect/numeric.hpp"

namespace snapdefect {

BinnedEstimate binning_analysis(std::span<const double> series, int min_bins) {
    BinnedEstimate out;
    if (series.empty()) return out;
    out.mean = mean_of(series);
    std::vector<double> level(series.begin(), series.end());
    double naive = 0.0;
    bool first = true;
    while (level.size() >= static_cast<std::size_t>(std::max(min_bins, 2))) {
        const double err = std::sqrt(sample_variance(level) / static_cast<double>(level.size()));
        if (first) {
            naive = err;
            first = false;
        }
        out.error = std::max(out.error, err);
        std::vector<double> next(level.size() / 2);
        for (std::size_t k = 0; k < next.size(); ++k) next[k] = 0.5 * (level[2 * k] + level[2 * k + 1]);
        level.swap(next);
    }
    if (naive > 0.0) out.tau_int = 0.5 * ((out.error * out.error) / (naive * naive) - 1.0);
    return out;
}

double integrated_autocorrelation_time(std::span<const double> series, double c) {
    const std::size_t n = series.size();
    if (n < 4) return 0.5;
    const double m = mean_of(series);
    double c0 = 0.0;
    for (const double v : series) c0 += (v - m) * (v - m);
    c0 /= static_cast<double>(n);
    if (c0 <= 0.0) return 0.5;
    double tau = 0.5;
    for (std::size_t t = 1; t < n / 2; ++t) {
        double ct = 0.0;
        for (std::size_t i = 0; i + t < n; ++i) ct += (series[i] - m) * (series[i + t] - m);
        ct /= static_cast<double>(n - t);
        tau += ct / c0;
        if (static_cast<double>(t) >= c * tau) break;
    }
    return std::max(tau, 0.5);
}

} // namespace snapdefect
