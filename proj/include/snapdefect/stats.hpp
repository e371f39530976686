#pragma once

#include <span>

namespace snapdefect {

/// Mean and error of a correlated time series from logarithmic binning. The
/// error is the largest binned estimate among levels that still have at
/// least `min_bins` bins.
struct BinnedEstimate {
    double mean = 0.0;
    double error = 0.0;
    double tau_int = 0.0;  // (error^2 / naive error^2 - 1) / 2
};

BinnedEstimate binning_analysis(std::span<const double> series, int min_bins = 32);

/// Integrated autocorrelation time with Sokal's automatic window (window
/// grows until W >= c * tau). Returns 0.5 for an uncorrelated series.
double integrated_autocorrelation_time(std::span<const double> series, double c = 6.0);

} // namespace snapdefect
