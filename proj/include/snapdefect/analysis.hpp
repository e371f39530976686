#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace snapdefect {

/// A measured value y +- sigma at abscissa x.
struct DataPoint {
    double x = 0.0;
    double y = 0.0;
    double sigma = 0.0;
};

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_err = 0.0;
    double intercept_err = 0.0;
    double chi2_per_dof = 0.0;
    std::vector<double> points_used;  // abscissae that entered the fit
    std::vector<double> dropped;      // abscissae removed by the window rule
};

void to_json(nlohmann::json& j, const FitResult& f);

/// Weighted least squares y = slope * x + intercept.
FitResult linear_fit(std::span<const DataPoint> points);

/// linear_fit over points sorted by x; while chi2/dof exceeds the threshold the
/// smallest-x point is dropped (at most `max_drops` times, never below 3 points).
/// When every sigma is exactly zero the fit is unweighted.
FitResult fit_defect_entropy(std::span<const DataPoint> points, double chi2_threshold = 2.0, int max_drops = 2);

/// (2 / pi^2) arctan^2(exp(2 delta)).
double theoretical_Dd(double delta);

/// M^2 (or any finite-size observable) versus the tuning parameter at one size.
struct SizeCurve {
    int L = 0;
    std::vector<DataPoint> points;  // x = tuning parameter, y = value
};

struct PairCrossing {
    int L1 = 0;
    int L2 = 0;
    double x = 0.0;
    double sigma = 0.0;
};

struct CrossingResult {
    double delta_c = 0.0;
    double sigma_spread = 0.0;     // weighted spread of pairwise crossings
    double sigma_bootstrap = 0.0;  // parametric bootstrap over the input errors
    int bootstrap_failures = 0;
    std::vector<PairCrossing> pairs;
};

void to_json(nlohmann::json& j, const CrossingResult& c);

/// Crossing of a single pair of curves (already scaled). Throws DataError
/// when the difference never changes sign inside the common range.
PairCrossing pair_crossing(const SizeCurve& a, const SizeCurve& b);

/// Locates where M^2 L^{2 D_fixed} curves of different sizes intersect.
CrossingResult crossing_point(std::span<const SizeCurve> curves, double D_fixed, int bootstrap = 200,
                              std::uint64_t seed = 1);

struct ScalingDimensionResult {
    double D = 0.0;
    double sigma = 0.0;
    double variance_at_min = 0.0;
    std::vector<double> scan_minima;
};

void to_json(nlohmann::json& j, const ScalingDimensionResult& r);

/// Relative across-size variance of M^2 L^{2D}: var / mean^2 of the scaled values.
double scaled_variance(std::span<const DataPoint> m2_by_size, double D);

/// Minimizes scaled_variance over D in [lo, hi]. Points carry x = L, y = M^2.
ScalingDimensionResult fit_scaling_dimension(std::span<const DataPoint> m2_by_size, double lo = 0.0,
                                             double hi = 1.0, int bootstrap = 200, std::uint64_t seed = 1);

struct CollapsePoint {
    int L = 0;
    double delta = 0.0;
    double x = 0.0;
    double y = 0.0;
    double sigma = 0.0;
};

struct CollapseResult {
    double delta_c = 0.0;
    double D_d = 0.0;
    double nu = 1.0;
    double quality = 0.0;
    std::vector<CollapsePoint> table;
};

void to_json(nlohmann::json& j, const CollapseResult& c);

/// x = (delta - delta_c) L^{1/nu}, y = M^2 L^{2 D_d}. The quality is the mean
/// squared residual of every point against the piecewise-linear curves of the
/// other sizes, over the points that fall inside another size's x range.
CollapseResult scaling_collapse(std::span<const SizeCurve> curves, double delta_c, double D_d, double nu = 1.0);

} // namespace snapdefect
