#include "snapdefect/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "snapdefect/errors.hpp"
#include "snapdefect/numeric.hpp"
#include "snapdefect/rng.hpp"

namespace snapdefect {

void to_json(nlohmann::json& j, const FitResult& f) {
    j = nlohmann::json{{"slope", f.slope},
                       {"intercept", f.intercept},
                       {"slope_err", f.slope_err},
                       {"intercept_err", f.intercept_err},
                       {"chi2_per_dof", f.chi2_per_dof},
                       {"points_used", f.points_used},
                       {"dropped", f.dropped}};
}

void to_json(nlohmann::json& j, const CrossingResult& c) {
    auto pairs = nlohmann::json::array();
    for (const auto& p : c.pairs) pairs.push_back({{"L1", p.L1}, {"L2", p.L2}, {"x", p.x}, {"sigma", p.sigma}});
    j = nlohmann::json{{"delta_c", c.delta_c},
                       {"sigma_spread", c.sigma_spread},
                       {"sigma_bootstrap", c.sigma_bootstrap},
                       {"bootstrap_failures", c.bootstrap_failures},
                       {"pairs", pairs}};
}

void to_json(nlohmann::json& j, const ScalingDimensionResult& r) {
    j = nlohmann::json{
        {"D", r.D}, {"sigma", r.sigma}, {"variance_at_min", r.variance_at_min}, {"scan_minima", r.scan_minima}};
}

void to_json(nlohmann::json& j, const CollapseResult& c) {
    auto rows = nlohmann::json::array();
    for (const auto& p : c.table)
        rows.push_back({{"L", p.L}, {"delta", p.delta}, {"x", p.x}, {"y", p.y}, {"sigma", p.sigma}});
    j = nlohmann::json{{"delta_c", c.delta_c}, {"D_d", c.D_d}, {"nu", c.nu}, {"quality", c.quality}, {"table", rows}};
}

FitResult linear_fit(std::span<const DataPoint> points) {
    if (points.size() < 3) throw DataError("linear fit needs at least 3 points, got " + std::to_string(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!(points[i].sigma > 0.0)) throw DataError("linear fit: nonpositive sigma at x=" + std::to_string(points[i].x));
        for (std::size_t k = 0; k < i; ++k)
            if (points[k].x == points[i].x)
                throw DataError("linear fit: duplicate abscissa x=" + std::to_string(points[i].x));
    }
    double S = 0.0, Sx = 0.0;
    for (const auto& p : points) {
        const double w = 1.0 / (p.sigma * p.sigma);
        S += w;
        Sx += w * p.x;
    }
    const double xbar = Sx / S;
    double Stt = 0.0, Sty = 0.0, Sy = 0.0;
    for (const auto& p : points) {
        const double w = 1.0 / (p.sigma * p.sigma);
        const double t = p.x - xbar;
        Stt += w * t * t;
        Sty += w * t * p.y;
        Sy += w * p.y;
    }
    if (!(Stt > 0.0)) throw DataError("linear fit: degenerate abscissae");

    FitResult f;
    f.slope = Sty / Stt;
    const double ybar = Sy / S;
    f.intercept = ybar - f.slope * xbar;
    f.slope_err = std::sqrt(1.0 / Stt);
    f.intercept_err = std::sqrt(1.0 / S + xbar * xbar / Stt);
    double chi2 = 0.0;
    for (const auto& p : points) {
        const double r = (p.y - f.slope * p.x - f.intercept) / p.sigma;
        chi2 += r * r;
        f.points_used.push_back(p.x);
    }
    f.chi2_per_dof = chi2 / static_cast<double>(points.size() - 2);
    return f;
}

FitResult fit_defect_entropy(std::span<const DataPoint> points, double chi2_threshold, int max_drops) {
    std::vector<DataPoint> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](const DataPoint& a, const DataPoint& b) { return a.x < b.x; });
    // Noise-free inputs (every sigma exactly zero) get an unweighted fit.
    if (!pts.empty() && std::all_of(pts.begin(), pts.end(), [](const DataPoint& p) { return p.sigma == 0.0; }))
        for (auto& p : pts) p.sigma = 1.0;
    std::vector<double> dropped;
    FitResult f = linear_fit(pts);
    while (f.chi2_per_dof > chi2_threshold && static_cast<int>(dropped.size()) < max_drops && pts.size() > 3) {
        dropped.push_back(pts.front().x);
        pts.erase(pts.begin());
        f = linear_fit(pts);
    }
    f.dropped = dropped;
    return f;
}

double theoretical_Dd(double delta) {
    const double a = std::atan(std::exp(2.0 * delta));
    return 2.0 / (std::numbers::pi * std::numbers::pi) * a * a;
}

namespace {

/// Piecewise-linear interpolation of (x, y) and (x, sigma) on a sorted curve.
struct Interp {
    double y;
    double var;
};

Interp interpolate(const std::vector<DataPoint>& c, double x) {
    auto it = std::lower_bound(c.begin(), c.end(), x, [](const DataPoint& p, double v) { return p.x < v; });
    if (it == c.end()) it = std::prev(it);
    if (it->x == x || it == c.begin()) return {it->y, it->sigma * it->sigma};
    const auto& b = *it;
    const auto& a = *std::prev(it);
    const double t = (x - a.x) / (b.x - a.x);
    const double y = (1.0 - t) * a.y + t * b.y;
    const double var = (1.0 - t) * (1.0 - t) * a.sigma * a.sigma + t * t * b.sigma * b.sigma;
    return {y, var};
}

std::vector<DataPoint> sorted_points(const SizeCurve& c) {
    auto p = c.points;
    std::sort(p.begin(), p.end(), [](const DataPoint& a, const DataPoint& b) { return a.x < b.x; });
    return p;
}

std::string pair_name(int a, int b) { return "(L=" + std::to_string(a) + ", L=" + std::to_string(b) + ")"; }

} // namespace

PairCrossing pair_crossing(const SizeCurve& a_in, const SizeCurve& b_in) {
    // Order the pair canonically so that swapping the curves gives the same answer.
    const bool swap = a_in.L > b_in.L;
    const SizeCurve& a = swap ? b_in : a_in;
    const SizeCurve& b = swap ? a_in : b_in;
    const auto pa = sorted_points(a), pb = sorted_points(b);
    if (pa.size() < 3 || pb.size() < 3)
        throw DataError("crossing " + pair_name(a.L, b.L) + ": each curve needs at least 3 points");
    const double lo = std::max(pa.front().x, pb.front().x);
    const double hi = std::min(pa.back().x, pb.back().x);
    std::vector<double> grid;
    for (const auto& p : pa)
        if (p.x >= lo && p.x <= hi) grid.push_back(p.x);
    for (const auto& p : pb)
        if (p.x >= lo && p.x <= hi) grid.push_back(p.x);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    struct Node {
        double x, f, var;
    };
    std::vector<Node> nodes;
    for (const double x : grid) {
        const auto ia = interpolate(pa, x), ib = interpolate(pb, x);
        const double f = ia.y - ib.y;
        if (f != 0.0) nodes.push_back({x, f, ia.var + ib.var});
    }
    // Among sign changes of the difference, keep the one with the largest jump.
    bool found = false;
    PairCrossing best{a.L, b.L, 0.0, 0.0};
    double best_jump = -1.0;
    for (std::size_t k = 1; k < nodes.size(); ++k) {
        const auto& n0 = nodes[k - 1];
        const auto& n1 = nodes[k];
        if ((n0.f > 0.0) == (n1.f > 0.0)) continue;
        const double jump = std::abs(n1.f - n0.f);
        if (jump <= best_jump) continue;
        const double t = n0.f / (n0.f - n1.f);
        const double x = n0.x + t * (n1.x - n0.x);
        const double slope = (n1.f - n0.f) / (n1.x - n0.x);
        const double var = (1.0 - t) * n0.var + t * n1.var;
        best = {a.L, b.L, x, std::sqrt(var) / std::abs(slope)};
        best_jump = jump;
        found = true;
    }
    if (!found) throw DataError("no crossing in range for pair " + pair_name(a.L, b.L));
    return best;
}

namespace {

std::vector<SizeCurve> scaled_curves(std::span<const SizeCurve> curves, double D) {
    std::vector<SizeCurve> out(curves.begin(), curves.end());
    for (auto& c : out) {
        const double s = std::pow(static_cast<double>(c.L), 2.0 * D);
        for (auto& p : c.points) {
            p.y *= s;
            p.sigma *= s;
        }
    }
    return out;
}

double weighted_mean_of_pairs(const std::vector<PairCrossing>& pairs, double* spread) {
    double sw = 0.0, swx = 0.0;
    for (const auto& p : pairs) {
        const double w = p.sigma > 0.0 ? 1.0 / (p.sigma * p.sigma) : 1.0;
        sw += w;
        swx += w * p.x;
    }
    const double mean = swx / sw;
    if (spread) {
        if (pairs.size() == 1) {
            *spread = pairs.front().sigma;
        } else {
            double s = 0.0;
            for (const auto& p : pairs) {
                const double w = p.sigma > 0.0 ? 1.0 / (p.sigma * p.sigma) : 1.0;
                s += w * (p.x - mean) * (p.x - mean);
            }
            *spread = std::sqrt(s / sw);
        }
    }
    return mean;
}

std::vector<PairCrossing> all_pairs(const std::vector<SizeCurve>& c) {
    std::vector<PairCrossing> pairs;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t k = i + 1; k < c.size(); ++k) pairs.push_back(pair_crossing(c[i], c[k]));
    return pairs;
}

} // namespace

CrossingResult crossing_point(std::span<const SizeCurve> curves, double D_fixed, int bootstrap, std::uint64_t seed) {
    if (curves.size() < 2) throw DataError("crossing analysis needs at least 2 sizes");
    for (std::size_t i = 0; i < curves.size(); ++i)
        for (std::size_t k = 0; k < i; ++k)
            if (curves[i].L == curves[k].L) throw DataError("crossing analysis: duplicate size L=" + std::to_string(curves[i].L));
    const auto scaled = scaled_curves(curves, D_fixed);
    CrossingResult r;
    r.pairs = all_pairs(scaled);
    r.delta_c = weighted_mean_of_pairs(r.pairs, &r.sigma_spread);

    Rng rng(seed);
    std::vector<double> reps;
    for (int b = 0; b < bootstrap; ++b) {
        auto noisy = scaled;
        for (auto& c : noisy)
            for (auto& p : c.points) p.y += p.sigma * rng.normal();
        try {
            reps.push_back(weighted_mean_of_pairs(all_pairs(noisy), nullptr));
        } catch (const DataError&) {
            ++r.bootstrap_failures;
        }
    }
    r.sigma_bootstrap = std::sqrt(sample_variance(reps));
    return r;
}

double scaled_variance(std::span<const DataPoint> m2, double D) {
    std::vector<double> v;
    v.reserve(m2.size());
    for (const auto& p : m2) v.push_back(p.y * std::pow(p.x, 2.0 * D));
    const double mean = mean_of(v);
    double s = 0.0;
    for (const double x : v) s += (x - mean) * (x - mean);
    return s / static_cast<double>(v.size()) / (mean * mean);
}

namespace {

constexpr int kScanPoints = 101;

std::vector<double> scan_minima(std::span<const DataPoint> m2, double lo, double hi, std::vector<double>& grid,
                                std::vector<double>& vals) {
    grid.resize(kScanPoints);
    vals.resize(kScanPoints);
    for (int i = 0; i < kScanPoints; ++i) {
        grid[i] = lo + (hi - lo) * i / (kScanPoints - 1);
        vals[i] = scaled_variance(m2, grid[i]);
    }
    std::vector<double> minima;
    for (int i = 0; i < kScanPoints; ++i) {
        const bool left = i == 0 || vals[i] < vals[i - 1];
        const bool right = i == kScanPoints - 1 || vals[i] <= vals[i + 1];
        if (left && right) minima.push_back(grid[i]);
    }
    return minima;
}

double golden_section(std::span<const DataPoint> m2, double a, double b) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = scaled_variance(m2, c), fd = scaled_variance(m2, d);
    while (b - a > 1e-12) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = scaled_variance(m2, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = scaled_variance(m2, d);
        }
    }
    return 0.5 * (a + b);
}

double minimize(std::span<const DataPoint> m2, double lo, double hi, std::vector<double>* minima_out, bool strict) {
    std::vector<double> grid, vals;
    const auto minima = scan_minima(m2, lo, hi, grid, vals);
    if (minima_out) *minima_out = minima;
    if (strict && minima.size() != 1) {
        std::ostringstream os;
        os << "ambiguous scaling-dimension scan, local minima at D =";
        for (const double m : minima) os << ' ' << m;
        throw NumericError(os.str());
    }
    const auto best = static_cast<int>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    const double a = grid[std::max(best - 1, 0)];
    const double b = grid[std::min(best + 1, kScanPoints - 1)];
    return golden_section(m2, a, b);
}

} // namespace

ScalingDimensionResult fit_scaling_dimension(std::span<const DataPoint> m2, double lo, double hi, int bootstrap,
                                             std::uint64_t seed) {
    if (m2.size() < 3) throw DataError("scaling-dimension fit needs at least 3 sizes");
    if (!(lo >= 0.0 && hi <= 1.0 && lo < hi)) throw ConfigError("scaling-dimension window must lie inside [0, 1]");
    for (const auto& p : m2)
        if (!(p.y > 0.0) || !(p.x > 0.0)) throw DataError("scaling-dimension fit needs positive L and M^2");

    ScalingDimensionResult r;
    r.D = minimize(m2, lo, hi, &r.scan_minima, true);
    r.variance_at_min = scaled_variance(m2, r.D);

    Rng rng(seed);
    std::vector<double> reps;
    std::vector<DataPoint> noisy(m2.begin(), m2.end());
    for (int b = 0; b < bootstrap; ++b) {
        bool ok = true;
        for (std::size_t i = 0; i < m2.size(); ++i) {
            noisy[i].y = m2[i].y + m2[i].sigma * rng.normal();
            ok = ok && noisy[i].y > 0.0;
        }
        if (ok) reps.push_back(minimize(noisy, lo, hi, nullptr, false));
    }
    r.sigma = std::sqrt(sample_variance(reps));
    return r;
}

CollapseResult scaling_collapse(std::span<const SizeCurve> curves, double delta_c, double D_d, double nu) {
    if (!(nu > 0.0)) throw ConfigError("collapse exponent nu must be positive");
    CollapseResult r{delta_c, D_d, nu, 0.0, {}};
    std::vector<std::vector<DataPoint>> collapsed;
    for (const auto& c : curves) {
        const double Lf = static_cast<double>(c.L);
        const double sx = std::pow(Lf, 1.0 / nu), sy = std::pow(Lf, 2.0 * D_d);
        std::vector<DataPoint> pts;
        for (const auto& p : sorted_points(c)) {
            const CollapsePoint cp{c.L, p.x, (p.x - delta_c) * sx, p.y * sy, p.sigma * sy};
            r.table.push_back(cp);
            pts.push_back({cp.x, cp.y, cp.sigma});
        }
        collapsed.push_back(std::move(pts));
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < collapsed.size(); ++i)
        for (const auto& p : collapsed[i])
            for (std::size_t k = 0; k < collapsed.size(); ++k) {
                if (k == i || collapsed[k].size() < 2) continue;
                if (p.x < collapsed[k].front().x || p.x > collapsed[k].back().x) continue;
                const double d = p.y - interpolate(collapsed[k], p.x).y;
                sum += d * d;
                ++n;
            }
    r.quality = n > 0 ? sum / static_cast<double>(n) : std::numeric_limits<double>::infinity();
    return r;
}

} // namespace snapdefect
