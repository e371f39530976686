#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

namespace snapdefect {

/// Pairwise (cascade) summation in a fixed order. The result depends only on
/// the input sequence, never on how the work is scheduled.
template <typename T>
T pairwise_sum(std::span<const T> x) {
    constexpr std::size_t kBlock = 64;
    if (x.size() <= kBlock) {
        T s{};
        for (const T v : x) s += v;
        return s;
    }
    const std::size_t half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

/// ln(sum_i exp(x_i)); -inf for an empty input.
template <typename T>
T log_sum_exp(std::span<const T> x) {
    if (x.empty()) return -std::numeric_limits<T>::infinity();
    const T m = *std::max_element(x.begin(), x.end());
    if (!std::isfinite(m)) return m;
    T s{};
    for (const T v : x) s += std::exp(v - m);
    return m + std::log(s);
}

inline double mean_of(std::span<const double> x) {
    return x.empty() ? 0.0 : pairwise_sum(x) / static_cast<double>(x.size());
}

/// Unbiased sample variance (n - 1 denominator); 0 for fewer than two values.
inline double sample_variance(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double m = mean_of(x);
    double s = 0.0;
    for (const double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

} // namespace snapdefect
