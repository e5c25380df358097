#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "../errors.hpp"

namespace lcforge::detail {

/// Percentile over already sorted data, rank r = q*(n-1) with linear
/// interpolation between the neighbouring order statistics.
inline double percentile_sorted(std::span<const double> sorted, double q)
{
    if (sorted.empty()) {
        throw ArgumentError("percentile of an empty sequence");
    }
    if (q < 0.0 || q > 1.0) {
        throw ArgumentError("percentile rank must lie in [0, 1]");
    }
    const double rank = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = static_cast<std::size_t>(std::ceil(rank));
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

inline double percentile(std::span<const double> values, double q)
{
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return percentile_sorted(sorted, q);
}

inline double mean(std::span<const double> values)
{
    if (values.empty()) {
        return 0.0;
    }
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

/// Population standard deviation.
inline double stddev(std::span<const double> values)
{
    if (values.size() < 2) {
        return 0.0;
    }
    const double m = mean(values);
    double acc = 0.0;
    for (double v : values) {
        acc += (v - m) * (v - m);
    }
    return std::sqrt(acc / static_cast<double>(values.size()));
}

inline double variance(std::span<const double> values)
{
    const double s = stddev(values);
    return s * s;
}

} // namespace lcforge::detail
