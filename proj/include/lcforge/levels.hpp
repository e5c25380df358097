#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "signal.hpp"

namespace lcforge {

/// Levels closer than this (mV) collapse into one.
inline constexpr double kLevelMergeTolerance = 1e-12;

/// Sorted, distinct level amplitudes (mV) plus one global hysteresis width.
/// Each level owns the Schmitt pair level +/- hysteresis/2, so the width must
/// stay below the smallest level gap.
class LevelScheme {
public:
    LevelScheme(std::vector<double> levels, double hysteresis = 0.0) : levels_(std::move(levels)), hysteresis_(hysteresis)
    {
        for (double v : levels_) {
            if (!std::isfinite(v)) {
                throw ArgumentError("level amplitudes must be finite");
            }
        }
        std::sort(levels_.begin(), levels_.end());
        levels_.erase(std::unique(levels_.begin(), levels_.end(),
                                  [](double a, double b) { return b - a < kLevelMergeTolerance; }),
                      levels_.end());
        if (levels_.size() < 2) {
            throw ArgumentError("a level scheme needs at least two distinct levels");
        }
        if (!(hysteresis_ >= 0.0) || !std::isfinite(hysteresis_)) {
            throw ArgumentError("hysteresis must be a finite non-negative width");
        }
        if (hysteresis_ >= min_gap()) {
            throw ArgumentError("hysteresis " + std::to_string(hysteresis_) + " mV is not below the smallest level gap " +
                                std::to_string(min_gap()) + " mV");
        }
    }

    [[nodiscard]] std::span<const double> levels() const noexcept { return levels_; }
    [[nodiscard]] std::size_t size() const noexcept { return levels_.size(); }
    [[nodiscard]] double hysteresis() const noexcept { return hysteresis_; }
    [[nodiscard]] double operator[](std::size_t i) const { return levels_[i]; }

    [[nodiscard]] double min_gap() const noexcept
    {
        double gap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < levels_.size(); ++i) {
            gap = std::min(gap, levels_[i] - levels_[i - 1]);
        }
        return gap;
    }

    friend bool operator==(const LevelScheme&, const LevelScheme&) = default;

private:
    std::vector<double> levels_;
    double hysteresis_;
};

inline void to_json(nlohmann::json& j, const LevelScheme& s)
{
    j = nlohmann::json{{"levels", std::vector<double>(s.levels().begin(), s.levels().end())},
                       {"hysteresis", s.hysteresis()}};
}

inline LevelScheme level_scheme_from_json(const nlohmann::json& j)
{
    try {
        return LevelScheme(j.at("levels").get<std::vector<double>>(), j.value("hysteresis", 0.0));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed level scheme JSON: ") + e.what());
    }
}

namespace detail {

inline void require_range(std::size_t count, const SignalRange& range)
{
    if (count < 2) {
        throw ArgumentError("at least two levels are required");
    }
    if (!(range.delta > 0.0)) {
        throw DegenerateRangeError("signal range is degenerate (delta = 0); cannot place levels");
    }
}

/// Min-max normalisation to [0, 1]; a constant input maps to all zeros.
inline std::vector<double> min_max_normalize(std::span<const double> values)
{
    std::vector<double> out(values.begin(), values.end());
    if (out.empty()) {
        return out;
    }
    const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
    const double min = *lo;
    const double span = *hi - *lo;
    for (auto& v : out) {
        v = span > 0.0 ? (v - min) / span : 0.0;
    }
    return out;
}

/// Symmetric log set for an odd count: 10^(i/h) for i in 0..h and its
/// mirror 2 - 10^(i/h) for i in 1..h, sorted (h = count / 2).
inline std::vector<double> raw_log_levels_odd(std::size_t count)
{
    const std::size_t half = count / 2;
    std::vector<double> raw;
    raw.reserve(2 * half + 1);
    for (std::size_t i = 0; i <= half; ++i) {
        raw.push_back(std::pow(10.0, static_cast<double>(i) / static_cast<double>(half)));
    }
    for (std::size_t i = 1; i <= half; ++i) {
        raw.push_back(2.0 - std::pow(10.0, static_cast<double>(i) / static_cast<double>(half)));
    }
    std::sort(raw.begin(), raw.end());
    return raw;
}

} // namespace detail

/// Evenly spaced levels from x_min to x_max inclusive.
inline LevelScheme uniform_levels(std::size_t count, const SignalRange& range)
{
    detail::require_range(count, range);
    std::vector<double> levels(count);
    const double step = range.delta / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) {
        levels[i] = range.x_min + step * static_cast<double>(i);
    }
    levels.back() = range.x_max;
    return LevelScheme(std::move(levels), 0.0);
}

/// Symmetric logarithmic spacing, densest at the range edges. Even counts are
/// built from the next odd set with its median removed.
inline LevelScheme logarithmic_levels(std::size_t count, const SignalRange& range)
{
    detail::require_range(count, range);
    std::vector<double> raw;
    if (count % 2 == 1) {
        raw = detail::raw_log_levels_odd(count);
    } else {
        raw = detail::raw_log_levels_odd(count + 1);
        raw.erase(raw.begin() + static_cast<std::ptrdiff_t>(raw.size() / 2));
    }
    const auto unit = detail::min_max_normalize(raw);
    std::vector<double> levels(unit.size());
    for (std::size_t i = 0; i < unit.size(); ++i) {
        levels[i] = unit[i] * range.delta + range.x_min;
    }
    return LevelScheme(std::move(levels), 0.0);
}

} // namespace lcforge
