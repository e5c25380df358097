#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "levels.hpp"
#include "signal.hpp"

namespace lcforge {

/// One level crossing. `time` is in seconds from the first source sample,
/// `amplitude` is the nominal level that fired.
struct Event {
    double time = 0.0;
    double amplitude = 0.0;
    std::uint16_t level_index = 0;

    friend bool operator==(const Event&, const Event&) = default;
};

/// Time-ordered events of one sampled signal, with enough of the source
/// geometry to rebuild its uniform grid.
struct EventStream {
    std::vector<Event> events;
    double source_duration = 0.0;
    std::size_t source_sample_count = 0;
    double source_sample_rate = 1.0;

    [[nodiscard]] std::size_t size() const noexcept { return events.size(); }
    [[nodiscard]] bool empty() const noexcept { return events.empty(); }

    friend bool operator==(const EventStream&, const EventStream&) = default;
};

/// Per-level comparator state. `rising` listens for the upper threshold,
/// `falling` for the lower one. `resting` only occurs without hysteresis:
/// the path sits exactly on the level and must leave it before re-arming.
enum class LevelState : std::uint8_t { rising, falling, resting };

inline LevelState initial_level_state(double x0, double level, double hysteresis) noexcept
{
    if (hysteresis == 0.0) {
        if (x0 == level) {
            return LevelState::resting;
        }
        return x0 < level ? LevelState::rising : LevelState::falling;
    }
    return x0 >= level + hysteresis / 2.0 ? LevelState::falling : LevelState::rising;
}

/// Emulates a level-crossing ADC over the piecewise-linear path through the
/// samples. Each level owns the Schmitt pair level +/- hysteresis/2; an
/// event fires when the path arrives at the armed threshold (from strictly
/// below for the upper one, strictly above for the lower one) and arms the
/// sibling. With zero hysteresis a level that the path merely touches fires
/// once and stays disarmed until the path leaves it. Event times invert the
/// linear segment between the bracketing samples.
inline EventStream lc_sample(const UniformSignal& signal, const LevelScheme& scheme)
{
    if (signal.empty()) {
        throw ArgumentError("cannot level-crossing sample an empty signal");
    }
    if (scheme.size() > 0xFFFFu) {
        throw ArgumentError("too many levels for a 16-bit level index");
    }
    const auto x = signal.samples();
    const auto levels = scheme.levels();
    const double gamma = scheme.hysteresis();
    const double half = gamma / 2.0;
    const double period = signal.period();

    EventStream out;
    out.source_sample_count = x.size();
    out.source_sample_rate = signal.sample_rate();
    out.source_duration = static_cast<double>(x.size() - 1) * period;

    std::vector<LevelState> state(levels.size());
    for (std::size_t l = 0; l < levels.size(); ++l) {
        state[l] = initial_level_state(x[0], levels[l], gamma);
    }

    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double a = x[i];
        const double b = x[i + 1];
        if (a == b) {
            continue;
        }
        const double t0 = static_cast<double>(i) * period;
        auto emit = [&](std::size_t l, double threshold) {
            const double frac = (threshold - a) / (b - a);
            out.events.push_back({t0 + period * frac, levels[l], static_cast<std::uint16_t>(l)});
        };
        if (b > a) {
            // Candidates: upper thresholds in [a, b]; one step of slack for rounding.
            auto it = std::lower_bound(levels.begin(), levels.end(), a - half);
            if (it != levels.begin()) {
                --it;
            }
            for (; it != levels.end() && *it + half <= b; ++it) {
                const auto l = static_cast<std::size_t>(it - levels.begin());
                const double upper = *it + half;
                if (state[l] == LevelState::rising && a < upper) {
                    emit(l, upper);
                    state[l] = (gamma == 0.0 && b == upper) ? LevelState::resting : LevelState::falling;
                } else if (state[l] == LevelState::resting && a == *it) {
                    state[l] = LevelState::falling;
                }
            }
        } else {
            auto it = std::upper_bound(levels.begin(), levels.end(), a + half);
            if (it != levels.end()) {
                ++it;
            }
            while (it != levels.begin()) {
                --it;
                const double lower = *it - half;
                if (lower < b) {
                    break;
                }
                const auto l = static_cast<std::size_t>(it - levels.begin());
                if (state[l] == LevelState::falling && a > lower) {
                    emit(l, lower);
                    state[l] = (gamma == 0.0 && b == lower) ? LevelState::resting : LevelState::rising;
                } else if (state[l] == LevelState::resting && a == *it) {
                    state[l] = LevelState::rising;
                }
            }
        }
    }
    return out;
}

/// Uniform target grid for reconstruction; sample j sits at j / sample_rate.
struct GridSpec {
    double sample_rate = 1.0;
    std::size_t sample_count = 0;
};

/// Piecewise-linear interpolation through the events onto a uniform grid.
/// Holds the first/last event amplitude outside the event span; an empty
/// stream reconstructs to zeros.
inline UniformSignal reconstruct_linear(const EventStream& stream, const GridSpec& grid)
{
    if (grid.sample_count == 0) {
        throw ArgumentError("reconstruction grid must have at least one sample");
    }
    if (!(grid.sample_rate > 0.0)) {
        throw ArgumentError("reconstruction grid needs a positive sample rate");
    }
    std::vector<double> y(grid.sample_count, 0.0);
    const auto& ev = stream.events;
    if (ev.empty()) {
        return UniformSignal(std::move(y), grid.sample_rate);
    }
    std::size_t k = 0;
    for (std::size_t j = 0; j < grid.sample_count; ++j) {
        const double t = static_cast<double>(j) / grid.sample_rate;
        while (k < ev.size() && ev[k].time <= t) {
            ++k;
        }
        if (k == 0) {
            y[j] = ev.front().amplitude;
        } else if (k == ev.size()) {
            y[j] = ev.back().amplitude;
        } else {
            const Event& p = ev[k - 1];
            const Event& q = ev[k];
            const double dt = q.time - p.time;
            y[j] = dt > 0.0 ? p.amplitude + (q.amplitude - p.amplitude) * (t - p.time) / dt : q.amplitude;
        }
    }
    return UniformSignal(std::move(y), grid.sample_rate);
}

inline UniformSignal reconstruct_linear(const EventStream& stream)
{
    return reconstruct_linear(stream, GridSpec{stream.source_sample_rate, stream.source_sample_count});
}

} // namespace lcforge
