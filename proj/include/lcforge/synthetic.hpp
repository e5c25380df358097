#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "signal.hpp"

namespace lcforge {

/// One Gaussian bump of the beat template, positioned relative to the R peak.
struct WaveComponent {
    double offset_s;
    double width_s;
    double amplitude_mv;
};

/// P, Q, R, S, T. Peak-to-trough span is about 1 mV.
inline constexpr std::array<WaveComponent, 5> kBeatTemplate{{
    {-0.20, 0.025, 0.12},
    {-0.035, 0.010, -0.10},
    {0.0, 0.012, 0.80},
    {0.035, 0.010, -0.20},
    {0.26, 0.045, 0.25},
}};

struct SyntheticEcg {
    UniformSignal signal;
    BeatAnnotations beats;
};

/// Deterministic sum-of-Gaussians ECG. RR intervals get seeded uniform
/// jitter of at most +/-5 % (enforced after rounding to whole samples);
/// annotations are the R-peak samples. `noise_mv` adds seeded white noise.
inline SyntheticEcg synthesize_ecg(double duration_s, double heart_rate_bpm, double sample_rate, std::uint64_t seed,
                                   double noise_mv = 0.0)
{
    if (!(duration_s > 0.0)) {
        throw ArgumentError("synthetic ECG duration must be positive");
    }
    if (heart_rate_bpm < 30.0 || heart_rate_bpm > 220.0) {
        throw ArgumentError("heart rate must lie in [30, 220] bpm");
    }
    if (!(sample_rate > 0.0)) {
        throw ArgumentError("sample rate must be positive");
    }
    if (noise_mv < 0.0) {
        throw ArgumentError("noise amplitude must be non-negative");
    }

    const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
    if (n == 0) {
        throw ArgumentError("duration shorter than one sample");
    }
    const double nominal_rr = 60.0 / heart_rate_bpm * sample_rate;
    const auto rr_lo = static_cast<long long>(std::ceil(nominal_rr * 0.95));
    const auto rr_hi = static_cast<long long>(std::floor(nominal_rr * 1.05));
    if (rr_lo > rr_hi) {
        throw ArgumentError("sample rate too low to realise the requested heart rate");
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);

    // First beat lands one P-wave lead after the start so the template fits.
    std::vector<std::size_t> peaks;
    auto r = static_cast<long long>(std::ceil(0.3 * sample_rate));
    while (r < static_cast<long long>(n)) {
        peaks.push_back(static_cast<std::size_t>(r));
        auto rr = std::llround(nominal_rr * (1.0 + jitter(rng)));
        rr = std::clamp(rr, rr_lo, rr_hi);
        r += rr;
    }

    std::vector<double> x(n, 0.0);
    const double reach = 5.0;
    for (auto peak : peaks) {
        const double tr = static_cast<double>(peak) / sample_rate;
        for (const auto& w : kBeatTemplate) {
            const double centre = tr + w.offset_s;
            const auto first = static_cast<long long>(std::floor((centre - reach * w.width_s) * sample_rate));
            const auto last = static_cast<long long>(std::ceil((centre + reach * w.width_s) * sample_rate));
            for (long long i = std::max(0LL, first); i <= std::min(last, static_cast<long long>(n) - 1); ++i) {
                const double dt = static_cast<double>(i) / sample_rate - centre;
                x[static_cast<std::size_t>(i)] += w.amplitude_mv * std::exp(-0.5 * dt * dt / (w.width_s * w.width_s));
            }
        }
    }
    if (noise_mv > 0.0) {
        std::normal_distribution<double> noise(0.0, noise_mv);
        for (auto& v : x) {
            v += noise(rng);
        }
    }
    return {UniformSignal(std::move(x), sample_rate), BeatAnnotations(std::move(peaks))};
}

} // namespace lcforge
