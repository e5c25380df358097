#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "detail/stats.hpp"
#include "errors.hpp"

namespace lcforge {

/// Uniformly sampled amplitude series in mV. Sample i sits at
/// start_time + i / sample_rate.
class UniformSignal {
public:
    UniformSignal() = default;

    UniformSignal(std::vector<double> samples, double sample_rate, double start_time = 0.0)
        : samples_(std::move(samples)), sample_rate_(sample_rate), start_time_(start_time)
    {
        if (!(sample_rate_ > 0.0) || !std::isfinite(sample_rate_)) {
            throw ArgumentError("sample rate must be a positive finite number");
        }
        for (double v : samples_) {
            if (!std::isfinite(v)) {
                throw DataError("signal contains a non-finite sample");
            }
        }
    }

    [[nodiscard]] std::span<const double> samples() const noexcept { return samples_; }
    [[nodiscard]] double sample_rate() const noexcept { return sample_rate_; }
    [[nodiscard]] double period() const noexcept { return 1.0 / sample_rate_; }
    [[nodiscard]] double start_time() const noexcept { return start_time_; }
    [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
    [[nodiscard]] bool empty() const noexcept { return samples_.empty(); }
    [[nodiscard]] double operator[](std::size_t i) const { return samples_[i]; }

    [[nodiscard]] double time_of(std::size_t i) const noexcept
    {
        return start_time_ + static_cast<double>(i) / sample_rate_;
    }

    /// Half-open sample range [first, last); start time follows the slice.
    [[nodiscard]] UniformSignal slice(std::size_t first, std::size_t last) const
    {
        if (first > last || last > samples_.size()) {
            throw ArgumentError("slice bounds outside the signal");
        }
        return UniformSignal(std::vector<double>(samples_.begin() + static_cast<std::ptrdiff_t>(first),
                                                 samples_.begin() + static_cast<std::ptrdiff_t>(last)),
                             sample_rate_, time_of(first));
    }

    friend bool operator==(const UniformSignal&, const UniformSignal&) = default;

private:
    std::vector<double> samples_;
    double sample_rate_ = 1.0;
    double start_time_ = 0.0;
};

/// Sorted R-peak sample indices. Consecutive peaks delimit one beat.
class BeatAnnotations {
public:
    BeatAnnotations() = default;

    /// Sorts and removes duplicates.
    explicit BeatAnnotations(std::vector<std::size_t> r_peaks) : peaks_(std::move(r_peaks))
    {
        std::sort(peaks_.begin(), peaks_.end());
        peaks_.erase(std::unique(peaks_.begin(), peaks_.end()), peaks_.end());
    }

    [[nodiscard]] std::span<const std::size_t> r_peaks() const noexcept { return peaks_; }
    [[nodiscard]] std::size_t peak_count() const noexcept { return peaks_.size(); }
    [[nodiscard]] std::size_t beat_count() const noexcept { return peaks_.size() < 2 ? 0 : peaks_.size() - 1; }

    /// Throws unless every peak indexes into a signal of `sample_count` samples.
    void check_bounds(std::size_t sample_count) const
    {
        if (!peaks_.empty() && peaks_.back() >= sample_count) {
            throw DataError("R-peak index beyond the end of the signal");
        }
    }

    /// Peaks inside [first, last), re-based so that `first` becomes index 0.
    [[nodiscard]] BeatAnnotations rebase(std::size_t first, std::size_t last) const
    {
        std::vector<std::size_t> out;
        for (auto p : peaks_) {
            if (p >= first && p < last) {
                out.push_back(p - first);
            }
        }
        return BeatAnnotations(std::move(out));
    }

    friend bool operator==(const BeatAnnotations&, const BeatAnnotations&) = default;

private:
    std::vector<std::size_t> peaks_;
};

struct SignalRange {
    double x_min = 0.0;
    double x_max = 0.0;
    double delta = 0.0;
};

/// 5th/95th percentile amplitude range.
inline SignalRange signal_range(const UniformSignal& signal)
{
    if (signal.size() < 2) {
        throw ArgumentError("signal_range needs at least two samples");
    }
    std::vector<double> sorted(signal.samples().begin(), signal.samples().end());
    std::sort(sorted.begin(), sorted.end());
    SignalRange r;
    r.x_min = detail::percentile_sorted(sorted, 0.05);
    r.x_max = detail::percentile_sorted(sorted, 0.95);
    r.delta = r.x_max - r.x_min;
    return r;
}

/// Joins signals end to end at the first signal's rate.
inline UniformSignal concatenate(std::span<const UniformSignal> parts)
{
    if (parts.empty()) {
        throw ArgumentError("nothing to concatenate");
    }
    std::vector<double> all;
    for (const auto& p : parts) {
        if (p.sample_rate() != parts.front().sample_rate()) {
            throw ArgumentError("cannot concatenate signals with different sample rates");
        }
        all.insert(all.end(), p.samples().begin(), p.samples().end());
    }
    return UniformSignal(std::move(all), parts.front().sample_rate());
}

} // namespace lcforge
