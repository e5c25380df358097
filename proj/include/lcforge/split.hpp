#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "errors.hpp"
#include "signal.hpp"

namespace lcforge {

struct TrainTestSplit {
    UniformSignal train;
    UniformSignal test;
    BeatAnnotations train_beats;
    BeatAnnotations test_beats;
    std::size_t test_offset = 0;
};

/// Ordered split without shuffling: train covers samples [r_0, r_n) for
/// n = train_beats, test covers [r_n, end) (or up to the R-peak closing
/// `max_test_beats` beats when given). Annotations are re-based onto each part.
inline TrainTestSplit split_train_test(const UniformSignal& signal, const BeatAnnotations& beats,
                                       std::size_t train_beats, std::optional<std::size_t> max_test_beats = {})
{
    beats.check_bounds(signal.size());
    if (train_beats == 0) {
        throw ArgumentError("train split needs at least one beat");
    }
    if (beats.beat_count() <= train_beats + 1) {
        throw ArgumentError("record has " + std::to_string(beats.beat_count()) + " beats; need more than " +
                            std::to_string(train_beats + 1) + " for a " + std::to_string(train_beats) +
                            "-beat train split");
    }
    const auto peaks = beats.r_peaks();
    const std::size_t first = peaks.front();
    const std::size_t cut = peaks[train_beats];
    std::size_t last = signal.size();
    if (max_test_beats) {
        if (*max_test_beats == 0) {
            throw ArgumentError("test split needs at least one beat");
        }
        const std::size_t end_peak = train_beats + *max_test_beats;
        if (end_peak < peaks.size()) {
            last = peaks[end_peak] + 1;
        }
    }
    TrainTestSplit s;
    s.train = signal.slice(first, cut);
    s.test = signal.slice(cut, last);
    s.train_beats = beats.rebase(first, cut);
    s.test_beats = beats.rebase(cut, last);
    s.test_offset = cut;
    return s;
}

} // namespace lcforge
