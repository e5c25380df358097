#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "detail/stats.hpp"
#include "errors.hpp"
#include "lc_engine.hpp"
#include "signal.hpp"

namespace lcforge {

inline constexpr double kMicrovoltsPerMillivolt = 1000.0;

namespace detail {

inline void require_aligned(const UniformSignal& reference, const UniformSignal& candidate)
{
    if (reference.size() != candidate.size()) {
        throw ArgumentError("signals differ in length (" + std::to_string(reference.size()) + " vs " +
                            std::to_string(candidate.size()) + ")");
    }
    if (std::abs(reference.sample_rate() - candidate.sample_rate()) > 1e-9 * reference.sample_rate()) {
        throw ArgumentError("signals differ in sample rate");
    }
    if (reference.empty()) {
        throw ArgumentError("cannot compare empty signals");
    }
}

inline double sum_squared_diff(std::span<const double> a, std::span<const double> b, std::size_t first,
                               std::size_t last)
{
    double acc = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

} // namespace detail

/// Root-mean-square difference in the signals' own unit (mV).
inline double rmse_mv(const UniformSignal& reference, const UniformSignal& candidate)
{
    detail::require_aligned(reference, candidate);
    return std::sqrt(detail::sum_squared_diff(reference.samples(), candidate.samples(), 0, reference.size()) /
                     static_cast<double>(reference.size()));
}

/// Root-mean-square difference in microvolts.
inline double rmse(const UniformSignal& reference, const UniformSignal& candidate)
{
    return rmse_mv(reference, candidate) * kMicrovoltsPerMillivolt;
}

/// Sampling reduction factor: events per uniform sample.
inline double srf(const EventStream& events)
{
    if (events.source_sample_count == 0) {
        throw ArgumentError("event stream has no source samples");
    }
    return static_cast<double>(events.size()) / static_cast<double>(events.source_sample_count);
}

/// RMSE (mV) of the linear reconstruction on the reference grid, scaled by
/// (1 + lambda * SRF).
inline double objective(const UniformSignal& reference, const EventStream& events, double lambda)
{
    if (lambda < 0.0) {
        throw ArgumentError("lambda must be non-negative");
    }
    const auto rebuilt = reconstruct_linear(events, GridSpec{reference.sample_rate(), reference.size()});
    return rmse_mv(reference, rebuilt) * (1.0 + lambda * srf(events));
}

inline double error_per_event(double srf_value, double rmse_value) { return srf_value * rmse_value; }

struct BeatError {
    std::size_t beat = 0;
    double rmse_uv = 0.0;
};

namespace detail {

inline void require_beats(const BeatAnnotations& beats, std::size_t sample_count)
{
    if (beats.peak_count() < 2) {
        throw ArgumentError("per-beat metrics need at least two R-peaks");
    }
    beats.check_bounds(sample_count);
}

} // namespace detail

/// RMSE (uV) of each half-open beat [r_k, r_{k+1}).
inline std::vector<BeatError> per_beat_rmse(const UniformSignal& reference, const UniformSignal& candidate,
                                            const BeatAnnotations& beats)
{
    detail::require_aligned(reference, candidate);
    detail::require_beats(beats, reference.size());
    const auto peaks = beats.r_peaks();
    std::vector<BeatError> out;
    out.reserve(beats.beat_count());
    for (std::size_t k = 0; k + 1 < peaks.size(); ++k) {
        const double ss = detail::sum_squared_diff(reference.samples(), candidate.samples(), peaks[k], peaks[k + 1]);
        out.push_back({k, std::sqrt(ss / static_cast<double>(peaks[k + 1] - peaks[k])) * kMicrovoltsPerMillivolt});
    }
    return out;
}

/// Events falling in each beat's time span divided by its sample count.
inline std::vector<double> per_beat_srf(const EventStream& events, const BeatAnnotations& beats)
{
    detail::require_beats(beats, events.source_sample_count);
    const auto peaks = beats.r_peaks();
    const double period = 1.0 / events.source_sample_rate;
    std::vector<double> out;
    out.reserve(beats.beat_count());
    auto it = events.events.begin();
    for (std::size_t k = 0; k + 1 < peaks.size(); ++k) {
        const double t_begin = static_cast<double>(peaks[k]) * period;
        const double t_end = static_cast<double>(peaks[k + 1]) * period;
        while (it != events.events.end() && it->time < t_begin) {
            ++it;
        }
        std::size_t count = 0;
        auto jt = it;
        while (jt != events.events.end() && jt->time < t_end) {
            ++count;
            ++jt;
        }
        out.push_back(static_cast<double>(count) / static_cast<double>(peaks[k + 1] - peaks[k]));
    }
    return out;
}

struct Summary {
    std::size_t count = 0;
    double mean = 0.0;
    double std = 0.0;
    double median = 0.0;
    double p0_5 = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
    double p99_5 = 0.0;
};

inline Summary summarize(std::span<const double> values)
{
    Summary s;
    s.count = values.size();
    if (values.empty()) {
        return s;
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    s.mean = detail::mean(sorted);
    s.std = detail::stddev(sorted);
    s.median = detail::percentile_sorted(sorted, 0.5);
    s.p0_5 = detail::percentile_sorted(sorted, 0.005);
    s.p25 = detail::percentile_sorted(sorted, 0.25);
    s.p75 = detail::percentile_sorted(sorted, 0.75);
    s.p99_5 = detail::percentile_sorted(sorted, 0.995);
    return s;
}

/// Fidelity and compression figures for one (signal, scheme) pair. RMSE
/// values are in uV. Per-beat error-per-event multiplies each beat's RMSE
/// by that beat's own SRF.
struct MetricsReport {
    std::vector<BeatError> per_beat_rmse;
    std::vector<double> per_beat_error_per_event;
    double srf = 0.0;
    double rmse_overall = 0.0;
    double error_per_event = 0.0;
    std::size_t event_count = 0;
    std::size_t sample_count = 0;
    Summary rmse_summary;
    Summary error_per_event_summary;
    std::vector<std::string> warnings;
};

/// Reconstructs `events` on the reference grid and computes every metric.
inline MetricsReport evaluate(const UniformSignal& reference, const EventStream& events, const BeatAnnotations& beats)
{
    const auto rebuilt = reconstruct_linear(events, GridSpec{reference.sample_rate(), reference.size()});
    MetricsReport r;
    r.event_count = events.size();
    r.sample_count = reference.size();
    r.srf = srf(events);
    r.rmse_overall = rmse(reference, rebuilt);
    r.error_per_event = error_per_event(r.srf, r.rmse_overall);
    r.per_beat_rmse = per_beat_rmse(reference, rebuilt, beats);
    const auto beat_srf = per_beat_srf(events, beats);
    std::vector<double> beat_rmse;
    beat_rmse.reserve(r.per_beat_rmse.size());
    for (std::size_t k = 0; k < r.per_beat_rmse.size(); ++k) {
        beat_rmse.push_back(r.per_beat_rmse[k].rmse_uv);
        r.per_beat_error_per_event.push_back(error_per_event(beat_srf[k], r.per_beat_rmse[k].rmse_uv));
    }
    r.rmse_summary = summarize(beat_rmse);
    r.error_per_event_summary = summarize(r.per_beat_error_per_event);
    if (events.empty()) {
        r.warnings.emplace_back("empty event stream: reconstruction is all zeros");
    }
    return r;
}

inline void to_json(nlohmann::json& j, const Summary& s)
{
    j = nlohmann::json{{"count", s.count}, {"mean", s.mean},   {"std", s.std},   {"median", s.median},
                       {"p0_5", s.p0_5},   {"p25", s.p25},     {"p75", s.p75},   {"p99_5", s.p99_5}};
}

inline void to_json(nlohmann::json& j, const MetricsReport& r)
{
    std::vector<double> beat_rmse;
    beat_rmse.reserve(r.per_beat_rmse.size());
    for (const auto& b : r.per_beat_rmse) {
        beat_rmse.push_back(b.rmse_uv);
    }
    j = nlohmann::json{{"srf", r.srf},
                       {"rmse_overall_uv", r.rmse_overall},
                       {"error_per_event_uv", r.error_per_event},
                       {"event_count", r.event_count},
                       {"sample_count", r.sample_count},
                       {"per_beat_rmse_uv", beat_rmse},
                       {"per_beat_error_per_event_uv", r.per_beat_error_per_event},
                       {"rmse_summary", r.rmse_summary},
                       {"error_per_event_summary", r.error_per_event_summary},
                       {"warnings", r.warnings}};
}

/// One row per beat: beat,rmse_uv,error_per_event_uv.
inline void write_beats_csv(std::ostream& out, const MetricsReport& r)
{
    out << "beat,rmse_uv,error_per_event_uv\n" << std::setprecision(10);
    for (std::size_t k = 0; k < r.per_beat_rmse.size(); ++k) {
        out << r.per_beat_rmse[k].beat << ',' << r.per_beat_rmse[k].rmse_uv << ','
            << r.per_beat_error_per_event[k] << '\n';
    }
}

} // namespace lcforge
