#pragma once

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "signal.hpp"

namespace lcforge {

/// Frequency band of a least-squares design. Bands not covered by any
/// entry are don't-care regions.
struct FilterBand {
    double low_hz;
    double high_hz;
    double gain;
    double weight = 1.0;
};

/// Type-I linear-phase FIR: odd length, symmetric taps.
class FirFilter {
public:
    FirFilter(std::vector<double> taps, double sample_rate, std::vector<FilterBand> design_bands = {})
        : taps_(std::move(taps)), bands_(std::move(design_bands)), sample_rate_(sample_rate)
    {
        if (taps_.empty() || taps_.size() % 2 == 0) {
            throw ArgumentError("FIR filter needs an odd, non-zero number of taps");
        }
        if (!(sample_rate_ > 0.0)) {
            throw ArgumentError("FIR sample rate must be positive");
        }
        const std::size_t n = taps_.size();
        for (std::size_t k = 0; k < n / 2; ++k) {
            const double a = taps_[k];
            const double b = taps_[n - 1 - k];
            if (std::abs(a - b) > 1e-12 * std::max(1.0, std::max(std::abs(a), std::abs(b)))) {
                throw ArgumentError("FIR taps are not symmetric");
            }
        }
    }

    /// Single unit tap.
    static FirFilter identity(double sample_rate) { return FirFilter({1.0}, sample_rate); }

    [[nodiscard]] std::span<const double> taps() const noexcept { return taps_; }
    [[nodiscard]] std::span<const FilterBand> design_bands() const noexcept { return bands_; }
    [[nodiscard]] double sample_rate() const noexcept { return sample_rate_; }
    [[nodiscard]] std::size_t group_delay() const noexcept { return (taps_.size() - 1) / 2; }

    /// Zero-phase amplitude response A(f) (real, may be negative).
    [[nodiscard]] double amplitude_response(double freq_hz) const
    {
        const std::size_t m = group_delay();
        const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate_;
        double a = taps_[m];
        for (std::size_t k = 1; k <= m; ++k) {
            a += 2.0 * taps_[m - k] * std::cos(static_cast<double>(k) * w);
        }
        return a;
    }

    /// |H(f)|.
    [[nodiscard]] double gain(double freq_hz) const { return std::abs(amplitude_response(freq_hz)); }

private:
    std::vector<double> taps_;
    std::vector<FilterBand> bands_;
    double sample_rate_;
};

/// Default band layout for a band-pass: stop on [0, low/2] (weighted
/// heavily so the DC gain actually vanishes), pass on [low, high], stop
/// from high + 5 Hz to Nyquist. Gaps in between are don't-care.
inline std::vector<FilterBand> bandpass_bands(double low_hz, double high_hz, double sample_rate)
{
    const double nyquist = sample_rate / 2.0;
    if (!(low_hz > 0.0) || !(high_hz > low_hz) || high_hz > nyquist) {
        throw ArgumentError("band edges must satisfy 0 < low < high <= Nyquist");
    }
    std::vector<FilterBand> bands;
    bands.push_back({0.0, low_hz / 2.0, 0.0, 1000.0});
    bands.push_back({low_hz, high_hz, 1.0, 1.0});
    if (high_hz + 5.0 < nyquist) {
        bands.push_back({high_hz + 5.0, nyquist, 0.0, 1.0});
    }
    return bands;
}

/// Weighted least-squares type-I FIR design on a dense frequency grid
/// (grid_density * n_taps points across [0, Nyquist], plus band edges).
inline FirFilter design_fir_least_squares(std::size_t n_taps, std::vector<FilterBand> bands, double sample_rate,
                                          std::size_t grid_density = 16)
{
    if (n_taps == 0 || n_taps % 2 == 0) {
        throw ArgumentError("least-squares FIR design needs an odd tap count");
    }
    if (!(sample_rate > 0.0)) {
        throw ArgumentError("sample rate must be positive");
    }
    if (bands.empty()) {
        throw ArgumentError("at least one design band is required");
    }
    const double nyquist = sample_rate / 2.0;
    double previous_high = -1.0;
    for (const auto& b : bands) {
        if (b.low_hz < 0.0 || b.high_hz > nyquist * (1.0 + 1e-12)) {
            throw ArgumentError("design band [" + std::to_string(b.low_hz) + ", " + std::to_string(b.high_hz) +
                                "] Hz lies outside [0, Nyquist]");
        }
        if (b.high_hz < b.low_hz || b.low_hz <= previous_high) {
            throw ArgumentError("design bands must be increasing and non-overlapping");
        }
        if (!(b.weight > 0.0)) {
            throw ArgumentError("band weights must be positive");
        }
        previous_high = b.high_hz;
    }

    const std::size_t m = (n_taps - 1) / 2;
    std::vector<double> freqs;
    std::vector<double> desired;
    std::vector<double> weights;
    const std::size_t grid = std::max<std::size_t>(grid_density * n_taps, 2);
    auto add_point = [&](double f) {
        for (const auto& b : bands) {
            if (f >= b.low_hz && f <= b.high_hz) {
                freqs.push_back(f);
                desired.push_back(b.gain);
                weights.push_back(b.weight);
                return;
            }
        }
    };
    for (std::size_t i = 0; i <= grid; ++i) {
        add_point(nyquist * static_cast<double>(i) / static_cast<double>(grid));
    }
    for (const auto& b : bands) {
        add_point(b.low_hz);
        add_point(b.high_hz);
    }

    Eigen::MatrixXd a(static_cast<Eigen::Index>(freqs.size()), static_cast<Eigen::Index>(m + 1));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(freqs.size()));
    for (std::size_t r = 0; r < freqs.size(); ++r) {
        const double w = 2.0 * std::numbers::pi * freqs[r] / sample_rate;
        const double sw = std::sqrt(weights[r]);
        const auto row = static_cast<Eigen::Index>(r);
        a(row, 0) = sw;
        for (std::size_t k = 1; k <= m; ++k) {
            a(row, static_cast<Eigen::Index>(k)) = sw * 2.0 * std::cos(static_cast<double>(k) * w);
        }
        rhs(row) = sw * desired[r];
    }
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(rhs);

    std::vector<double> taps(n_taps);
    taps[m] = coef(0);
    for (std::size_t k = 1; k <= m; ++k) {
        taps[m - k] = coef(static_cast<Eigen::Index>(k));
        taps[m + k] = coef(static_cast<Eigen::Index>(k));
    }
    return FirFilter(std::move(taps), sample_rate, std::move(bands));
}

/// Zero-padded convolution shifted left by the group delay, so the output
/// is index-aligned with the input and of equal length.
inline UniformSignal apply_filter(const FirFilter& filter, const UniformSignal& signal)
{
    if (std::abs(filter.sample_rate() - signal.sample_rate()) > 1e-9 * signal.sample_rate()) {
        throw ArgumentError("filter designed for " + std::to_string(filter.sample_rate()) +
                            " Hz applied to a " + std::to_string(signal.sample_rate()) + " Hz signal");
    }
    const auto h = filter.taps();
    const auto x = signal.samples();
    const auto n = static_cast<long long>(x.size());
    const auto len = static_cast<long long>(h.size());
    const auto delay = static_cast<long long>(filter.group_delay());
    std::vector<double> y(x.size(), 0.0);
    for (long long i = 0; i < n; ++i) {
        // y[i] = sum_k h[k] x[i + delay - k]
        const long long k_lo = std::max(0LL, i + delay - (n - 1));
        const long long k_hi = std::min(len - 1, i + delay);
        double acc = 0.0;
        for (long long k = k_lo; k <= k_hi; ++k) {
            acc += h[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(i + delay - k)];
        }
        y[static_cast<std::size_t>(i)] = acc;
    }
    return UniformSignal(std::move(y), signal.sample_rate(), signal.start_time());
}

inline void write_taps_csv(std::ostream& out, const FirFilter& filter)
{
    out << "tap_index,coefficient\n" << std::setprecision(17);
    for (std::size_t i = 0; i < filter.taps().size(); ++i) {
        out << i << ',' << filter.taps()[i] << '\n';
    }
}

} // namespace lcforge
