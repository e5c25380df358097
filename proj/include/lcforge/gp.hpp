#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "detail/stats.hpp"
#include "errors.hpp"

namespace lcforge {

/// Parameter vectors with their objective values. Every coordinate of every
/// input is normalised to [0, 1].
struct ObservationSet {
    std::vector<std::vector<double>> inputs;
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    [[nodiscard]] bool empty() const noexcept { return values.empty(); }
    [[nodiscard]] std::size_t dimension() const noexcept { return inputs.empty() ? 0 : inputs.front().size(); }

    void add(std::vector<double> x, double y)
    {
        inputs.push_back(std::move(x));
        values.push_back(y);
    }

    void validate() const
    {
        if (inputs.size() != values.size()) {
            throw ArgumentError("observation inputs and values differ in count");
        }
        const std::size_t d = dimension();
        for (const auto& x : inputs) {
            if (x.size() != d) {
                throw ArgumentError("observation inputs differ in dimension");
            }
            for (double c : x) {
                if (!(c >= 0.0 && c <= 1.0)) {
                    throw ArgumentError("observation coordinate outside [0, 1]");
                }
            }
        }
        for (double y : values) {
            if (!std::isfinite(y)) {
                throw ArgumentError("observation value is not finite");
            }
        }
    }
};

/// Isotropic Matern-5/2 covariance.
struct MaternKernel {
    double signal_variance = 1.0;
    double length_scale = 1.0;

    [[nodiscard]] double from_distance(double r) const noexcept
    {
        const double s = std::sqrt(5.0) * r / length_scale;
        return signal_variance * (1.0 + s + s * s / 3.0) * std::exp(-s);
    }

    [[nodiscard]] double operator()(std::span<const double> a, std::span<const double> b) const noexcept
    {
        double d2 = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            d2 += d * d;
        }
        return from_distance(std::sqrt(d2));
    }
};

struct GpHyperparameters {
    MaternKernel kernel;
    double noise_variance = 1e-8;
};

/// Grid for the marginal-likelihood search. Signal variance candidates are
/// multiples of the observed value variance.
struct GpFitOptions {
    std::size_t grid_size = 8;
    double length_scale_min = 0.05;
    double length_scale_max = 2.0;
    double signal_variance_min_factor = 0.01;
    double signal_variance_max_factor = 10.0;
    double relative_jitter = 1e-6;
};

struct GpPrediction {
    double mean = 0.0;
    double variance = 0.0;

    [[nodiscard]] double stddev() const noexcept { return std::sqrt(variance); }
};

/// Exact GP regression posterior with a constant prior mean.
class GpSurrogate {
public:
    /// Conditions on `data` with fixed hyperparameters.
    static GpSurrogate condition(ObservationSet data, const GpHyperparameters& hyper, double prior_mean)
    {
        data.validate();
        if (data.empty()) {
            throw ArgumentError("cannot condition a GP on zero observations");
        }
        GpSurrogate gp;
        gp.data_ = std::move(data);
        gp.hyper_ = hyper;
        gp.prior_mean_ = prior_mean;
        const Eigen::MatrixXd dist = distance_matrix(gp.data_);
        if (!gp.factorize(dist)) {
            throw NumericError(singular_message(gp.covariance(dist)));
        }
        return gp;
    }

    /// Conditions on `data`, choosing length scale and signal variance by
    /// maximum log marginal likelihood over a log-spaced grid.
    static GpSurrogate fit(ObservationSet data, const GpFitOptions& options = {})
    {
        data.validate();
        if (data.empty()) {
            throw ArgumentError("cannot condition a GP on zero observations");
        }
        const double m = detail::mean(data.values);
        double base = detail::variance(data.values);
        if (!(base > 1e-300)) {
            base = m != 0.0 ? m * m : 1.0;
        }
        const Eigen::MatrixXd dist = distance_matrix(data);
        const auto ls_grid = log_grid(options.length_scale_min, options.length_scale_max, options.grid_size);
        const auto sv_grid = log_grid(options.signal_variance_min_factor * base,
                                      options.signal_variance_max_factor * base, options.grid_size);

        GpSurrogate best;
        double best_lml = -std::numeric_limits<double>::infinity();
        bool any = false;
        GpSurrogate trial;
        trial.data_ = std::move(data);
        trial.prior_mean_ = m;
        for (double ls : ls_grid) {
            for (double sv : sv_grid) {
                trial.hyper_ = GpHyperparameters{MaternKernel{sv, ls}, options.relative_jitter * base};
                if (!trial.factorize(dist)) {
                    continue;
                }
                const double lml = trial.log_marginal_likelihood();
                if (lml > best_lml) {
                    best_lml = lml;
                    best = trial;
                    any = true;
                }
            }
        }
        if (!any) {
            trial.hyper_ = GpHyperparameters{MaternKernel{sv_grid.front(), ls_grid.back()}, options.relative_jitter * base};
            throw NumericError(singular_message(trial.covariance(dist)));
        }
        return best;
    }

    [[nodiscard]] GpPrediction predict(std::span<const double> x) const
    {
        const auto n = static_cast<Eigen::Index>(data_.size());
        Eigen::VectorXd k(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            k(i) = hyper_.kernel(x, data_.inputs[static_cast<std::size_t>(i)]);
        }
        GpPrediction p;
        p.mean = prior_mean_ + k.dot(alpha_);
        const Eigen::VectorXd v = chol_.matrixL().solve(k);
        p.variance = std::max(0.0, hyper_.kernel.signal_variance - v.squaredNorm());
        return p;
    }

    [[nodiscard]] double log_marginal_likelihood() const
    {
        const auto n = static_cast<double>(data_.size());
        const Eigen::VectorXd y = centered();
        double log_det = 0.0;
        const Eigen::MatrixXd l = chol_.matrixL();
        for (Eigen::Index i = 0; i < l.rows(); ++i) {
            log_det += std::log(l(i, i));
        }
        return -0.5 * y.dot(alpha_) - log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
    }

    [[nodiscard]] const GpHyperparameters& hyperparameters() const noexcept { return hyper_; }
    [[nodiscard]] double prior_mean() const noexcept { return prior_mean_; }
    [[nodiscard]] const ObservationSet& observations() const noexcept { return data_; }

private:
    static std::vector<double> log_grid(double lo, double hi, std::size_t count)
    {
        std::vector<double> g(count);
        for (std::size_t i = 0; i < count; ++i) {
            const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
            g[i] = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
        }
        return g;
    }

    static Eigen::MatrixXd distance_matrix(const ObservationSet& data)
    {
        const auto n = static_cast<Eigen::Index>(data.size());
        Eigen::MatrixXd d(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            d(i, i) = 0.0;
            for (Eigen::Index j = 0; j < i; ++j) {
                const auto& a = data.inputs[static_cast<std::size_t>(i)];
                const auto& b = data.inputs[static_cast<std::size_t>(j)];
                double s = 0.0;
                for (std::size_t c = 0; c < a.size(); ++c) {
                    s += (a[c] - b[c]) * (a[c] - b[c]);
                }
                d(i, j) = d(j, i) = std::sqrt(s);
            }
        }
        return d;
    }

    [[nodiscard]] Eigen::MatrixXd covariance(const Eigen::MatrixXd& dist) const
    {
        Eigen::MatrixXd k = dist.unaryExpr([this](double r) { return hyper_.kernel.from_distance(r); });
        k.diagonal().array() += hyper_.noise_variance;
        return k;
    }

    [[nodiscard]] Eigen::VectorXd centered() const
    {
        Eigen::VectorXd y(static_cast<Eigen::Index>(data_.size()));
        for (std::size_t i = 0; i < data_.size(); ++i) {
            y(static_cast<Eigen::Index>(i)) = data_.values[i] - prior_mean_;
        }
        return y;
    }

    bool factorize(const Eigen::MatrixXd& dist)
    {
        chol_.compute(covariance(dist));
        if (chol_.info() != Eigen::Success) {
            return false;
        }
        alpha_ = chol_.solve(centered());
        return alpha_.allFinite();
    }

    static std::string singular_message(const Eigen::MatrixXd& k)
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
        const auto ev = es.eigenvalues();
        const double hi = ev.cwiseAbs().maxCoeff();
        const double lo = ev.minCoeff();
        std::ostringstream msg;
        msg << "GP kernel matrix is not positive definite after jitter (condition estimate "
            << (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()) << ", smallest eigenvalue " << lo << ")";
        return msg.str();
    }

    ObservationSet data_;
    GpHyperparameters hyper_;
    double prior_mean_ = 0.0;
    Eigen::LLT<Eigen::MatrixXd> chol_;
    Eigen::VectorXd alpha_;
};

inline double normal_pdf(double z) noexcept { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

inline double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Closed-form expected improvement for minimisation with margin `xi`.
inline double expected_improvement(double mean, double stddev, double best, double xi) noexcept
{
    const double delta = best - mean - xi;
    if (!(stddev > 0.0)) {
        return std::max(0.0, delta);
    }
    const double z = delta / stddev;
    return std::max(0.0, delta * normal_cdf(z) + stddev * normal_pdf(z));
}

inline double expected_improvement(const GpSurrogate& surrogate, std::span<const double> x, double best, double xi)
{
    const auto p = surrogate.predict(x);
    return expected_improvement(p.mean, p.stddev(), best, xi);
}

} // namespace lcforge
