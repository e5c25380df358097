#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "detail/parallel.hpp"
#include "detail/seed.hpp"
#include "errors.hpp"
#include "lc_engine.hpp"
#include "metrics.hpp"
#include "optimize.hpp"
#include "signal.hpp"
#include "split.hpp"

namespace lcforge {

inline constexpr std::size_t kFactorCount = 5;
inline constexpr std::size_t kCornerCount = std::size_t{1} << kFactorCount;
inline constexpr std::size_t kModelTerms = 1 + kFactorCount + kFactorCount * (kFactorCount - 1) / 2;

struct FactorSpec {
    std::string name;
    double low = 0.0;
    double high = 1.0;

    /// Affine map from the coded interval [-1, 1] to natural units.
    [[nodiscard]] double natural(double coded) const noexcept
    {
        return 0.5 * (low + high) + 0.5 * (high - low) * coded;
    }

    [[nodiscard]] double coded(double natural_value) const noexcept
    {
        return (natural_value - 0.5 * (low + high)) / (0.5 * (high - low));
    }
};

using FactorSet = std::array<FactorSpec, kFactorCount>;

/// Bounds of the Bayesian-optimiser study: initial points, iterations,
/// minimum improvement, train length (beats) and lambda.
inline FactorSet default_factors()
{
    return {{{"I_p", 10, 200}, {"S_p", 20, 300}, {"xi", 1e-3, 5e-2}, {"T_l", 100, 1000}, {"lambda", 5e-2, 1.0}}};
}

inline void validate_factors(const FactorSet& factors)
{
    for (const auto& f : factors) {
        if (!(f.high > f.low)) {
            throw ArgumentError("factor '" + f.name + "' needs high > low");
        }
    }
}

struct FactorialRun {
    std::size_t corner = 0;
    std::array<int, kFactorCount> coded{};
    std::array<double, kFactorCount> natural{};
    std::optional<double> response;
    std::string error;
};

/// All 2^5 corners. Factor i is +1 in corner c when bit i of c is set.
inline std::vector<FactorialRun> full_factorial_design(const FactorSet& factors)
{
    validate_factors(factors);
    std::vector<FactorialRun> runs(kCornerCount);
    for (std::size_t c = 0; c < kCornerCount; ++c) {
        runs[c].corner = c;
        for (std::size_t i = 0; i < kFactorCount; ++i) {
            runs[c].coded[i] = ((c >> i) & 1U) ? 1 : -1;
            runs[c].natural[i] = factors[i].natural(runs[c].coded[i]);
        }
    }
    return runs;
}

/// Term labels in column order: constant, main effects, then pairs (i < j).
inline std::vector<std::string> model_terms(const FactorSet& factors)
{
    std::vector<std::string> names{"K0"};
    for (const auto& f : factors) {
        names.push_back(f.name);
    }
    for (std::size_t i = 0; i < kFactorCount; ++i) {
        for (std::size_t j = i + 1; j < kFactorCount; ++j) {
            names.push_back(factors[i].name + "*" + factors[j].name);
        }
    }
    return names;
}

/// Coded design matrix of the linear model with two-way interactions.
inline Eigen::MatrixXd design_matrix(std::span<const FactorialRun> runs)
{
    Eigen::MatrixXd x(static_cast<Eigen::Index>(runs.size()), static_cast<Eigen::Index>(kModelTerms));
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        Eigen::Index col = 0;
        x(row, col++) = 1.0;
        for (std::size_t i = 0; i < kFactorCount; ++i) {
            x(row, col++) = runs[r].coded[i];
        }
        for (std::size_t i = 0; i < kFactorCount; ++i) {
            for (std::size_t j = i + 1; j < kFactorCount; ++j) {
                x(row, col++) = runs[r].coded[i] * runs[r].coded[j];
            }
        }
    }
    return x;
}

struct ParetoEntry {
    std::size_t term = 0;
    double sum_of_squares = 0.0;
    double share = 0.0;
    double cumulative_share = 0.0;
    double residual_after = 0.0;
};

struct SensitivityResult {
    std::vector<std::string> terms;
    std::vector<double> coefficients;
    std::vector<double> sum_of_squares;
    std::vector<ParetoEntry> pareto;
    std::vector<double> residuals;
    double total_sum_of_squares = 0.0;
    double residual_sum_of_squares = 0.0;
};

/// OLS on the orthogonal coded design: K = X^T y / 32, SS_k = 32 K_k^2.
/// The Pareto list orders all 16 terms (constant included) by descending SS;
/// `residual_after` is the uncentred response SS left once that term and all
/// earlier ones are in the model.
inline SensitivityResult fit_interaction_model(std::span<const FactorialRun> runs,
                                               const FactorSet& factors = default_factors())
{
    if (runs.size() != kCornerCount) {
        throw ArgumentError("interaction model needs all 32 corners, got " + std::to_string(runs.size()));
    }
    std::array<bool, kCornerCount> seen{};
    for (const auto& r : runs) {
        if (!r.response || !std::isfinite(*r.response)) {
            throw ArgumentError("corner " + std::to_string(r.corner) + " has no response; design is incomplete");
        }
        std::size_t c = 0;
        for (std::size_t i = 0; i < kFactorCount; ++i) {
            if (r.coded[i] == 1) {
                c |= std::size_t{1} << i;
            } else if (r.coded[i] != -1) {
                throw ArgumentError("coded factor levels must be +/-1");
            }
        }
        if (seen[c]) {
            throw ArgumentError("duplicate corner in design");
        }
        seen[c] = true;
    }

    const Eigen::MatrixXd x = design_matrix(runs);
    Eigen::VectorXd y(static_cast<Eigen::Index>(runs.size()));
    for (std::size_t r = 0; r < runs.size(); ++r) {
        y(static_cast<Eigen::Index>(r)) = *runs[r].response;
    }
    const double n = static_cast<double>(runs.size());
    const Eigen::VectorXd k = x.transpose() * y / n;
    const Eigen::VectorXd resid = y - x * k;

    SensitivityResult out;
    out.terms = model_terms(factors);
    out.coefficients.assign(k.data(), k.data() + k.size());
    out.residuals.assign(resid.data(), resid.data() + resid.size());
    out.total_sum_of_squares = y.squaredNorm();
    out.residual_sum_of_squares = resid.squaredNorm();
    for (double c : out.coefficients) {
        out.sum_of_squares.push_back(n * c * c);
    }

    std::vector<std::size_t> order(kModelTerms);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return out.sum_of_squares[a] > out.sum_of_squares[b]; });
    const double model_ss = std::accumulate(out.sum_of_squares.begin(), out.sum_of_squares.end(), 0.0);
    double cumulative = 0.0;
    for (auto t : order) {
        cumulative += out.sum_of_squares[t];
        ParetoEntry e;
        e.term = t;
        e.sum_of_squares = out.sum_of_squares[t];
        e.share = model_ss > 0.0 ? out.sum_of_squares[t] / model_ss : 0.0;
        e.cumulative_share = model_ss > 0.0 ? cumulative / model_ss : 0.0;
        e.residual_after = std::max(0.0, out.total_sum_of_squares - cumulative);
        out.pareto.push_back(e);
    }
    return out;
}

/// One annotated record, already preprocessed.
struct AnnotatedRecord {
    std::string name;
    UniformSignal signal;
    BeatAnnotations beats;
};

struct SensitivityConfig {
    std::size_t levels = 8;
    double hysteresis_max = 1e-2;
    std::size_t candidate_pool = 1024;
    std::uint64_t master_seed = 0;
    std::optional<std::size_t> max_test_beats;
    std::size_t jobs = 1;
    GpFitOptions gp;
};

inline std::size_t round_count(double v) { return static_cast<std::size_t>(std::llround(std::max(0.0, v))); }

/// Runs Bayesian optimisation at every corner of the design. Each record is
/// split after T_l beats; the response is the mean over records of
/// SRF * RMSE (uV) on the test part. Failed corners keep `error` set and no
/// response.
inline std::vector<FactorialRun> run_sensitivity(std::span<const AnnotatedRecord> records, const FactorSet& factors,
                                                 const SensitivityConfig& config)
{
    if (records.empty()) {
        throw ArgumentError("sensitivity study needs at least one record");
    }
    auto runs = full_factorial_design(factors);
    detail::parallel_for(runs.size(), config.jobs, [&](std::size_t c) {
        auto& run = runs[c];
        try {
            OptimizerConfig oc;
            oc.initial_points = round_count(run.natural[0]);
            oc.iterations = round_count(run.natural[1]);
            oc.min_improvement = run.natural[2];
            oc.lambda = run.natural[4];
            oc.candidate_pool = config.candidate_pool;
            oc.gp = config.gp;
            const std::size_t train_beats = round_count(run.natural[3]);

            double acc = 0.0;
            for (std::size_t r = 0; r < records.size(); ++r) {
                const auto split = split_train_test(records[r].signal, records[r].beats, train_beats, config.max_test_beats);
                const auto space = SearchSpace::from_range(config.levels, signal_range(split.train), config.hysteresis_max);
                oc.seed = detail::derive_seed(config.master_seed, "sensitivity/" + std::to_string(c) + "/" + records[r].name);
                const auto bo = bayes_optimize(split.train, space, oc);
                if (bo.abort_reason) {
                    throw NumericError("Bayesian optimisation aborted: " + *bo.abort_reason);
                }
                const auto events = lc_sample(split.test, bo.scheme);
                const auto rebuilt = reconstruct_linear(events, GridSpec{split.test.sample_rate(), split.test.size()});
                acc += error_per_event(srf(events), rmse(split.test, rebuilt));
            }
            run.response = acc / static_cast<double>(records.size());
        } catch (const std::exception& e) {
            run.response.reset();
            run.error = e.what();
        }
    });
    return runs;
}

inline void write_runs_csv(std::ostream& out, std::span<const FactorialRun> runs, const FactorSet& factors)
{
    out << "corner";
    for (const auto& f : factors) {
        out << ",coded_" << f.name;
    }
    for (const auto& f : factors) {
        out << ',' << f.name;
    }
    out << ",response_uv,error\n" << std::setprecision(12);
    for (const auto& r : runs) {
        out << r.corner;
        for (int c : r.coded) {
            out << ',' << c;
        }
        for (double v : r.natural) {
            out << ',' << v;
        }
        out << ',';
        if (r.response) {
            out << *r.response;
        }
        std::string err = r.error;
        std::replace(err.begin(), err.end(), '"', '\'');
        out << ',' << '"' << err << '"' << '\n';
    }
}

/// Plot-ready rows in Pareto order: SS normalised to the constant term,
/// cumulative share, and residual SS after adding each term.
inline void write_pareto_csv(std::ostream& out, const SensitivityResult& result)
{
    const double constant_ss = result.sum_of_squares.front();
    out << "rank,term,sum_of_squares,ss_over_constant,share,cumulative_share,residual_after\n"
        << std::setprecision(12);
    for (std::size_t i = 0; i < result.pareto.size(); ++i) {
        const auto& p = result.pareto[i];
        out << i << ',' << result.terms[p.term] << ',' << p.sum_of_squares << ','
            << (constant_ss > 0.0 ? p.sum_of_squares / constant_ss : 0.0) << ',' << p.share << ','
            << p.cumulative_share << ',' << p.residual_after << '\n';
    }
}

inline void to_json(nlohmann::json& j, const SensitivityResult& r)
{
    nlohmann::json pareto = nlohmann::json::array();
    for (const auto& p : r.pareto) {
        pareto.push_back({{"term", r.terms[p.term]},
                          {"sum_of_squares", p.sum_of_squares},
                          {"share", p.share},
                          {"cumulative_share", p.cumulative_share},
                          {"residual_after", p.residual_after}});
    }
    nlohmann::json coefficients = nlohmann::json::object();
    for (std::size_t i = 0; i < r.terms.size(); ++i) {
        coefficients[r.terms[i]] = r.coefficients[i];
    }
    j = nlohmann::json{{"terms", r.terms},
                       {"coefficients", coefficients},
                       {"sum_of_squares", r.sum_of_squares},
                       {"pareto", pareto},
                       {"residuals", r.residuals},
                       {"total_sum_of_squares", r.total_sum_of_squares},
                       {"residual_sum_of_squares", r.residual_sum_of_squares}};
}

} // namespace lcforge
