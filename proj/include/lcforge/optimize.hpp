#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "detail/parallel.hpp"
#include "detail/seed.hpp"
#include "errors.hpp"
#include "gp.hpp"
#include "lc_engine.hpp"
#include "levels.hpp"
#include "metrics.hpp"
#include "signal.hpp"

namespace lcforge {

/// Box of admissible level schemes: `levels` amplitudes in [x_min, x_max]
/// plus one hysteresis width in [0, hysteresis_max]. Search vectors have
/// levels + 1 coordinates, each normalised to [0, 1].
struct SearchSpace {
    std::size_t levels = 8;
    double x_min = 0.0;
    double x_max = 1.0;
    double hysteresis_max = 1e-2;

    static SearchSpace from_range(std::size_t levels, const SignalRange& range, double hysteresis_max)
    {
        SearchSpace s{levels, range.x_min, range.x_max, hysteresis_max};
        s.validate();
        return s;
    }

    void validate() const
    {
        if (levels < 2) {
            throw ArgumentError("search space needs at least two levels");
        }
        if (!(x_max > x_min)) {
            throw DegenerateRangeError("search space needs x_max > x_min");
        }
        if (!(hysteresis_max >= 0.0)) {
            throw ArgumentError("hysteresis upper bound must be non-negative");
        }
    }

    [[nodiscard]] std::size_t dimension() const noexcept { return levels + 1; }
};

/// Builds a scheme, pulling the hysteresis just under the smallest level
/// gap when a draw would make neighbouring Schmitt pairs overlap.
inline LevelScheme make_scheme(std::vector<double> levels, double hysteresis)
{
    std::sort(levels.begin(), levels.end());
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < levels.size(); ++i) {
        if (levels[i] - levels[i - 1] >= kLevelMergeTolerance) {
            gap = std::min(gap, levels[i] - levels[i - 1]);
        }
    }
    if (hysteresis >= gap) {
        hysteresis = gap * (1.0 - 1e-9);
    }
    return LevelScheme(std::move(levels), hysteresis);
}

/// Sorts the level coordinates of a search vector in place.
inline void canonicalize(std::span<double> unit_vector, std::size_t levels)
{
    std::sort(unit_vector.begin(), unit_vector.begin() + static_cast<std::ptrdiff_t>(levels));
}

inline LevelScheme decode(const SearchSpace& space, std::span<const double> unit_vector)
{
    if (unit_vector.size() != space.dimension()) {
        throw ArgumentError("search vector has the wrong dimension");
    }
    std::vector<double> levels(space.levels);
    for (std::size_t i = 0; i < space.levels; ++i) {
        levels[i] = space.x_min + std::clamp(unit_vector[i], 0.0, 1.0) * (space.x_max - space.x_min);
    }
    return make_scheme(std::move(levels), std::clamp(unit_vector.back(), 0.0, 1.0) * space.hysteresis_max);
}

/// Objective value of one scheme on a signal (RMSE in mV times 1 + lambda*SRF).
inline double evaluate_scheme(const UniformSignal& signal, const LevelScheme& scheme, double lambda)
{
    return objective(signal, lc_sample(signal, scheme), lambda);
}

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits.
inline double unit_draw(std::mt19937_64& rng) noexcept
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// `count` distinct 53-bit integers, in draw order.
inline std::vector<double> unique_draws(std::size_t count, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(count);
    std::vector<double> out;
    out.reserve(count);
    while (out.size() < count) {
        const std::uint64_t v = rng() >> 11;
        if (seen.insert(v).second) {
            out.push_back(static_cast<double>(v));
        }
    }
    return out;
}

} // namespace detail

/// The alpha candidate schemes of a seeded random search. All alpha*L level
/// draws are min-max normalised as one pool, then cut into consecutive
/// chunks of L; the alpha hysteresis draws are normalised as their own pool.
inline std::vector<LevelScheme> random_search_candidates(const SearchSpace& space, std::size_t alpha,
                                                         std::uint64_t seed)
{
    space.validate();
    if (alpha == 0) {
        throw ArgumentError("random search needs alpha >= 1");
    }
    constexpr std::size_t domain = std::size_t{1} << 53;
    if (alpha > domain / space.levels) {
        throw ArgumentError("alpha * L exceeds the 2^53 unique-draw domain");
    }
    const auto level_pool = detail::min_max_normalize(
        detail::unique_draws(alpha * space.levels, detail::derive_seed(seed, "random-search/levels")));
    const auto hyst_pool =
        detail::min_max_normalize(detail::unique_draws(alpha, detail::derive_seed(seed, "random-search/hysteresis")));

    std::vector<LevelScheme> out;
    out.reserve(alpha);
    const double span = space.x_max - space.x_min;
    for (std::size_t i = 0; i < alpha; ++i) {
        std::vector<double> levels(space.levels);
        for (std::size_t j = 0; j < space.levels; ++j) {
            levels[j] = level_pool[i * space.levels + j] * span + space.x_min;
        }
        out.push_back(make_scheme(std::move(levels), hyst_pool[i] * space.hysteresis_max));
    }
    return out;
}

struct RandomSearchResult {
    LevelScheme scheme;
    double objective = 0.0;
    std::size_t best_index = 0;
    std::vector<double> objectives;
};

/// Evaluates every seeded candidate on `train` and returns the argmin
/// (lowest index on ties).
inline RandomSearchResult random_search(const UniformSignal& train, const SearchSpace& space, std::size_t alpha,
                                        double lambda, std::uint64_t seed, std::size_t jobs = 1)
{
    auto candidates = random_search_candidates(space, alpha, seed);
    std::vector<double> values(candidates.size());
    detail::parallel_for(candidates.size(), jobs,
                         [&](std::size_t i) { values[i] = evaluate_scheme(train, candidates[i], lambda); });
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] < values[best]) {
            best = i;
        }
    }
    return {std::move(candidates[best]), values[best], best, std::move(values)};
}

struct OptimizerConfig {
    std::size_t initial_points = 10;
    std::size_t iterations = 20;
    double min_improvement = 0.0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    std::size_t candidate_pool = 1024;
    bool early_stop = true;
    GpFitOptions gp;

    void validate() const
    {
        if (initial_points < 2) {
            throw ArgumentError("Bayesian optimisation needs at least two initial points");
        }
        if (iterations < 1) {
            throw ArgumentError("Bayesian optimisation needs at least one iteration");
        }
        if (!(min_improvement >= 0.0)) {
            throw ArgumentError("minimum improvement must be non-negative");
        }
        if (!(lambda >= 0.0)) {
            throw ArgumentError("lambda must be non-negative");
        }
        if (candidate_pool < 1) {
            throw ArgumentError("acquisition candidate pool must be non-empty");
        }
    }
};

enum class TracePhase { initial, acquired };

struct TraceEntry {
    std::size_t evaluation = 0;
    TracePhase phase = TracePhase::initial;
    double objective = 0.0;
    double best_so_far = 0.0;
    double expected_improvement = 0.0;
};

struct BayesResult {
    LevelScheme scheme;
    double objective = 0.0;
    std::vector<double> best_vector;
    std::vector<TraceEntry> trace;
    ObservationSet observations;
    std::size_t iterations_run = 0;
    bool stopped_early = false;
    std::optional<std::string> abort_reason;
};

/// GP/EI Bayesian optimisation of a level scheme on `train`: evaluate
/// `initial_points` seeded random vectors, then repeatedly condition the
/// surrogate, pick the candidate-pool argmax of expected improvement and
/// evaluate it. Stops after `iterations`, or earlier when the best EI
/// drops below the minimum improvement. A surrogate failure ends the run
/// with the partial trace and `abort_reason` set.
inline BayesResult bayes_optimize(const UniformSignal& train, const SearchSpace& space, const OptimizerConfig& config,
                                  std::size_t jobs = 1)
{
    space.validate();
    config.validate();
    const std::size_t dim = space.dimension();
    std::mt19937_64 init_rng(detail::derive_seed(config.seed, "bayes/initial"));
    std::mt19937_64 pool_rng(detail::derive_seed(config.seed, "bayes/candidates"));

    auto draw_vector = [&](std::mt19937_64& rng) {
        std::vector<double> v(dim);
        for (auto& c : v) {
            c = detail::unit_draw(rng);
        }
        canonicalize(v, space.levels);
        return v;
    };

    ObservationSet obs;
    std::vector<std::vector<double>> initial(config.initial_points);
    for (auto& v : initial) {
        v = draw_vector(init_rng);
    }
    std::vector<double> initial_values(initial.size());
    detail::parallel_for(initial.size(), jobs, [&](std::size_t i) {
        initial_values[i] = evaluate_scheme(train, decode(space, initial[i]), config.lambda);
    });

    BayesResult result{decode(space, initial.front()), std::numeric_limits<double>::infinity(), {}, {}, {}, 0, false,
                       std::nullopt};
    auto record = [&](std::vector<double> v, double value, TracePhase phase, double ei) {
        if (value < result.objective) {
            result.objective = value;
            result.best_vector = v;
        }
        result.trace.push_back({result.trace.size(), phase, value, result.objective, ei});
        obs.add(std::move(v), value);
    };
    for (std::size_t i = 0; i < initial.size(); ++i) {
        record(std::move(initial[i]), initial_values[i], TracePhase::initial, 0.0);
    }

    std::vector<std::vector<double>> pool(config.candidate_pool);
    std::vector<double> ei(config.candidate_pool);
    for (std::size_t it = 0; it < config.iterations; ++it) {
        GpSurrogate gp;
        try {
            gp = GpSurrogate::fit(obs, config.gp);
        } catch (const NumericError& e) {
            result.abort_reason = e.what();
            break;
        }
        for (auto& v : pool) {
            v = draw_vector(pool_rng);
        }
        const double best = result.objective;
        detail::parallel_for(pool.size(), jobs,
                             [&](std::size_t i) { ei[i] = expected_improvement(gp, pool[i], best, config.min_improvement); });
        const auto pick = static_cast<std::size_t>(std::max_element(ei.begin(), ei.end()) - ei.begin());
        if (config.early_stop && ei[pick] < config.min_improvement) {
            result.stopped_early = true;
            break;
        }
        const double value = evaluate_scheme(train, decode(space, pool[pick]), config.lambda);
        record(pool[pick], value, TracePhase::acquired, ei[pick]);
        ++result.iterations_run;
    }
    result.scheme = decode(space, result.best_vector);
    result.observations = std::move(obs);
    return result;
}

inline void to_json(nlohmann::json& j, const SearchSpace& s)
{
    j = nlohmann::json{{"levels", s.levels}, {"x_min", s.x_min}, {"x_max", s.x_max}, {"hysteresis_max", s.hysteresis_max}};
}

inline void to_json(nlohmann::json& j, const OptimizerConfig& c)
{
    j = nlohmann::json{{"initial_points", c.initial_points}, {"iterations", c.iterations},
                       {"min_improvement", c.min_improvement}, {"lambda", c.lambda},
                       {"seed", c.seed}, {"candidate_pool", c.candidate_pool},
                       {"early_stop", c.early_stop}};
}

/// iteration,phase,objective,best_so_far,expected_improvement
inline void write_trace_csv(std::ostream& out, std::span<const TraceEntry> trace)
{
    out << "iteration,phase,objective,best_so_far,expected_improvement\n" << std::setprecision(17);
    for (const auto& t : trace) {
        out << t.evaluation << ',' << (t.phase == TracePhase::initial ? "initial" : "acquired") << ',' << t.objective
            << ',' << t.best_so_far << ',' << t.expected_improvement << '\n';
    }
}

} // namespace lcforge
