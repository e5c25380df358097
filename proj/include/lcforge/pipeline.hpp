#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "detail/parallel.hpp"
#include "detail/seed.hpp"
#include "detail/stats.hpp"
#include "errors.hpp"
#include "fir.hpp"
#include "lc_engine.hpp"
#include "levels.hpp"
#include "metrics.hpp"
#include "optimize.hpp"
#include "sensitivity.hpp"
#include "signal.hpp"
#include "signal_io.hpp"
#include "split.hpp"

namespace lcforge {

enum class Method { uniform, logarithmic, random, bayesian };

inline constexpr std::array<Method, 4> kAllMethods{Method::uniform, Method::logarithmic, Method::random,
                                                   Method::bayesian};

inline std::string_view method_name(Method m) noexcept
{
    switch (m) {
    case Method::uniform:
        return "uniform";
    case Method::logarithmic:
        return "logarithmic";
    case Method::random:
        return "random";
    case Method::bayesian:
        return "bayesian";
    }
    return "?";
}

inline Method parse_method(std::string_view name)
{
    if (name == "uniform") {
        return Method::uniform;
    }
    if (name == "logarithmic" || name == "log") {
        return Method::logarithmic;
    }
    if (name == "random") {
        return Method::random;
    }
    if (name == "bayesian" || name == "bayes") {
        return Method::bayesian;
    }
    throw ArgumentError("unknown level method '" + std::string(name) + "'");
}

enum class SplitMode { patient_level, dataset_level };

inline SplitMode parse_split_mode(std::string_view name)
{
    if (name == "patient_level" || name == "patient") {
        return SplitMode::patient_level;
    }
    if (name == "dataset_level" || name == "dataset") {
        return SplitMode::dataset_level;
    }
    throw ArgumentError("unknown split mode '" + std::string(name) + "'");
}

struct FilterSettings {
    bool enabled = true;
    double low_hz = 0.5;
    double high_hz = 40.0;
    std::size_t taps = 27;
};

inline UniformSignal preprocess(const UniformSignal& signal, const FilterSettings& settings)
{
    if (!settings.enabled) {
        return signal;
    }
    const auto filter = design_fir_least_squares(
        settings.taps, bandpass_bands(settings.low_hz, settings.high_hz, signal.sample_rate()), signal.sample_rate());
    return apply_filter(filter, signal);
}

struct RecordSpec {
    std::string name;
    std::filesystem::path signal;
    std::filesystem::path annotations;
    std::optional<SignalFormat> format;
    std::size_t channel = 0;
};

struct ExperimentPlan {
    std::vector<RecordSpec> records;
    std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
    std::vector<std::size_t> level_counts{4, 8, 12, 16};
    SplitMode split = SplitMode::patient_level;
    std::size_t train_beats = 1000;
    std::optional<std::size_t> max_test_beats;
    double lambda = 0.0;
    std::uint64_t master_seed = 0;
    FilterSettings filter;
    std::size_t random_alpha = 10000;
    OptimizerConfig bayes;
    double hysteresis_max = 1e-2;
    std::size_t jobs = 1;
};

/// Loads every record named in the plan and preprocesses it.
inline AnnotatedRecord load_record(const RecordSpec& spec, const FilterSettings& filter)
{
    const auto format = spec.format ? *spec.format : guess_signal_format(spec.signal);
    auto signal = load_signal(spec.signal, format, spec.channel);
    auto beats = load_annotations(spec.annotations);
    beats.check_bounds(signal.size());
    return {spec.name.empty() ? spec.signal.stem().string() : spec.name, preprocess(signal, filter), std::move(beats)};
}

struct LearnedScheme {
    LevelScheme scheme;
    double train_objective = 0.0;
};

/// Learns a scheme from the train signal only.
inline LearnedScheme learn_scheme(Method method, std::size_t levels, const UniformSignal& train,
                                  const ExperimentPlan& plan, std::uint64_t seed)
{
    const auto range = signal_range(train);
    switch (method) {
    case Method::uniform:
    case Method::logarithmic: {
        auto scheme = method == Method::uniform ? uniform_levels(levels, range) : logarithmic_levels(levels, range);
        const double obj = evaluate_scheme(train, scheme, plan.lambda);
        return {std::move(scheme), obj};
    }
    case Method::random: {
        const auto space = SearchSpace::from_range(levels, range, plan.hysteresis_max);
        auto r = random_search(train, space, plan.random_alpha, plan.lambda, seed);
        return {std::move(r.scheme), r.objective};
    }
    case Method::bayesian: {
        const auto space = SearchSpace::from_range(levels, range, plan.hysteresis_max);
        auto cfg = plan.bayes;
        cfg.lambda = plan.lambda;
        cfg.seed = seed;
        auto r = bayes_optimize(train, space, cfg);
        if (r.abort_reason) {
            throw NumericError("Bayesian optimisation aborted: " + *r.abort_reason);
        }
        return {std::move(r.scheme), r.objective};
    }
    }
    throw ArgumentError("unhandled method");
}

inline std::uint64_t scheme_seed(std::uint64_t master, std::string_view record, Method method, std::size_t levels)
{
    std::ostringstream key;
    key << record << '/' << method_name(method) << '/' << levels;
    return detail::derive_seed(master, key.str());
}

struct ExperimentReport {
    std::string record;
    Method method = Method::uniform;
    std::size_t levels = 0;
    LevelScheme scheme{{0.0, 1.0}};
    double train_objective = 0.0;
    MetricsReport metrics;
};

struct RecordFailure {
    std::string record;
    std::string message;
};

struct ExperimentResult {
    std::vector<ExperimentReport> reports;
    std::vector<RecordFailure> failures;
};

namespace detail {

struct Job {
    std::size_t record;
    Method method;
    std::size_t levels;
};

inline void sort_reports(std::vector<ExperimentReport>& reports, const std::vector<std::string>& order)
{
    auto rank = [&](const std::string& name) {
        return static_cast<std::size_t>(std::find(order.begin(), order.end(), name) - order.begin());
    };
    std::stable_sort(reports.begin(), reports.end(), [&](const ExperimentReport& a, const ExperimentReport& b) {
        return std::tuple(rank(a.record), static_cast<int>(a.method), a.levels) <
               std::tuple(rank(b.record), static_cast<int>(b.method), b.levels);
    });
}

} // namespace detail

/// Runs the full flow on preloaded, preprocessed records: split, learn a
/// scheme per (method, level count) on the train part, sample and rebuild
/// the test part, compute metrics. Failures of one record are collected
/// without stopping the others.
inline ExperimentResult run_experiment(const ExperimentPlan& plan, std::span<const AnnotatedRecord> records)
{
    ExperimentResult result;
    std::vector<std::optional<TrainTestSplit>> splits(records.size());
    std::vector<std::string> names;
    for (std::size_t r = 0; r < records.size(); ++r) {
        names.push_back(records[r].name);
        try {
            splits[r] = split_train_test(records[r].signal, records[r].beats, plan.train_beats, plan.max_test_beats);
        } catch (const Error& e) {
            result.failures.push_back({records[r].name, e.what()});
        }
    }

    std::mutex lock;
    auto evaluate_on = [&](std::size_t r, Method m, std::size_t levels, const LearnedScheme& learned) {
        const auto& split = *splits[r];
        const auto events = lc_sample(split.test, learned.scheme);
        ExperimentReport rep{records[r].name, m, levels, learned.scheme, learned.train_objective,
                             evaluate(split.test, events, split.test_beats)};
        std::lock_guard guard(lock);
        result.reports.push_back(std::move(rep));
    };
    auto fail = [&](const std::string& record, const std::string& what) {
        std::lock_guard guard(lock);
        result.failures.push_back({record, what});
    };

    std::vector<detail::Job> jobs;
    if (plan.split == SplitMode::patient_level) {
        for (std::size_t r = 0; r < records.size(); ++r) {
            if (!splits[r]) {
                continue;
            }
            for (auto m : plan.methods) {
                for (auto l : plan.level_counts) {
                    jobs.push_back({r, m, l});
                }
            }
        }
        detail::parallel_for(jobs.size(), plan.jobs, [&](std::size_t j) {
            const auto [r, m, l] = jobs[j];
            try {
                const auto learned =
                    learn_scheme(m, l, splits[r]->train, plan, scheme_seed(plan.master_seed, records[r].name, m, l));
                evaluate_on(r, m, l, learned);
            } catch (const std::exception& e) {
                fail(records[r].name, std::string(method_name(m)) + "/" + std::to_string(l) + ": " + e.what());
            }
        });
    } else {
        std::vector<UniformSignal> parts;
        for (const auto& s : splits) {
            if (s) {
                parts.push_back(s->train);
            }
        }
        if (parts.empty()) {
            return result;
        }
        const auto composite = concatenate(parts);
        for (auto m : plan.methods) {
            for (auto l : plan.level_counts) {
                jobs.push_back({0, m, l});
            }
        }
        detail::parallel_for(jobs.size(), plan.jobs, [&](std::size_t j) {
            const auto [unused, m, l] = jobs[j];
            (void)unused;
            std::optional<LearnedScheme> learned;
            try {
                learned = learn_scheme(m, l, composite, plan, scheme_seed(plan.master_seed, "<dataset>", m, l));
            } catch (const std::exception& e) {
                fail("<dataset>", std::string(method_name(m)) + "/" + std::to_string(l) + ": " + e.what());
                return;
            }
            for (std::size_t r = 0; r < records.size(); ++r) {
                if (!splits[r]) {
                    continue;
                }
                try {
                    evaluate_on(r, m, l, *learned);
                } catch (const std::exception& e) {
                    fail(records[r].name, e.what());
                }
            }
        });
    }
    detail::sort_reports(result.reports, names);
    return result;
}

/// Loads the plan's records (isolating load failures) and runs it.
inline ExperimentResult run_experiment(const ExperimentPlan& plan)
{
    std::vector<AnnotatedRecord> records;
    std::vector<RecordFailure> load_failures;
    for (const auto& spec : plan.records) {
        try {
            records.push_back(load_record(spec, plan.filter));
        } catch (const Error& e) {
            load_failures.push_back({spec.name.empty() ? spec.signal.string() : spec.name, e.what()});
        }
    }
    auto result = run_experiment(plan, records);
    result.failures.insert(result.failures.begin(), load_failures.begin(), load_failures.end());
    return result;
}

/// Aggregate of one (method, level count) cell across records.
struct RollupCell {
    Method method = Method::uniform;
    std::size_t levels = 0;
    std::size_t records = 0;
    std::size_t beats = 0;
    double rmse_mean = 0.0;  // beat-weighted, uV
    double rmse_std = 0.0;
    double rmse_record_mean = 0.0;  // mean of per-record means, uV
    double rmse_record_std = 0.0;
    double srf_mean = 0.0;  // across records, fraction
    double srf_std = 0.0;
    double epe_mean = 0.0;  // beat-weighted, uV
    double epe_std = 0.0;
};

inline std::vector<RollupCell> rollup(std::span<const ExperimentReport> reports)
{
    std::map<std::pair<int, std::size_t>, std::vector<const ExperimentReport*>> groups;
    for (const auto& r : reports) {
        groups[{static_cast<int>(r.method), r.levels}].push_back(&r);
    }
    std::vector<RollupCell> cells;
    for (const auto& [key, members] : groups) {
        RollupCell c;
        c.method = static_cast<Method>(key.first);
        c.levels = key.second;
        c.records = members.size();
        std::vector<double> beat_rmse, beat_epe, rec_rmse, rec_srf;
        for (const auto* r : members) {
            std::vector<double> own;
            for (const auto& b : r->metrics.per_beat_rmse) {
                beat_rmse.push_back(b.rmse_uv);
                own.push_back(b.rmse_uv);
            }
            beat_epe.insert(beat_epe.end(), r->metrics.per_beat_error_per_event.begin(),
                            r->metrics.per_beat_error_per_event.end());
            rec_rmse.push_back(detail::mean(own));
            rec_srf.push_back(r->metrics.srf);
        }
        c.beats = beat_rmse.size();
        c.rmse_mean = detail::mean(beat_rmse);
        c.rmse_std = detail::stddev(beat_rmse);
        c.rmse_record_mean = detail::mean(rec_rmse);
        c.rmse_record_std = detail::stddev(rec_rmse);
        c.srf_mean = detail::mean(rec_srf);
        c.srf_std = detail::stddev(rec_srf);
        c.epe_mean = detail::mean(beat_epe);
        c.epe_std = detail::stddev(beat_epe);
        cells.push_back(c);
    }
    return cells;
}

/// Long form: one row per (method, levels).
inline void write_rollup_csv(std::ostream& out, std::span<const RollupCell> cells)
{
    out << "method,levels,records,beats,rmse_mean_uv,rmse_std_uv,rmse_record_mean_uv,rmse_record_std_uv,"
           "srf_mean_pct,srf_std_pct,rmse_srf_mean_uv,rmse_srf_std_uv\n"
        << std::setprecision(10);
    for (const auto& c : cells) {
        out << method_name(c.method) << ',' << c.levels << ',' << c.records << ',' << c.beats << ',' << c.rmse_mean
            << ',' << c.rmse_std << ',' << c.rmse_record_mean << ',' << c.rmse_record_std << ',' << 100.0 * c.srf_mean
            << ',' << 100.0 * c.srf_std << ',' << c.epe_mean << ',' << c.epe_std << '\n';
    }
}

/// Metric x levels rows, one "mean±std" column per method.
inline void write_table_csv(std::ostream& out, std::span<const RollupCell> cells)
{
    std::vector<Method> methods;
    std::vector<std::size_t> levels;
    for (const auto& c : cells) {
        if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) {
            methods.push_back(c.method);
        }
        if (std::find(levels.begin(), levels.end(), c.levels) == levels.end()) {
            levels.push_back(c.levels);
        }
    }
    std::sort(methods.begin(), methods.end());
    std::sort(levels.begin(), levels.end());
    out << "metric,levels";
    for (auto m : methods) {
        out << ',' << method_name(m);
    }
    out << '\n';
    auto find = [&](Method m, std::size_t l) -> const RollupCell* {
        for (const auto& c : cells) {
            if (c.method == m && c.levels == l) {
                return &c;
            }
        }
        return nullptr;
    };
    auto fmt = [](double mean, double sd, int precision, const char* suffix) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(precision) << mean << "\xC2\xB1" << sd << suffix;
        return s.str();
    };
    const char* metrics[] = {"RMSE (uV)", "SRF (%)", "RMSE*SRF (uV)"};
    for (int k = 0; k < 3; ++k) {
        for (auto l : levels) {
            out << metrics[k] << ',' << l;
            for (auto m : methods) {
                out << ',';
                if (const auto* c = find(m, l)) {
                    if (k == 0) {
                        out << fmt(c->rmse_mean, c->rmse_std, 0, "");
                    } else if (k == 1) {
                        out << fmt(100.0 * c->srf_mean, 100.0 * c->srf_std, 1, "%");
                    } else {
                        out << fmt(c->epe_mean, c->epe_std, 0, "");
                    }
                }
            }
            out << '\n';
        }
    }
}

namespace detail {

inline std::filesystem::path resolve_data_path(const std::filesystem::path& p, const std::filesystem::path& base)
{
    if (p.is_absolute()) {
        return p;
    }
    if (const char* root = std::getenv("LC_FORGE_DATA"); root != nullptr && *root != '\0') {
        return std::filesystem::path(root) / p;
    }
    return base / p;
}

} // namespace detail

/// Parses a JSON plan. Relative record paths resolve against LC_FORGE_DATA
/// when set, else against `base_dir`.
inline ExperimentPlan plan_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {})
{
    ExperimentPlan plan;
    try {
        for (const auto& r : j.at("records")) {
            RecordSpec spec;
            spec.signal = detail::resolve_data_path(r.at("signal").get<std::string>(), base_dir);
            spec.annotations = detail::resolve_data_path(r.at("annotations").get<std::string>(), base_dir);
            spec.name = r.value("name", spec.signal.stem().string());
            if (r.contains("format")) {
                spec.format = parse_signal_format(r.at("format").get<std::string>());
            }
            spec.channel = r.value("channel", std::size_t{0});
            plan.records.push_back(std::move(spec));
        }
        if (j.contains("methods")) {
            plan.methods.clear();
            for (const auto& m : j.at("methods")) {
                plan.methods.push_back(parse_method(m.get<std::string>()));
            }
        }
        plan.level_counts = j.value("level_counts", plan.level_counts);
        if (j.contains("split")) {
            plan.split = parse_split_mode(j.at("split").get<std::string>());
        }
        plan.train_beats = j.value("train_beats", plan.train_beats);
        if (j.contains("max_test_beats") && !j.at("max_test_beats").is_null()) {
            plan.max_test_beats = j.at("max_test_beats").get<std::size_t>();
        }
        plan.lambda = j.value("lambda", plan.lambda);
        plan.master_seed = j.value("master_seed", plan.master_seed);
        plan.hysteresis_max = j.value("hysteresis_max", plan.hysteresis_max);
        plan.jobs = j.value("jobs", plan.jobs);
        if (j.contains("filter")) {
            const auto& f = j.at("filter");
            plan.filter.enabled = f.value("enabled", plan.filter.enabled);
            plan.filter.low_hz = f.value("low_hz", plan.filter.low_hz);
            plan.filter.high_hz = f.value("high_hz", plan.filter.high_hz);
            plan.filter.taps = f.value("taps", plan.filter.taps);
        }
        if (j.contains("random")) {
            plan.random_alpha = j.at("random").value("alpha", plan.random_alpha);
        }
        if (j.contains("bayes")) {
            const auto& b = j.at("bayes");
            plan.bayes.initial_points = b.value("initial_points", plan.bayes.initial_points);
            plan.bayes.iterations = b.value("iterations", plan.bayes.iterations);
            plan.bayes.min_improvement = b.value("min_improvement", plan.bayes.min_improvement);
            plan.bayes.candidate_pool = b.value("candidate_pool", plan.bayes.candidate_pool);
            plan.bayes.early_stop = b.value("early_stop", plan.bayes.early_stop);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed experiment plan: ") + e.what());
    }
    for (auto l : plan.level_counts) {
        if (l < 2) {
            throw ArgumentError("level counts must be at least 2");
        }
    }
    return plan;
}

inline nlohmann::json plan_to_json(const ExperimentPlan& plan)
{
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : plan.records) {
        nlohmann::json rj{{"name", r.name}, {"signal", r.signal.string()}, {"annotations", r.annotations.string()},
                          {"channel", r.channel}};
        if (r.format) {
            rj["format"] = *r.format == SignalFormat::csv ? "csv" : "raw16";
        }
        records.push_back(std::move(rj));
    }
    std::vector<std::string> methods;
    for (auto m : plan.methods) {
        methods.emplace_back(method_name(m));
    }
    nlohmann::json j{{"records", records},
                     {"methods", methods},
                     {"level_counts", plan.level_counts},
                     {"split", plan.split == SplitMode::patient_level ? "patient_level" : "dataset_level"},
                     {"train_beats", plan.train_beats},
                     {"lambda", plan.lambda},
                     {"master_seed", plan.master_seed},
                     {"hysteresis_max", plan.hysteresis_max},
                     {"jobs", plan.jobs},
                     {"filter",
                      {{"enabled", plan.filter.enabled},
                       {"low_hz", plan.filter.low_hz},
                       {"high_hz", plan.filter.high_hz},
                       {"taps", plan.filter.taps}}},
                     {"random", {{"alpha", plan.random_alpha}}},
                     {"bayes", plan.bayes}};
    j["max_test_beats"] = plan.max_test_beats ? nlohmann::json(*plan.max_test_beats) : nlohmann::json(nullptr);
    return j;
}

} // namespace lcforge
