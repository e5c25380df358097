// lcforge command-line driver.
//
// Settings resolve as flags > LC_FORGE_<OPTION> environment variables >
// --config JSON file > built-in defaults. Exit codes: 0 success, 1 data or
// numeric failure, 2 usage error.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <lcforge/lcforge.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SignalInput {
    std::string path;
    std::string format;
    std::size_t channel = 0;

    void bind(CLI::App* cmd, const std::string& name = "--signal")
    {
        cmd->add_option(name, path, "Input signal file (CSV or raw16)")->required();
        cmd->add_option("--format", format, "Signal format: csv or raw16 (default: from extension)");
        cmd->add_option("--channel", channel, "Channel of a multi-channel raw16 record")->capture_default_str();
    }

    [[nodiscard]] lcforge::UniformSignal load() const
    {
        const auto f = format.empty() ? lcforge::guess_signal_format(path) : lcforge::parse_signal_format(format);
        return lcforge::load_signal(path, f, channel);
    }
};

struct FilterOptions {
    bool no_filter = false;
    std::vector<double> band{0.5, 40.0};
    std::size_t taps = 27;

    void bind(CLI::App* cmd)
    {
        cmd->add_flag("--no-filter", no_filter, "Skip band-pass preprocessing");
        cmd->add_option("--band", band, "Pass band edges in Hz")->expected(2)->capture_default_str();
        cmd->add_option("--taps", taps, "FIR length (odd)")->capture_default_str();
    }

    [[nodiscard]] lcforge::FilterSettings settings() const { return {!no_filter, band.at(0), band.at(1), taps}; }
};

std::string option_key(const CLI::Option* opt)
{
    const auto& names = opt->get_lnames();
    if (!names.empty()) {
        return names.front();
    }
    return opt->get_name(true, false);
}

std::string env_name(std::string key)
{
    for (auto& c : key) {
        c = c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return "LC_FORGE_" + key;
}

std::string json_scalar(const json& v)
{
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_boolean()) {
        return v.get<bool>() ? "true" : "false";
    }
    return v.dump();
}

/// Translates one config/env entry into argument tokens for `cmd`.
void append_setting(std::vector<std::string>& args, CLI::App* cmd, const std::string& key, const json& value,
                    const std::string& origin)
{
    std::string name = key;
    for (auto& c : name) {
        if (c == '_') {
            c = '-';
        }
    }
    const CLI::Option* opt = cmd->get_option_no_throw("--" + name);
    if (opt == nullptr) {
        throw UsageError(origin + ": unknown setting '" + key + "' for command '" + cmd->get_name() + "'");
    }
    if (opt->get_expected_max() == 0 || (opt->get_type_size() == 0)) {
        args.push_back("--" + name + "=" + json_scalar(value));
        return;
    }
    args.push_back("--" + name);
    if (value.is_array()) {
        for (const auto& v : value) {
            args.push_back(json_scalar(v));
        }
    } else {
        args.push_back(json_scalar(value));
    }
}

std::optional<std::string> find_config_path(const std::vector<std::string>& args)
{
    std::optional<std::string> path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        }
    }
    return path;
}

/// Prepends file and environment settings to the user's arguments. With
/// every option taking its last value, later layers override earlier ones.
std::vector<std::string> layered_arguments(CLI::App* cmd, const std::vector<std::string>& user)
{
    std::vector<std::string> args;
    const auto config_path = find_config_path(user);
    if (!config_path) {
        if (const char* env = std::getenv("LC_FORGE_CONFIG"); env != nullptr && *env != '\0') {
            args.push_back("--config");
            args.emplace_back(env);
        }
    }
    const auto path = config_path ? config_path : (args.empty() ? std::nullopt : std::optional(args[1]));
    if (path) {
        std::ifstream in(*path);
        if (!in) {
            throw UsageError("cannot open config file '" + *path + "'");
        }
        json cfg;
        try {
            in >> cfg;
        } catch (const json::exception& e) {
            throw UsageError("config file '" + *path + "' is not valid JSON: " + e.what());
        }
        if (!cfg.is_object()) {
            throw UsageError("config file must hold a JSON object");
        }
        for (const auto& [key, value] : cfg.items()) {
            if (value.is_object()) {
                continue;
            }
            // top-level keys may belong to other commands; skip them quietly
            std::string name = key;
            std::replace(name.begin(), name.end(), '_', '-');
            if (cmd->get_option_no_throw("--" + name) != nullptr) {
                append_setting(args, cmd, key, value, "config");
            }
        }
        if (cfg.contains(cmd->get_name())) {
            const auto& section = cfg.at(cmd->get_name());
            if (!section.is_object()) {
                throw UsageError("config section '" + cmd->get_name() + "' must be an object");
            }
            for (const auto& [key, value] : section.items()) {
                append_setting(args, cmd, key, value, "config section '" + cmd->get_name() + "'");
            }
        }
    }
    for (const CLI::Option* opt : cmd->get_options()) {
        const std::string key = option_key(opt);
        if (key.empty() || key == "help" || key == "config") {
            continue;
        }
        if (const char* env = std::getenv(env_name(key).c_str()); env != nullptr) {
            if (opt->get_expected_max() == 0 || opt->get_type_size() == 0) {
                args.push_back("--" + key + "=" + env);
                continue;
            }
            args.push_back("--" + key);
            std::istringstream words(env);
            for (std::string w; words >> w;) {
                args.push_back(w);
            }
        }
    }
    args.insert(args.end(), user.begin(), user.end());
    return args;
}

json resolved_options(const CLI::App* cmd)
{
    json out = json::object();
    for (const CLI::Option* opt : cmd->get_options()) {
        const std::string key = option_key(opt);
        if (key.empty() || key == "help") {
            continue;
        }
        if (opt->get_expected_max() == 0) {
            out[key] = opt->count() > 0 && opt->as<bool>();
        } else if (opt->count() > 0) {
            const auto& r = opt->results();
            if (opt->get_expected_max() > 1 || opt->get_items_expected_max() > 1) {
                out[key] = r;
            } else {
                out[key] = r.empty() ? std::string() : r.back();
            }
        } else if (!opt->get_default_str().empty()) {
            out[key] = opt->get_default_str();
        } else {
            out[key] = nullptr;
        }
    }
    return out;
}

struct Manifest {
    json data;

    Manifest(const CLI::App* cmd, std::size_t jobs)
    {
        data["command"] = cmd->get_name();
        data["options"] = resolved_options(cmd);
        data["jobs"] = jobs;
        if (const char* root = std::getenv("LC_FORGE_DATA")) {
            data["data_root"] = root;
        } else {
            data["data_root"] = nullptr;
        }
    }

    /// Writes next to the main output: inside `dir`, beside `file`, or on
    /// stderr when output goes to stdout.
    void emit(const std::string& dir, const std::string& file, const std::string& explicit_path) const
    {
        fs::path target;
        if (!explicit_path.empty()) {
            target = explicit_path;
        } else if (!dir.empty()) {
            target = fs::path(dir) / "manifest.json";
        } else if (!file.empty() && file != "-") {
            target = file + ".manifest.json";
        }
        if (target.empty()) {
            std::cerr << "manifest: " << data.dump() << '\n';
            return;
        }
        std::ofstream out(target);
        if (!out) {
            throw lcforge::DataError("cannot write manifest '" + target.string() + "'");
        }
        out << data.dump(2) << '\n';
    }
};

std::ofstream open_output(const fs::path& path)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw lcforge::DataError("cannot write '" + path.string() + "'");
    }
    return out;
}

void write_text(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    auto out = open_output(path);
    out << text;
}

void write_json_file(const fs::path& path, const json& j)
{
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

std::string table_cell(double mean, double sd, int precision)
{
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << mean << "\xC2\xB1" << sd;
    return s.str();
}

lcforge::FactorSet factors_from_json(const json& j, lcforge::FactorSet factors)
{
    for (auto& f : factors) {
        if (j.contains(f.name)) {
            const auto& b = j.at(f.name);
            if (!b.is_array() || b.size() != 2) {
                throw UsageError("factor '" + f.name + "' needs [low, high]");
            }
            f.low = b.at(0).get<double>();
            f.high = b.at(1).get<double>();
        }
    }
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const auto& f : factors) {
            known = known || f.name == key;
        }
        if (!known) {
            throw UsageError("unknown factor '" + key + "'");
        }
    }
    return factors;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Level-crossing sampling emulation, level-scheme optimisation and evaluation", "lcforge"};
    app.set_version_flag("--version", "lcforge 1.0.0");
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();

    std::size_t jobs = lcforge::detail::default_jobs();
    std::string config_path;
    std::string manifest_path;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON settings file (flags and LC_FORGE_* variables override it)");
        cmd->add_option("--jobs,-j", jobs, "Worker threads")->check(CLI::PositiveNumber);
        cmd->add_option("--manifest", manifest_path, "Where to write the resolved-settings manifest");
    };

    // filter
    auto* filter_cmd = app.add_subcommand("filter", "Band-pass an input signal with a least-squares FIR filter");
    SignalInput filter_in;
    FilterOptions filter_opts;
    std::string filter_out;
    std::string filter_taps_out;
    filter_in.bind(filter_cmd, "--in,--signal");
    filter_opts.bind(filter_cmd);
    filter_cmd->add_option("--out,-o", filter_out, "Output signal CSV (default: stdout)");
    filter_cmd->add_option("--taps-out", filter_taps_out, "Write the designed coefficients as CSV");
    add_common(filter_cmd);

    // levels
    auto* levels_cmd = app.add_subcommand("levels", "Compute a static level scheme from a signal's range");
    std::string levels_method;
    std::size_t levels_count = 8;
    SignalInput levels_in;
    std::string levels_out;
    levels_cmd->add_option("method,--method", levels_method, "uniform or logarithmic (log)")
        ->required()
        ->check(CLI::IsMember({"uniform", "logarithmic", "log"}));
    levels_cmd->add_option("-L,--levels", levels_count, "Number of levels")->check(CLI::Range(2, 65535));
    levels_in.bind(levels_cmd);
    levels_cmd->add_option("--out,-o", levels_out, "Output scheme JSON (default: stdout)");
    add_common(levels_cmd);

    // sample
    auto* sample_cmd = app.add_subcommand("sample", "Level-crossing sample a signal into an event list");
    SignalInput sample_in;
    std::string sample_scheme;
    std::string sample_out;
    sample_in.bind(sample_cmd);
    sample_cmd->add_option("--scheme", sample_scheme, "Level scheme JSON")->required();
    sample_cmd->add_option("--out,-o", sample_out, "Event file: .csv, or .bin/.lcev for binary (default: CSV on stdout)");
    add_common(sample_cmd);

    // reconstruct
    auto* recon_cmd = app.add_subcommand("reconstruct", "Rebuild a uniform signal from events by linear interpolation");
    std::string recon_events;
    std::string recon_out;
    double recon_rate = 0.0;
    std::size_t recon_samples = 0;
    recon_cmd->add_option("--events", recon_events, "Event file")->required();
    recon_cmd->add_option("--out,-o", recon_out, "Output signal CSV (default: stdout)");
    recon_cmd->add_option("--rate", recon_rate, "Grid sample rate in Hz (default: the source rate)");
    recon_cmd->add_option("--samples", recon_samples, "Grid length (default: the source length)");
    add_common(recon_cmd);

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Compare a signal against the reconstruction of its events");
    SignalInput eval_in;
    std::string eval_events;
    std::string eval_annotations;
    std::string eval_out;
    std::string eval_beats_out;
    double eval_lambda = 0.0;
    eval_in.bind(eval_cmd);
    eval_cmd->add_option("--events", eval_events, "Event file")->required();
    eval_cmd->add_option("--annotations", eval_annotations, "R-peak index file")->required();
    eval_cmd->add_option("--lambda", eval_lambda, "Event-count penalty of the objective")->check(CLI::NonNegativeNumber);
    eval_cmd->add_option("--out,-o", eval_out, "Metrics report JSON");
    eval_cmd->add_option("--beats-out", eval_beats_out, "Per-beat CSV");
    add_common(eval_cmd);

    // optimize
    auto* opt_cmd = app.add_subcommand("optimize", "Search for a level scheme by random search or Bayesian optimisation");
    std::string opt_method;
    SignalInput opt_in;
    std::string opt_annotations;
    std::size_t opt_train_beats = 1000;
    std::size_t opt_levels = 8;
    double opt_lambda = 0.0;
    std::uint64_t opt_seed = 0;
    double opt_hyst_max = 1e-2;
    std::size_t opt_alpha = 10000;
    lcforge::OptimizerConfig opt_bayes;
    bool opt_no_early_stop = false;
    std::string opt_out_dir;
    opt_cmd->add_option("method,--method", opt_method, "random or bayes")
        ->required()
        ->check(CLI::IsMember({"random", "bayes", "bayesian"}));
    opt_in.bind(opt_cmd);
    opt_cmd->add_option("--annotations", opt_annotations, "R-peak file; when given only the first train beats are used");
    opt_cmd->add_option("--train-beats", opt_train_beats, "Beats in the train split")->check(CLI::PositiveNumber);
    opt_cmd->add_option("-L,--levels", opt_levels, "Number of levels")->check(CLI::Range(2, 65535));
    opt_cmd->add_option("--lambda", opt_lambda, "Event-count penalty")->check(CLI::NonNegativeNumber);
    opt_cmd->add_option("--seed", opt_seed, "Random seed");
    opt_cmd->add_option("--hysteresis-max", opt_hyst_max, "Upper bound of the hysteresis search (mV)")
        ->check(CLI::NonNegativeNumber);
    opt_cmd->add_option("--alpha", opt_alpha, "Random-search candidate count")->check(CLI::PositiveNumber);
    opt_cmd->add_option("--initial-points", opt_bayes.initial_points, "Initial random evaluations");
    opt_cmd->add_option("--iterations", opt_bayes.iterations, "Acquisition iterations");
    opt_cmd->add_option("--xi", opt_bayes.min_improvement, "Minimum improvement margin")->check(CLI::NonNegativeNumber);
    opt_cmd->add_option("--candidate-pool", opt_bayes.candidate_pool, "Acquisition candidates per iteration");
    opt_cmd->add_flag("--no-early-stop", opt_no_early_stop, "Run every iteration even when EI falls below xi");
    opt_cmd->add_option("--out-dir,-o", opt_out_dir, "Directory for scheme.json, trace.csv and manifest.json")->required();
    add_common(opt_cmd);

    // experiment
    auto* exp_cmd = app.add_subcommand("experiment", "Run a filter/split/optimise/sample/evaluate plan over records");
    std::string exp_plan;
    std::string exp_out_dir;
    std::optional<std::uint64_t> exp_seed;
    std::optional<std::size_t> exp_max_test_beats;
    exp_cmd->add_option("--plan", exp_plan, "Experiment plan JSON")->required();
    exp_cmd->add_option("--out-dir,-o", exp_out_dir, "Result directory")->required();
    exp_cmd->add_option("--seed", exp_seed, "Override the plan's master seed");
    exp_cmd->add_option("--max-test-beats", exp_max_test_beats, "Cap on evaluated test beats per record");
    add_common(exp_cmd);

    // sensitivity
    auto* sens_cmd = app.add_subcommand("sensitivity", "Two-level full-factorial study of the Bayesian optimiser settings");
    std::string sens_plan;
    std::string sens_out_dir;
    std::optional<std::uint64_t> sens_seed;
    std::optional<std::size_t> sens_max_test_beats;
    sens_cmd->add_option("--plan", sens_plan, "Sensitivity plan JSON (records, optional factor bounds)")->required();
    sens_cmd->add_option("--out-dir,-o", sens_out_dir, "Result directory")->required();
    sens_cmd->add_option("--seed", sens_seed, "Override the plan's master seed");
    sens_cmd->add_option("--max-test-beats", sens_max_test_beats, "Cap on evaluated test beats per record");
    add_common(sens_cmd);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic ECG record and its R-peak annotations");
    double synth_duration = 60.0;
    double synth_hr = 72.0;
    double synth_fs = 128.0;
    std::uint64_t synth_seed = 1;
    double synth_noise = 0.0;
    std::string synth_out;
    std::string synth_ann_out;
    synth_cmd->add_option("--duration", synth_duration, "Seconds")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--heart-rate", synth_hr, "Beats per minute")->check(CLI::Range(30.0, 220.0));
    synth_cmd->add_option("--rate", synth_fs, "Sample rate in Hz")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", synth_seed, "Random seed");
    synth_cmd->add_option("--noise", synth_noise, "Gaussian noise standard deviation (mV)")->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--out,-o", synth_out, "Signal CSV")->required();
    synth_cmd->add_option("--annotations-out", synth_ann_out, "R-peak index file")->required();
    add_common(synth_cmd);

    std::vector<std::string> user(argv + 1, argv + argc);
    try {
        CLI::App* target = nullptr;
        if (!user.empty()) {
            for (auto* sub : app.get_subcommands({})) {
                if (sub->check_name(user.front())) {
                    target = sub;
                }
            }
        }
        std::vector<std::string> args;
        if (target != nullptr) {
            args = layered_arguments(target, {user.begin() + 1, user.end()});
            args.insert(args.begin(), user.front());
        } else {
            args = user;
        }
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (filter_cmd->parsed()) {
            const Manifest manifest(filter_cmd, jobs);
            const auto settings = filter_opts.settings();
            if (!settings.enabled) {
                std::ifstream in(filter_in.path, std::ios::binary);
                if (!in) {
                    throw lcforge::DataError("cannot open '" + filter_in.path + "'");
                }
                std::ostringstream bytes;
                bytes << in.rdbuf();
                write_text(filter_out, bytes.str());
            } else {
                const auto signal = filter_in.load();
                const auto fir = lcforge::design_fir_least_squares(
                    settings.taps, lcforge::bandpass_bands(settings.low_hz, settings.high_hz, signal.sample_rate()),
                    signal.sample_rate());
                std::ostringstream text;
                lcforge::write_signal_csv(text, lcforge::apply_filter(fir, signal));
                write_text(filter_out, text.str());
                if (!filter_taps_out.empty()) {
                    auto out = open_output(filter_taps_out);
                    lcforge::write_taps_csv(out, fir);
                }
            }
            manifest.emit("", filter_out, manifest_path);
        } else if (levels_cmd->parsed()) {
            const Manifest manifest(levels_cmd, jobs);
            const auto signal = levels_in.load();
            const auto range = lcforge::signal_range(signal);
            const auto method = lcforge::parse_method(levels_method);
            const auto scheme = method == lcforge::Method::uniform ? lcforge::uniform_levels(levels_count, range)
                                                                   : lcforge::logarithmic_levels(levels_count, range);
            json j = scheme;
            write_text(levels_out, j.dump(2) + "\n");
            manifest.emit("", levels_out, manifest_path);
        } else if (sample_cmd->parsed()) {
            const Manifest manifest(sample_cmd, jobs);
            const auto signal = sample_in.load();
            std::ifstream sin(sample_scheme);
            if (!sin) {
                throw lcforge::DataError("cannot open scheme '" + sample_scheme + "'");
            }
            json sj;
            try {
                sin >> sj;
            } catch (const json::exception& e) {
                throw lcforge::FormatError("scheme '" + sample_scheme + "' is not valid JSON: " + e.what());
            }
            const auto events = lcforge::lc_sample(signal, lcforge::level_scheme_from_json(sj));
            if (sample_out.empty() || sample_out == "-") {
                lcforge::write_events_csv(std::cout, events);
            } else {
                if (fs::path(sample_out).has_parent_path()) {
                    fs::create_directories(fs::path(sample_out).parent_path());
                }
                lcforge::save_events(sample_out, events);
            }
            manifest.emit("", sample_out, manifest_path);
        } else if (recon_cmd->parsed()) {
            const Manifest manifest(recon_cmd, jobs);
            const auto events = lcforge::load_events(recon_events);
            const lcforge::GridSpec grid{recon_rate > 0.0 ? recon_rate : events.source_sample_rate,
                                         recon_samples > 0 ? recon_samples : events.source_sample_count};
            std::ostringstream text;
            lcforge::write_signal_csv(text, lcforge::reconstruct_linear(events, grid));
            write_text(recon_out, text.str());
            manifest.emit("", recon_out, manifest_path);
        } else if (eval_cmd->parsed()) {
            const Manifest manifest(eval_cmd, jobs);
            const auto signal = eval_in.load();
            const auto events = lcforge::load_events(eval_events);
            const auto beats = lcforge::load_annotations(eval_annotations);
            const auto report = lcforge::evaluate(signal, events, beats);
            const double obj = lcforge::objective(signal, events, eval_lambda);
            for (const auto& w : report.warnings) {
                std::cerr << "warning: " << w << '\n';
            }
            std::cout << "beats,rmse_uv,srf_pct,rmse_srf_uv,rmse_overall_uv,objective_mv,lambda,events,samples\n"
                      << report.rmse_summary.count << ','
                      << table_cell(report.rmse_summary.mean, report.rmse_summary.std, 1) << ','
                      << std::setprecision(6) << 100.0 * report.srf << ','
                      << table_cell(report.error_per_event_summary.mean, report.error_per_event_summary.std, 2) << ','
                      << std::setprecision(10) << report.rmse_overall << ',' << obj << ',' << eval_lambda << ','
                      << report.event_count << ',' << report.sample_count << '\n';
            if (!eval_out.empty()) {
                json j = report;
                j["lambda"] = eval_lambda;
                j["objective_mv"] = obj;
                write_json_file(eval_out, j);
            }
            if (!eval_beats_out.empty()) {
                auto out = open_output(eval_beats_out);
                lcforge::write_beats_csv(out, report);
            }
            manifest.emit("", eval_out, manifest_path);
        } else if (opt_cmd->parsed()) {
            Manifest manifest(opt_cmd, jobs);
            auto train = opt_in.load();
            if (!opt_annotations.empty()) {
                const auto beats = lcforge::load_annotations(opt_annotations);
                train = lcforge::split_train_test(train, beats, opt_train_beats).train;
            }
            const auto range = lcforge::signal_range(train);
            const auto space = lcforge::SearchSpace::from_range(opt_levels, range, opt_hyst_max);
            fs::create_directories(opt_out_dir);
            manifest.data["search_space"] = space;
            manifest.data["train_samples"] = train.size();
            json scheme_json;
            if (opt_method == "random") {
                const auto r = lcforge::random_search(train, space, opt_alpha, opt_lambda, opt_seed, jobs);
                scheme_json = r.scheme;
                scheme_json["objective"] = r.objective;
                auto out = open_output(fs::path(opt_out_dir) / "trace.csv");
                out << "iteration,objective,best_so_far\n" << std::setprecision(17);
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < r.objectives.size(); ++i) {
                    best = std::min(best, r.objectives[i]);
                    out << i << ',' << r.objectives[i] << ',' << best << '\n';
                }
                manifest.data["random"] = {{"alpha", opt_alpha}, {"seed", opt_seed}, {"lambda", opt_lambda},
                                           {"best_index", r.best_index}};
            } else {
                auto cfg = opt_bayes;
                cfg.lambda = opt_lambda;
                cfg.seed = opt_seed;
                cfg.early_stop = !opt_no_early_stop;
                const auto r = lcforge::bayes_optimize(train, space, cfg, jobs);
                auto out = open_output(fs::path(opt_out_dir) / "trace.csv");
                lcforge::write_trace_csv(out, r.trace);
                manifest.data["bayes"] = cfg;
                manifest.data["bayes"]["iterations_run"] = r.iterations_run;
                manifest.data["bayes"]["stopped_early"] = r.stopped_early;
                if (r.abort_reason) {
                    manifest.emit(opt_out_dir, "", manifest_path);
                    throw lcforge::NumericError("Bayesian optimisation aborted: " + *r.abort_reason);
                }
                scheme_json = r.scheme;
                scheme_json["objective"] = r.objective;
            }
            write_json_file(fs::path(opt_out_dir) / "scheme.json", scheme_json);
            manifest.emit(opt_out_dir, "", manifest_path);
            std::cout << scheme_json.dump() << '\n';
        } else if (exp_cmd->parsed()) {
            Manifest manifest(exp_cmd, jobs);
            std::ifstream in(exp_plan);
            if (!in) {
                throw lcforge::DataError("cannot open plan '" + exp_plan + "'");
            }
            json pj;
            try {
                in >> pj;
            } catch (const json::exception& e) {
                throw lcforge::FormatError("plan '" + exp_plan + "' is not valid JSON: " + e.what());
            }
            auto plan = lcforge::plan_from_json(pj, fs::absolute(exp_plan).parent_path());
            if (exp_seed) {
                plan.master_seed = *exp_seed;
            }
            if (exp_max_test_beats) {
                plan.max_test_beats = *exp_max_test_beats;
            }
            plan.jobs = jobs;
            manifest.data["plan"] = lcforge::plan_to_json(plan);
            const auto result = lcforge::run_experiment(plan);

            const fs::path root(exp_out_dir);
            fs::create_directories(root / "reports");
            json seeds = json::object();
            for (const auto& rep : result.reports) {
                json j{{"record", rep.record},
                       {"method", lcforge::method_name(rep.method)},
                       {"levels", rep.levels},
                       {"scheme", rep.scheme},
                       {"train_objective", rep.train_objective},
                       {"metrics", rep.metrics}};
                const std::string stem = std::string(lcforge::method_name(rep.method)) + "_L" + std::to_string(rep.levels);
                write_json_file(root / "reports" / rep.record / (stem + ".json"), j);
                const std::string seed_key = plan.split == lcforge::SplitMode::dataset_level ? "<dataset>" : rep.record;
                seeds[rep.record + "/" + stem] =
                    lcforge::scheme_seed(plan.master_seed, seed_key, rep.method, rep.levels);
            }
            manifest.data["derived_seeds"] = seeds;
            const auto cells = lcforge::rollup(result.reports);
            {
                auto out = open_output(root / "rollup.csv");
                lcforge::write_rollup_csv(out, cells);
            }
            {
                auto out = open_output(root / "table.csv");
                lcforge::write_table_csv(out, cells);
            }
            json errors = json::array();
            for (const auto& f : result.failures) {
                errors.push_back({{"record", f.record}, {"error", f.message}});
                std::cerr << "error: " << f.record << ": " << f.message << '\n';
            }
            write_json_file(root / "errors.json", errors);
            manifest.emit(exp_out_dir, "", manifest_path);
            std::cout << "reports: " << result.reports.size() << ", failures: " << result.failures.size() << '\n';
            if (!result.failures.empty()) {
                return kExitData;
            }
        } else if (sens_cmd->parsed()) {
            Manifest manifest(sens_cmd, jobs);
            std::ifstream in(sens_plan);
            if (!in) {
                throw lcforge::DataError("cannot open plan '" + sens_plan + "'");
            }
            json pj;
            try {
                in >> pj;
            } catch (const json::exception& e) {
                throw lcforge::FormatError("plan '" + sens_plan + "' is not valid JSON: " + e.what());
            }
            const auto plan = lcforge::plan_from_json(pj, fs::absolute(sens_plan).parent_path());
            lcforge::SensitivityConfig cfg;
            cfg.levels = pj.value("levels", cfg.levels);
            cfg.hysteresis_max = plan.hysteresis_max;
            cfg.candidate_pool = plan.bayes.candidate_pool;
            cfg.master_seed = sens_seed ? *sens_seed : plan.master_seed;
            cfg.max_test_beats = sens_max_test_beats ? sens_max_test_beats : plan.max_test_beats;
            cfg.jobs = jobs;
            auto factors = lcforge::default_factors();
            if (pj.contains("factors")) {
                factors = factors_from_json(pj.at("factors"), factors);
            }
            lcforge::validate_factors(factors);
            std::vector<lcforge::AnnotatedRecord> records;
            for (const auto& spec : plan.records) {
                records.push_back(lcforge::load_record(spec, plan.filter));
            }
            json fj = json::object();
            for (const auto& f : factors) {
                fj[f.name] = {f.low, f.high};
            }
            manifest.data["factors"] = fj;
            manifest.data["levels"] = cfg.levels;
            manifest.data["master_seed"] = cfg.master_seed;
            manifest.data["plan"] = lcforge::plan_to_json(plan);

            const auto runs = lcforge::run_sensitivity(records, factors, cfg);
            const fs::path root(sens_out_dir);
            fs::create_directories(root);
            {
                auto out = open_output(root / "runs.csv");
                lcforge::write_runs_csv(out, runs, factors);
            }
            std::size_t failed = 0;
            for (const auto& r : runs) {
                if (!r.response) {
                    ++failed;
                    std::cerr << "error: corner " << r.corner << ": " << r.error << '\n';
                }
            }
            if (failed == 0) {
                const auto fit = lcforge::fit_interaction_model(runs, factors);
                write_json_file(root / "result.json", fit);
                auto out = open_output(root / "pareto.csv");
                lcforge::write_pareto_csv(out, fit);
            }
            manifest.emit(sens_out_dir, "", manifest_path);
            std::cout << "corners: " << runs.size() << ", failed: " << failed << '\n';
            if (failed != 0) {
                return kExitData;
            }
        } else if (synth_cmd->parsed()) {
            const Manifest manifest(synth_cmd, jobs);
            const auto ecg = lcforge::synthesize_ecg(synth_duration, synth_hr, synth_fs, synth_seed, synth_noise);
            if (fs::path(synth_out).has_parent_path()) {
                fs::create_directories(fs::path(synth_out).parent_path());
            }
            lcforge::save_signal_csv(synth_out, ecg.signal);
            lcforge::save_annotations(synth_ann_out, ecg.beats);
            manifest.emit("", synth_out, manifest_path);
        }
    } catch (const lcforge::DegenerateRangeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const lcforge::ArgumentError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitOk;
}
