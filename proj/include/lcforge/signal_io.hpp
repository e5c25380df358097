#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "signal.hpp"

namespace lcforge {

enum class SignalFormat { csv, raw16 };

inline SignalFormat parse_signal_format(std::string_view name)
{
    if (name == "csv") {
        return SignalFormat::csv;
    }
    if (name == "raw16") {
        return SignalFormat::raw16;
    }
    throw ArgumentError("unknown signal format '" + std::string(name) + "' (expected csv or raw16)");
}

/// Picks raw16 for *.raw16 / *.dat files, csv otherwise.
inline SignalFormat guess_signal_format(const std::filesystem::path& path)
{
    const auto ext = path.extension().string();
    return (ext == ".raw16" || ext == ".dat") ? SignalFormat::raw16 : SignalFormat::csv;
}

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& token, const std::string& what)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(token, &used);
    } catch (const std::exception&) {
        throw FormatError("cannot parse " + what + " '" + token + "'");
    }
    if (used != token.size()) {
        throw FormatError("trailing characters in " + what + " '" + token + "'");
    }
    return v;
}

inline double unit_to_mv(const std::string& unit)
{
    if (unit == "mV" || unit == "mv") {
        return 1.0;
    }
    if (unit == "uV" || unit == "uv" || unit == "\xC2\xB5V") {
        return 1e-3;
    }
    if (unit == "V" || unit == "v") {
        return 1e3;
    }
    throw FormatError("unsupported amplitude unit '" + unit + "'");
}

/// Sidecar lookup: `<stem>.meta.json`, then `<file>.meta.json`.
inline std::filesystem::path raw16_sidecar(const std::filesystem::path& path)
{
    auto by_stem = path;
    by_stem.replace_extension(".meta.json");
    if (std::filesystem::exists(by_stem)) {
        return by_stem;
    }
    auto by_name = path;
    by_name += ".meta.json";
    if (std::filesystem::exists(by_name)) {
        return by_name;
    }
    throw FormatError("raw16 signal '" + path.string() + "' has no .meta.json sidecar");
}

inline UniformSignal load_csv_signal(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open '" + path.string() + "'");
    }
    std::string line;
    std::optional<double> fs;
    double scale = 1.0;
    bool header_seen = false;
    std::vector<double> samples;
    std::optional<long long> last_index;
    std::size_t line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty()) {
            continue;
        }
        if (text.front() == '#') {
            if (header_seen) {
                continue;
            }
            header_seen = true;
            std::istringstream hs(text.substr(1));
            std::string kv;
            while (hs >> kv) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) {
                    throw FormatError("malformed header field '" + kv + "'");
                }
                const auto key = kv.substr(0, eq);
                const auto value = kv.substr(eq + 1);
                if (key == "fs") {
                    fs = parse_double(value, "sample rate");
                } else if (key == "unit") {
                    scale = unit_to_mv(value);
                }
            }
            continue;
        }
        if (!header_seen) {
            throw FormatError("CSV signal must start with a '# fs=<Hz> unit=mV' header");
        }
        const auto comma = text.find(',');
        double amplitude = 0.0;
        if (comma == std::string::npos) {
            amplitude = parse_double(text, "amplitude");
        } else {
            const auto idx_text = trim(std::string_view(text).substr(0, comma));
            const double idx = parse_double(idx_text, "sample index");
            if (!std::isfinite(idx) || idx != std::floor(idx)) {
                throw DataError("non-integer sample index on line " + std::to_string(line_no));
            }
            const auto index = static_cast<long long>(idx);
            if (last_index && index <= *last_index) {
                throw DataError("sample indices are not strictly increasing at line " + std::to_string(line_no));
            }
            last_index = index;
            amplitude = parse_double(trim(std::string_view(text).substr(comma + 1)), "amplitude");
        }
        if (!std::isfinite(amplitude)) {
            throw DataError("non-finite amplitude on line " + std::to_string(line_no));
        }
        samples.push_back(amplitude * scale);
    }
    if (!fs) {
        throw FormatError("CSV header lacks fs=<Hz>");
    }
    if (!(*fs > 0.0)) {
        throw FormatError("CSV header declares a non-positive sample rate");
    }
    return UniformSignal(std::move(samples), *fs);
}

inline UniformSignal load_raw16_signal(const std::filesystem::path& path, std::size_t channel)
{
    nlohmann::json meta;
    {
        std::ifstream ms(raw16_sidecar(path));
        try {
            meta = nlohmann::json::parse(ms);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("malformed raw16 sidecar: ") + e.what());
        }
    }
    double fs = 0.0;
    double gain = 0.0;
    long long baseline = 0;
    std::size_t channels = 1;
    try {
        fs = meta.at("fs").get<double>();
        gain = meta.at("gain").get<double>();
        baseline = meta.at("baseline").get<long long>();
        channels = meta.value("channels", std::size_t{1});
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("raw16 sidecar missing or mistyped field: ") + e.what());
    }
    if (!(fs > 0.0) || gain == 0.0 || channels == 0) {
        throw FormatError("raw16 sidecar needs fs > 0, gain != 0, channels >= 1");
    }
    if (channel >= channels) {
        throw ArgumentError("channel " + std::to_string(channel) + " not present in record");
    }

    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open '" + path.string() + "'");
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t frame = 2 * channels;
    if (bytes.size() % frame != 0) {
        throw FormatError("raw16 payload is not a whole number of sample frames");
    }
    const std::size_t n = bytes.size() / frame;
    std::vector<double> samples(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t at = i * frame + 2 * channel;
        const auto raw = static_cast<std::int16_t>(static_cast<std::uint16_t>(bytes[at]) |
                                                   static_cast<std::uint16_t>(bytes[at + 1] << 8));
        samples[i] = (static_cast<double>(raw) - static_cast<double>(baseline)) / gain;
    }
    return UniformSignal(std::move(samples), fs);
}

} // namespace detail

/// Reads a signal; amplitudes come back in mV.
inline UniformSignal load_signal(const std::filesystem::path& path, SignalFormat format, std::size_t channel = 0)
{
    if (!std::filesystem::exists(path)) {
        throw FormatError("signal file '" + path.string() + "' does not exist");
    }
    if (format == SignalFormat::csv) {
        if (channel != 0) {
            throw ArgumentError("CSV signals carry a single channel");
        }
        return detail::load_csv_signal(path);
    }
    return detail::load_raw16_signal(path, channel);
}

inline UniformSignal load_signal(const std::filesystem::path& path)
{
    return load_signal(path, guess_signal_format(path));
}

/// Writes `# fs=<Hz> unit=mV` followed by one amplitude per line.
inline void write_signal_csv(std::ostream& out, const UniformSignal& signal)
{
    out << "# fs=" << std::setprecision(17) << signal.sample_rate() << " unit=mV\n";
    for (double v : signal.samples()) {
        out << v << '\n';
    }
}

inline void save_signal_csv(const std::filesystem::path& path, const UniformSignal& signal)
{
    std::ofstream out(path);
    if (!out) {
        throw FormatError("cannot write '" + path.string() + "'");
    }
    write_signal_csv(out, signal);
}

/// Writes little-endian int16 samples plus the `<stem>.meta.json` sidecar.
inline void save_signal_raw16(const std::filesystem::path& path, const UniformSignal& signal, double gain,
                              std::int16_t baseline = 0)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot write '" + path.string() + "'");
    }
    for (double v : signal.samples()) {
        const double raw = std::round(v * gain + baseline);
        const auto clamped = static_cast<std::int16_t>(std::clamp(raw, -32768.0, 32767.0));
        const auto u = static_cast<std::uint16_t>(clamped);
        const char b[2] = {static_cast<char>(u & 0xFF), static_cast<char>(u >> 8)};
        out.write(b, 2);
    }
    auto meta_path = path;
    meta_path.replace_extension(".meta.json");
    std::ofstream meta(meta_path);
    meta << nlohmann::json{{"fs", signal.sample_rate()}, {"gain", gain}, {"baseline", baseline}}.dump(2) << '\n';
}

/// One R-peak sample index per line; blank lines and '#' comments skipped.
inline BeatAnnotations load_annotations(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open annotation file '" + path.string() + "'");
    }
    std::vector<std::size_t> peaks;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = detail::trim(line);
        if (text.empty() || text.front() == '#') {
            continue;
        }
        long long v = 0;
        std::size_t used = 0;
        try {
            v = std::stoll(text, &used);
        } catch (const std::exception&) {
            throw FormatError("annotation line " + std::to_string(line_no) + " is not an integer");
        }
        if (used != text.size()) {
            throw FormatError("annotation line " + std::to_string(line_no) + " is not an integer");
        }
        if (v < 0) {
            throw DataError("negative R-peak index on line " + std::to_string(line_no));
        }
        peaks.push_back(static_cast<std::size_t>(v));
    }
    return BeatAnnotations(std::move(peaks));
}

inline void save_annotations(const std::filesystem::path& path, const BeatAnnotations& beats)
{
    std::ofstream out(path);
    if (!out) {
        throw FormatError("cannot write '" + path.string() + "'");
    }
    for (auto p : beats.r_peaks()) {
        out << p << '\n';
    }
}

} // namespace lcforge
