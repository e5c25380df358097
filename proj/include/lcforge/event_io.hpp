#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "errors.hpp"
#include "lc_engine.hpp"
#include "signal_io.hpp"

namespace lcforge {

// Text form:
//   # fs=<Hz> samples=<n>
//   time_s,amplitude_mv,level_index
//   <one row per event>
inline void write_events_csv(std::ostream& out, const EventStream& stream)
{
    out << std::setprecision(17) << "# fs=" << stream.source_sample_rate << " samples=" << stream.source_sample_count
        << '\n';
    out << "time_s,amplitude_mv,level_index\n";
    for (const auto& e : stream.events) {
        out << e.time << ',' << e.amplitude << ',' << e.level_index << '\n';
    }
}

inline EventStream read_events_csv(std::istream& in)
{
    EventStream stream;
    std::string line;
    bool meta = false;
    bool columns = false;
    while (std::getline(in, line)) {
        const auto text = detail::trim(line);
        if (text.empty()) {
            continue;
        }
        if (text.front() == '#') {
            std::istringstream hs(text.substr(1));
            std::string kv;
            while (hs >> kv) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) {
                    throw FormatError("malformed event header field '" + kv + "'");
                }
                const auto key = kv.substr(0, eq);
                const auto value = kv.substr(eq + 1);
                if (key == "fs") {
                    stream.source_sample_rate = detail::parse_double(value, "sample rate");
                } else if (key == "samples") {
                    stream.source_sample_count = static_cast<std::size_t>(detail::parse_double(value, "sample count"));
                }
            }
            meta = true;
            continue;
        }
        if (!columns) {
            if (text != "time_s,amplitude_mv,level_index") {
                throw FormatError("event CSV lacks the 'time_s,amplitude_mv,level_index' column header");
            }
            columns = true;
            continue;
        }
        std::istringstream row(text);
        std::string t, a, l;
        if (!std::getline(row, t, ',') || !std::getline(row, a, ',') || !std::getline(row, l)) {
            throw FormatError("event row '" + text + "' does not have three fields");
        }
        Event e;
        e.time = detail::parse_double(detail::trim(t), "event time");
        e.amplitude = detail::parse_double(detail::trim(a), "event amplitude");
        const double idx = detail::parse_double(detail::trim(l), "level index");
        if (idx < 0 || idx > 65535 || idx != static_cast<double>(static_cast<std::uint16_t>(idx))) {
            throw DataError("level index out of range in row '" + text + "'");
        }
        e.level_index = static_cast<std::uint16_t>(idx);
        if (!stream.events.empty() && e.time < stream.events.back().time) {
            throw DataError("event times are not non-decreasing");
        }
        stream.events.push_back(e);
    }
    if (!meta || stream.source_sample_count == 0 || !(stream.source_sample_rate > 0.0)) {
        throw FormatError("event CSV needs a '# fs=<Hz> samples=<n>' header");
    }
    stream.source_duration = static_cast<double>(stream.source_sample_count - 1) / stream.source_sample_rate;
    return stream;
}

namespace detail {

inline constexpr std::array<char, 4> kEventMagic{'L', 'C', 'E', 'V'};
inline constexpr std::uint32_t kEventVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value)
{
    static_assert(std::endian::native == std::endian::little, "binary event IO assumes a little-endian host");
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.write(buf, sizeof(T));
}

template <typename T>
T get_le(std::istream& in)
{
    char buf[sizeof(T)];
    if (!in.read(buf, sizeof(T))) {
        throw FormatError("truncated binary event stream");
    }
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

} // namespace detail

// Binary form, little-endian:
//   "LCEV" u32 version, f64 fs, u64 sample_count, u64 event_count,
//   then per event f64 time, f32 amplitude, u16 level_index (14 bytes).
inline void write_events_binary(std::ostream& out, const EventStream& stream)
{
    out.write(detail::kEventMagic.data(), 4);
    detail::put_le<std::uint32_t>(out, detail::kEventVersion);
    detail::put_le<double>(out, stream.source_sample_rate);
    detail::put_le<std::uint64_t>(out, stream.source_sample_count);
    detail::put_le<std::uint64_t>(out, stream.events.size());
    for (const auto& e : stream.events) {
        detail::put_le<double>(out, e.time);
        detail::put_le<float>(out, static_cast<float>(e.amplitude));
        detail::put_le<std::uint16_t>(out, e.level_index);
    }
}

inline EventStream read_events_binary(std::istream& in)
{
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4) || magic != detail::kEventMagic) {
        throw FormatError("not a binary event stream (bad magic)");
    }
    if (detail::get_le<std::uint32_t>(in) != detail::kEventVersion) {
        throw FormatError("unsupported binary event stream version");
    }
    EventStream stream;
    stream.source_sample_rate = detail::get_le<double>(in);
    stream.source_sample_count = detail::get_le<std::uint64_t>(in);
    const auto count = detail::get_le<std::uint64_t>(in);
    if (stream.source_sample_count == 0 || !(stream.source_sample_rate > 0.0)) {
        throw FormatError("binary event stream has an invalid source grid");
    }
    stream.events.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Event e;
        e.time = detail::get_le<double>(in);
        e.amplitude = detail::get_le<float>(in);
        e.level_index = detail::get_le<std::uint16_t>(in);
        stream.events.push_back(e);
    }
    stream.source_duration = static_cast<double>(stream.source_sample_count - 1) / stream.source_sample_rate;
    return stream;
}

/// Dispatches on extension: `.bin` / `.lcev` binary, anything else CSV.
inline EventStream load_events(const std::filesystem::path& path)
{
    const auto ext = path.extension().string();
    if (ext == ".bin" || ext == ".lcev") {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw FormatError("cannot open '" + path.string() + "'");
        }
        return read_events_binary(in);
    }
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open '" + path.string() + "'");
    }
    return read_events_csv(in);
}

inline void save_events(const std::filesystem::path& path, const EventStream& stream)
{
    const auto ext = path.extension().string();
    if (ext == ".bin" || ext == ".lcev") {
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw FormatError("cannot write '" + path.string() + "'");
        }
        write_events_binary(out, stream);
        return;
    }
    std::ofstream out(path);
    if (!out) {
        throw FormatError("cannot write '" + path.string() + "'");
    }
    write_events_csv(out, stream);
}

} // namespace lcforge
