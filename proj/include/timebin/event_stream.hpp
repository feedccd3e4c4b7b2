#pragma once

// Time-tag streams: record codec (binary and CSV), attempt framing, and
// herald classification by detection-window post-selection.
//
// Binary layout, little-endian, 16 bytes per record:
//   u64 t_ps | u32 attempt_id | u8 channel | u8 kind | u16 reserved (= 0)
//
// CSV layout: header "attempt_id,channel,t_ps" then one record per line. When
// any record has nonzero kind a fourth column "kind" is written; three-column
// input reads kind as 0.
//
// Channel codes: 0, 1 photon detectors behind the beamsplitter; 16 SYNC
// (attempt start); 17, 18 early and late excitation marks. On SYNC records
// bit 0 of kind carries the erasure-veto flag raised by the ion readout of
// that attempt.

#include "timebin/herald.hpp"
#include "timebin/physics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace timebin {

enum class Channel : std::uint8_t { apd0 = 0, apd1 = 1, sync = 16, exc_early = 17, exc_late = 18 };

inline constexpr std::uint8_t kind_erasure_flag = 0x01;

inline bool is_known_channel(unsigned code) {
    return code == 0 || code == 1 || code == 16 || code == 17 || code == 18;
}

inline bool is_detector(Channel c) { return c == Channel::apd0 || c == Channel::apd1; }

struct TimeTagRecord {
    std::uint64_t t_ps = 0;
    std::uint32_t attempt_id = 0;
    Channel channel = Channel::sync;
    std::uint8_t kind = 0;

    friend bool operator==(const TimeTagRecord&, const TimeTagRecord&) = default;
};

inline constexpr std::size_t record_size = 16;

/// Malformed input. offset is a byte offset for binary input and a 1-based
/// line number for CSV.
class FormatError : public std::runtime_error {
  public:
    FormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at " + std::to_string(offset) + ")"), offset_(offset) {}

    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

  private:
    std::size_t offset_;
};

namespace detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return static_cast<T>(v);
}

// Stream-level invariants shared by both decoders.
class StreamChecker {
  public:
    void check(const TimeTagRecord& r, std::size_t offset) {
        if (r.channel != Channel::sync)
            return;
        if (seen_sync_ && r.t_ps < last_sync_)
            throw FormatError("non-monotone SYNC timestamp", offset);
        seen_sync_ = true;
        last_sync_ = r.t_ps;
    }

  private:
    bool seen_sync_ = false;
    std::uint64_t last_sync_ = 0;
};

} // namespace detail

inline std::vector<std::uint8_t> encode_binary(std::span<const TimeTagRecord> records) {
    std::vector<std::uint8_t> out;
    out.reserve(records.size() * record_size);
    for (const auto& r : records) {
        detail::put_le<std::uint64_t>(out, r.t_ps);
        detail::put_le<std::uint32_t>(out, r.attempt_id);
        out.push_back(static_cast<std::uint8_t>(r.channel));
        out.push_back(r.kind);
        detail::put_le<std::uint16_t>(out, 0);
    }
    return out;
}

inline std::vector<TimeTagRecord> decode_binary(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % record_size != 0)
        throw FormatError("truncated record", bytes.size() - bytes.size() % record_size);
    std::vector<TimeTagRecord> out;
    out.reserve(bytes.size() / record_size);
    detail::StreamChecker checker;
    for (std::size_t off = 0; off < bytes.size(); off += record_size) {
        auto rec = bytes.subspan(off, record_size);
        const unsigned code = rec[12];
        if (!is_known_channel(code))
            throw FormatError("unknown channel code " + std::to_string(code), off + 12);
        if (detail::get_le<std::uint16_t>(rec.subspan(14)) != 0)
            throw FormatError("reserved field not zero", off + 14);
        TimeTagRecord r;
        r.t_ps = detail::get_le<std::uint64_t>(rec);
        r.attempt_id = detail::get_le<std::uint32_t>(rec.subspan(8));
        r.channel = static_cast<Channel>(code);
        r.kind = rec[13];
        checker.check(r, off);
        out.push_back(r);
    }
    return out;
}

inline constexpr std::string_view csv_header = "attempt_id,channel,t_ps";

inline constexpr std::string_view csv_header_kind = "attempt_id,channel,t_ps,kind";

inline void encode_csv(std::span<const TimeTagRecord> records, std::ostream& os) {
    const bool with_kind = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.kind != 0; });
    os << (with_kind ? csv_header_kind : csv_header) << '\n';
    for (const auto& r : records) {
        os << r.attempt_id << ',' << static_cast<unsigned>(r.channel) << ',' << r.t_ps;
        if (with_kind)
            os << ',' << static_cast<unsigned>(r.kind);
        os << '\n';
    }
}

inline std::string encode_csv(std::span<const TimeTagRecord> records) {
    std::ostringstream os;
    encode_csv(records, os);
    return os.str();
}

namespace detail {

inline std::uint64_t parse_unsigned(std::string_view field, std::uint64_t max, std::size_t line) {
    if (field.empty())
        throw FormatError("empty field", line);
    std::uint64_t v = 0;
    for (char c : field) {
        if (c < '0' || c > '9')
            throw FormatError("not an unsigned integer: '" + std::string(field) + "'", line);
        const std::uint64_t digit = static_cast<std::uint64_t>(c - '0');
        if (digit > max || v > (max - digit) / 10)
            throw FormatError("integer out of range: '" + std::string(field) + "'", line);
        v = v * 10 + digit;
    }
    return v;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
        s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    return s;
}

} // namespace detail

inline std::vector<TimeTagRecord> decode_csv(std::istream& is) {
    std::vector<TimeTagRecord> out;
    detail::StreamChecker checker;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string_view text = detail::trim(line);
        if (text.empty())
            continue;
        if (!header_seen) {
            header_seen = true;
            if (text == csv_header || text == csv_header_kind)
                continue;
        }
        std::array<std::string_view, 4> fields;
        std::size_t n_fields = 0;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = text.find(',', start);
            if (n_fields == fields.size())
                throw FormatError("expected 3 or 4 comma-separated fields", lineno);
            fields[n_fields++] = detail::trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
            if (comma == std::string_view::npos)
                break;
            start = comma + 1;
        }
        if (n_fields < 3)
            throw FormatError("expected 3 or 4 comma-separated fields", lineno);
        TimeTagRecord r;
        r.attempt_id = static_cast<std::uint32_t>(detail::parse_unsigned(fields[0], UINT32_MAX, lineno));
        const auto code = detail::parse_unsigned(fields[1], 255, lineno);
        if (!is_known_channel(static_cast<unsigned>(code)))
            throw FormatError("unknown channel code " + std::to_string(code), lineno);
        r.channel = static_cast<Channel>(code);
        r.t_ps = detail::parse_unsigned(fields[2], UINT64_MAX, lineno);
        if (n_fields == 4)
            r.kind = static_cast<std::uint8_t>(detail::parse_unsigned(fields[3], 255, lineno));
        checker.check(r, lineno);
        out.push_back(r);
    }
    return out;
}

inline std::vector<TimeTagRecord> decode_csv(std::string_view text) {
    std::istringstream is{std::string(text)};
    return decode_csv(is);
}

/// Decodes either format; CSV is recognised by its header line.
inline std::vector<TimeTagRecord> parse_stream(std::span<const std::uint8_t> bytes) {
    const std::string_view head(reinterpret_cast<const char*>(bytes.data()),
                                std::min(bytes.size(), csv_header.size()));
    if (head == csv_header)
        return decode_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    return decode_binary(bytes);
}

// ---------------------------------------------------------------------------
// Ion readout table
//
// One row per analysed attempt: the basis, the analysis phase for parity
// scans, and the two qubit outcomes (0 = bright/down, 1 = dark/up).
// CSV header "attempt_id,basis,phase_rad,bit_a,bit_b"; basis is 0 for a
// population measurement and 1 for a parity-scan point.

enum class ReadoutBasis : std::uint8_t { population = 0, parity = 1 };

struct ReadoutRecord {
    std::uint32_t attempt_id = 0;
    ReadoutBasis basis = ReadoutBasis::population;
    double phase_rad = 0.0;
    std::uint8_t bit_a = 0;
    std::uint8_t bit_b = 0;

    [[nodiscard]] bool odd() const { return bit_a != bit_b; }

    friend bool operator==(const ReadoutRecord&, const ReadoutRecord&) = default;
};

inline constexpr std::string_view readout_csv_header = "attempt_id,basis,phase_rad,bit_a,bit_b";

inline void encode_readouts_csv(std::span<const ReadoutRecord> rows, std::ostream& os) {
    os << readout_csv_header << '\n';
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.phase_rad);
        os << r.attempt_id << ',' << static_cast<unsigned>(r.basis) << ',' << buf << ','
           << static_cast<unsigned>(r.bit_a) << ',' << static_cast<unsigned>(r.bit_b) << '\n';
    }
}

inline std::vector<ReadoutRecord> decode_readouts_csv(std::istream& is) {
    std::vector<ReadoutRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string_view text = detail::trim(line);
        if (text.empty() || (lineno == 1 && text == readout_csv_header))
            continue;
        std::vector<std::string_view> f;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = text.find(',', start);
            f.push_back(detail::trim(text.substr(start, comma == text.npos ? text.npos : comma - start)));
            if (comma == text.npos)
                break;
            start = comma + 1;
        }
        if (f.size() != 5)
            throw FormatError("expected 5 comma-separated fields", lineno);
        ReadoutRecord r;
        r.attempt_id = static_cast<std::uint32_t>(detail::parse_unsigned(f[0], UINT32_MAX, lineno));
        r.basis = static_cast<ReadoutBasis>(detail::parse_unsigned(f[1], 1, lineno));
        const std::string phase(f[2]);
        char* end = nullptr;
        r.phase_rad = std::strtod(phase.c_str(), &end);
        if (phase.empty() || end != phase.c_str() + phase.size() || !std::isfinite(r.phase_rad))
            throw FormatError("bad phase '" + phase + "'", lineno);
        r.bit_a = static_cast<std::uint8_t>(detail::parse_unsigned(f[3], 1, lineno));
        r.bit_b = static_cast<std::uint8_t>(detail::parse_unsigned(f[4], 1, lineno));
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Framing

enum class Bin : std::uint8_t { early, late };

struct Detection {
    Channel channel = Channel::apd0;
    std::uint64_t t_ps = 0;
    Bin bin = Bin::early;
};

struct AttemptFrame {
    std::uint32_t attempt_id = 0;
    std::uint64_t sync_t_ps = 0;
    std::uint8_t sync_kind = 0;
    std::optional<std::uint64_t> early_mark_ps;
    std::optional<std::uint64_t> late_mark_ps;
    std::vector<Detection> detections;
    bool malformed = false; // duplicate marks or a detection preceding its bin

    [[nodiscard]] bool complete() const { return early_mark_ps && late_mark_ps && !malformed; }
    [[nodiscard]] bool erasure_flagged() const { return (sync_kind & kind_erasure_flag) != 0; }
};

struct FrameSet {
    std::vector<AttemptFrame> frames;
    std::vector<std::string> warnings;
    std::size_t orphan_records = 0;
};

namespace detail {

inline void close_frame(AttemptFrame& f, std::vector<TimeTagRecord>& pending, FrameSet& set) {
    for (const auto& r : pending) {
        Detection d{r.channel, r.t_ps, Bin::early};
        if (f.late_mark_ps && r.t_ps >= *f.late_mark_ps) {
            d.bin = Bin::late;
        } else if (f.early_mark_ps && r.t_ps >= *f.early_mark_ps) {
            d.bin = Bin::early;
        } else {
            if (f.early_mark_ps) {
                f.malformed = true;
                set.warnings.push_back("attempt " + std::to_string(f.attempt_id) +
                                       ": detection precedes excitation mark");
            }
            continue;
        }
        f.detections.push_back(d);
    }
    pending.clear();
    if (!f.early_mark_ps || !f.late_mark_ps)
        set.warnings.push_back("attempt " + std::to_string(f.attempt_id) + ": missing excitation mark");
    set.frames.push_back(std::move(f));
}

} // namespace detail

/// Groups records into attempts delimited by SYNC. Frames are keyed by SYNC
/// order; the attempt id is taken from the SYNC record.
inline FrameSet frame_attempts(std::span<const TimeTagRecord> records) {
    FrameSet set;
    std::optional<AttemptFrame> current;
    std::vector<TimeTagRecord> pending;
    for (const auto& r : records) {
        if (r.channel == Channel::sync) {
            if (current)
                detail::close_frame(*current, pending, set);
            current = AttemptFrame{};
            current->attempt_id = r.attempt_id;
            current->sync_t_ps = r.t_ps;
            current->sync_kind = r.kind;
            continue;
        }
        if (!current) {
            ++set.orphan_records;
            set.warnings.push_back("record at t=" + std::to_string(r.t_ps) + " ps precedes first SYNC");
            continue;
        }
        auto mark = [&](std::optional<std::uint64_t>& slot) {
            if (slot)
                current->malformed = true;
            slot = r.t_ps;
        };
        if (r.channel == Channel::exc_early)
            mark(current->early_mark_ps);
        else if (r.channel == Channel::exc_late)
            mark(current->late_mark_ps);
        else
            pending.push_back(r);
    }
    if (current)
        detail::close_frame(*current, pending, set);
    return set;
}

// ---------------------------------------------------------------------------
// Classification

enum class WindowRule : std::uint8_t {
    difference, // |tau* - tau| <= delta_t on the late-minus-early interval
    per_bin,    // each detection within +-delta_t of its bin's mean arrival
};

/// Per-channel constant delay between an excitation mark and the mean photon
/// arrival on that detector (path length plus the mean emission delay).
struct ChannelOffsets {
    std::array<double, 2> mean_arrival_ps{0.0, 0.0};
};

struct ClassifyOptions {
    ProtocolParams protocol;
    WindowRule rule = WindowRule::difference;
    std::optional<ChannelOffsets> offsets; // estimated from the frames when unset
};

struct FrameOutcome {
    std::uint32_t attempt_id = 0;
    HeraldResult result;
    std::optional<double> offset_s; // tau* - tau for two-bin candidates
};

struct ClassifySummary {
    std::size_t frames = 0;
    std::size_t incomplete = 0;
    std::size_t psi_plus = 0;
    std::size_t psi_minus = 0;
    std::size_t erasure_flagged = 0;
    std::size_t same_bin = 0;
    std::size_t missing_photon = 0;
    std::size_t out_of_window = 0;
    std::size_t candidates = 0; // exactly one early and one late detection

    [[nodiscard]] double yield() const {
        return candidates == 0 ? 0.0 : static_cast<double>(candidates - out_of_window) / static_cast<double>(candidates);
    }
};

struct Classification {
    std::vector<FrameOutcome> outcomes; // complete frames only, in frame order
    ClassifySummary summary;
    ChannelOffsets offsets;
};

inline ChannelOffsets estimate_offsets(std::span<const AttemptFrame> frames) {
    std::array<double, 2> sum{0.0, 0.0};
    std::array<std::size_t, 2> n{0, 0};
    for (const auto& f : frames) {
        if (!f.complete())
            continue;
        for (const auto& d : f.detections) {
            const auto mark = d.bin == Bin::early ? *f.early_mark_ps : *f.late_mark_ps;
            const auto ch = static_cast<std::size_t>(d.channel);
            sum[ch] += static_cast<double>(d.t_ps) - static_cast<double>(mark);
            ++n[ch];
        }
    }
    ChannelOffsets off;
    for (std::size_t ch = 0; ch < 2; ++ch)
        off.mean_arrival_ps[ch] = n[ch] ? sum[ch] / static_cast<double>(n[ch]) : 0.0;
    // A channel with no photons inherits the other so differences stay neutral.
    if (n[0] == 0)
        off.mean_arrival_ps[0] = off.mean_arrival_ps[1];
    if (n[1] == 0)
        off.mean_arrival_ps[1] = off.mean_arrival_ps[0];
    return off;
}

namespace detail {

struct TwoBinPair {
    const Detection* early = nullptr;
    const Detection* late = nullptr;
};

inline std::optional<TwoBinPair> two_bin_pair(const AttemptFrame& f) {
    TwoBinPair p;
    int n_early = 0;
    int n_late = 0;
    for (const auto& d : f.detections) {
        if (d.bin == Bin::early) {
            ++n_early;
            p.early = &d;
        } else {
            ++n_late;
            p.late = &d;
        }
    }
    if (n_early == 1 && n_late == 1)
        return p;
    return std::nullopt;
}

} // namespace detail

inline FrameOutcome classify_frame(const AttemptFrame& f, const ClassifyOptions& opt, const ChannelOffsets& off) {
    FrameOutcome out;
    out.attempt_id = f.attempt_id;
    const auto pair = detail::two_bin_pair(f);
    if (!pair) {
        out.result = HeraldResult::rejected(f.detections.size() < 2 ? RejectReason::missing_photon
                                                                      : RejectReason::same_bin);
        return out;
    }
    const auto ch_e = static_cast<std::size_t>(pair->early->channel);
    const auto ch_l = static_cast<std::size_t>(pair->late->channel);
    const double early_ps = static_cast<double>(pair->early->t_ps) - off.mean_arrival_ps[ch_e];
    const double late_ps = static_cast<double>(pair->late->t_ps) - off.mean_arrival_ps[ch_l];
    const double tau_ps = static_cast<double>(*f.late_mark_ps) - static_cast<double>(*f.early_mark_ps);
    const double offset_s = (late_ps - early_ps - tau_ps) * 1e-12;
    out.offset_s = offset_s;

    if (opt.rule == WindowRule::difference) {
        ProtocolParams p = opt.protocol;
        p.tau_s = tau_ps * 1e-12;
        out.result = herald_classify(static_cast<int>(ch_e), static_cast<int>(ch_l), tau_ps * 1e-12 + offset_s, p);
    } else {
        const double window_ps = opt.protocol.delta_t_s * 1e12;
        const double de = early_ps - static_cast<double>(*f.early_mark_ps);
        const double dl = late_ps - static_cast<double>(*f.late_mark_ps);
        if (std::abs(de) > window_ps || std::abs(dl) > window_ps)
            out.result = HeraldResult::rejected(RejectReason::out_of_window);
        else
            out.result = ch_e == ch_l ? HeraldResult::psi_plus() : HeraldResult::psi_minus();
    }
    if (out.result.is_herald() && f.erasure_flagged())
        out.result = HeraldResult::erasure();
    return out;
}

inline Classification classify_frames(std::span<const AttemptFrame> frames, const ClassifyOptions& opt) {
    Classification c;
    c.offsets = opt.offsets ? *opt.offsets : estimate_offsets(frames);
    c.summary.frames = frames.size();
    for (const auto& f : frames) {
        if (!f.complete()) {
            ++c.summary.incomplete;
            continue;
        }
        auto o = classify_frame(f, opt, c.offsets);
        if (o.offset_s)
            ++c.summary.candidates;
        switch (o.result.kind) {
        case HeraldKind::psi_plus:
            ++c.summary.psi_plus;
            break;
        case HeraldKind::psi_minus:
            ++c.summary.psi_minus;
            break;
        case HeraldKind::erasure_flagged:
            ++c.summary.erasure_flagged;
            break;
        case HeraldKind::rejected:
            if (o.result.reason == RejectReason::same_bin)
                ++c.summary.same_bin;
            else if (o.result.reason == RejectReason::out_of_window)
                ++c.summary.out_of_window;
            else
                ++c.summary.missing_photon;
            break;
        }
        c.outcomes.push_back(o);
    }
    return c;
}

struct YieldPoint {
    double delta_t_s = 0.0;
    std::size_t candidates = 0;
    std::size_t accepted = 0;
    double yield = 0.0;
};

/// Re-analyses one dataset at several windows; offsets are estimated once.
inline std::vector<YieldPoint> yield_sweep(std::span<const AttemptFrame> frames, ClassifyOptions opt,
                                           std::span<const double> deltas_s) {
    if (!opt.offsets)
        opt.offsets = estimate_offsets(frames);
    std::vector<YieldPoint> out;
    for (double dt : deltas_s) {
        opt.protocol.delta_t_s = dt;
        const auto c = classify_frames(frames, opt);
        YieldPoint p;
        p.delta_t_s = dt;
        p.candidates = c.summary.candidates;
        p.accepted = c.summary.candidates - c.summary.out_of_window;
        p.yield = c.summary.yield();
        out.push_back(p);
    }
    return out;
}

} // namespace timebin
