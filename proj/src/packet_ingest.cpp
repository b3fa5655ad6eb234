#include "netprint/packet_ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <string>

#include "netprint/csv.hpp"
#include "netprint/error.hpp"

namespace netprint {

namespace {

constexpr std::uint32_t kMagicMicro = 0xa1b2c3d4;
constexpr std::uint32_t kMagicNano = 0xa1b23c4d;
constexpr std::uint32_t kLinktypeEthernet = 1;
constexpr std::uint32_t kMaxRecordBytes = 16u << 20;

constexpr std::size_t kEthHeader = 14;
constexpr std::uint16_t kEtherIpv4 = 0x0800;
constexpr std::uint16_t kEtherVlan = 0x8100;
constexpr std::uint8_t kProtoTcp = 6;

std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

std::uint32_t swap32(std::uint32_t v) {
    return ((v & 0xff) << 24) | ((v & 0xff00) << 8) | ((v >> 8) & 0xff00) | (v >> 24);
}

std::uint32_t le32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

enum class FrameKind { tcp_ipv4, other, malformed };

struct FrameFields {
    MacAddress src;
    std::uint16_t ip_total_length = 0;
    std::uint16_t tcp_window = 0;
};

FrameKind dissect(std::span<const std::uint8_t> frame, FrameFields& out) {
    if (frame.size() < kEthHeader) return FrameKind::malformed;
    std::size_t l3 = kEthHeader;
    std::uint16_t ethertype = be16(frame, 12);
    if (ethertype == kEtherVlan) {
        if (frame.size() < kEthHeader + 4) return FrameKind::malformed;
        ethertype = be16(frame, 16);
        l3 += 4;
    }
    // a second tag (QinQ) lands here as a non-IPv4 ethertype
    if (ethertype != kEtherIpv4) return FrameKind::other;

    if (frame.size() < l3 + 20) return FrameKind::malformed;
    const std::uint8_t version_ihl = frame[l3];
    if ((version_ihl >> 4) != 4) return FrameKind::malformed;
    const std::size_t ip_header = std::size_t(version_ihl & 0x0f) * 4;
    if (ip_header < 20 || frame.size() < l3 + ip_header) return FrameKind::malformed;
    if (frame[l3 + 9] != kProtoTcp) return FrameKind::other;
    // non-first fragments carry no TCP header
    if ((be16(frame, l3 + 6) & 0x1fff) != 0) return FrameKind::other;

    const std::uint16_t total_length = be16(frame, l3 + 2);
    if (total_length < ip_header + 20 || total_length < kMinTcpIpv4Length) return FrameKind::malformed;

    const std::size_t l4 = l3 + ip_header;
    if (frame.size() < l4 + 20) return FrameKind::malformed;
    const std::size_t tcp_header = std::size_t(frame[l4 + 12] >> 4) * 4;
    if (tcp_header < 20 || frame.size() < l4 + tcp_header) return FrameKind::malformed;
    if (total_length < ip_header + tcp_header) return FrameKind::malformed;

    std::array<std::uint8_t, 6> src{};
    std::copy_n(frame.begin() + 6, 6, src.begin());
    out.src = MacAddress(src);
    out.ip_total_length = total_length;
    out.tcp_window = be16(frame, l4 + 14);
    return FrameKind::tcp_ipv4;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return in;
}

}  // namespace

bool is_valid(const PacketRecord& record) {
    return record.ip_total_length >= kMinTcpIpv4Length && std::isfinite(record.timestamp) &&
           record.timestamp >= 0.0;
}

CaptureStats& CaptureStats::operator+=(const CaptureStats& other) {
    packets_seen += other.packets_seen;
    packets_kept += other.packets_kept;
    packets_skipped_non_tcp_ipv4 += other.packets_skipped_non_tcp_ipv4;
    packets_skipped_malformed += other.packets_skipped_malformed;
    packets_filtered_mac += other.packets_filtered_mac;
    return *this;
}

IngestResult ingest_pcap(std::istream& in, const MacSet* keep_macs) {
    std::array<std::uint8_t, 24> global{};
    in.read(reinterpret_cast<char*>(global.data()), global.size());
    if (in.gcount() != static_cast<std::streamsize>(global.size()))
        throw FormatError("pcap: truncated global header");

    const std::uint32_t raw_magic = le32(global.data());
    bool swapped = false;
    bool nanos = false;
    if (raw_magic == kMagicMicro) {
    } else if (raw_magic == swap32(kMagicMicro)) {
        swapped = true;
    } else if (raw_magic == kMagicNano) {
        nanos = true;
    } else if (raw_magic == swap32(kMagicNano)) {
        swapped = nanos = true;
    } else {
        throw FormatError("pcap: bad magic number");
    }
    auto field32 = [swapped](const std::uint8_t* p) {
        const std::uint32_t v = le32(p);
        return swapped ? swap32(v) : v;
    };
    const std::uint32_t linktype = field32(global.data() + 20) & 0xffff;
    if (linktype != kLinktypeEthernet)
        throw FormatError("pcap: unsupported linktype " + std::to_string(linktype) + " (only Ethernet)");

    const double frac_scale = nanos ? 1e-9 : 1e-6;
    IngestResult result;
    auto& stats = result.stats;
    std::array<std::uint8_t, 16> header{};
    std::vector<std::uint8_t> frame;

    for (;;) {
        in.read(reinterpret_cast<char*>(header.data()), header.size());
        const auto got = in.gcount();
        if (got == 0) break;
        ++stats.packets_seen;
        if (got != static_cast<std::streamsize>(header.size())) {
            ++stats.packets_skipped_malformed;
            break;
        }
        const std::uint32_t ts_sec = field32(header.data());
        const std::uint32_t ts_frac = field32(header.data() + 4);
        const std::uint32_t incl_len = field32(header.data() + 8);
        if (incl_len > kMaxRecordBytes) {
            // cannot resynchronise past a nonsensical length
            ++stats.packets_skipped_malformed;
            break;
        }
        frame.resize(incl_len);
        in.read(reinterpret_cast<char*>(frame.data()), incl_len);
        if (in.gcount() != static_cast<std::streamsize>(incl_len)) {
            ++stats.packets_skipped_malformed;
            break;
        }

        FrameFields fields;
        switch (dissect(frame, fields)) {
            case FrameKind::other:
                ++stats.packets_skipped_non_tcp_ipv4;
                continue;
            case FrameKind::malformed:
                ++stats.packets_skipped_malformed;
                continue;
            case FrameKind::tcp_ipv4:
                break;
        }
        ++stats.packets_kept;
        if (keep_macs && !keep_macs->contains(fields.src)) {
            ++stats.packets_filtered_mac;
            continue;
        }
        result.records.push_back(PacketRecord{
            .timestamp = double(ts_sec) + double(ts_frac) * frac_scale,
            .src_mac = fields.src,
            .ip_total_length = fields.ip_total_length,
            .tcp_window = fields.tcp_window,
        });
    }
    return result;
}

IngestResult ingest_pcap(const std::filesystem::path& path, const MacSet* keep_macs) {
    auto in = open_input(path);
    try {
        return ingest_pcap(in, keep_macs);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

IngestResult ingest_trace_csv(std::istream& in) {
    static constexpr std::array<std::string_view, 4> kRequired = {
        "frame.time_epoch", "eth.src", "ip.len", "tcp.window_size"};

    std::string line;
    if (!csv::read_line(in, line)) throw FormatError("trace csv: missing header row");
    if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    const auto header = csv::split_line(line);
    std::array<std::size_t, 4> column{};
    for (std::size_t r = 0; r < kRequired.size(); ++r) {
        auto it = std::find(header.begin(), header.end(), kRequired[r]);
        if (it == header.end())
            throw FormatError("trace csv: missing required column '" + std::string(kRequired[r]) + "'");
        column[r] = static_cast<std::size_t>(it - header.begin());
    }
    const std::size_t needed = *std::max_element(column.begin(), column.end()) + 1;

    IngestResult result;
    auto& stats = result.stats;
    while (csv::read_line(in, line)) {
        ++stats.packets_seen;
        std::vector<std::string> fields;
        try {
            fields = csv::split_line(line);
        } catch (const FormatError&) {
            ++stats.packets_skipped_malformed;
            continue;
        }
        if (fields.size() < needed) {
            ++stats.packets_skipped_malformed;
            continue;
        }
        const auto ts = csv::parse_double(fields[column[0]]);
        const auto mac = MacAddress::parse(fields[column[1]]);
        const auto len = csv::parse_uint(fields[column[2]]);
        const auto win = csv::parse_uint(fields[column[3]]);
        if (!ts || !mac || !len || !win || *len > 0xffff || *win > 0xffff) {
            ++stats.packets_skipped_malformed;
            continue;
        }
        PacketRecord record{
            .timestamp = *ts,
            .src_mac = *mac,
            .ip_total_length = static_cast<std::uint16_t>(*len),
            .tcp_window = static_cast<std::uint16_t>(*win),
        };
        if (!is_valid(record)) {
            ++stats.packets_skipped_malformed;
            continue;
        }
        ++stats.packets_kept;
        result.records.push_back(record);
    }
    return result;
}

IngestResult ingest_trace_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        return ingest_trace_csv(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

IngestResult ingest_file(const std::filesystem::path& path, const MacSet* keep_macs) {
    std::array<std::uint8_t, 4> lead{};
    {
        auto in = open_input(path);
        in.read(reinterpret_cast<char*>(lead.data()), lead.size());
        if (in.gcount() < 4) lead = {};
    }
    const std::uint32_t magic = le32(lead.data());
    const bool pcap = magic == kMagicMicro || magic == swap32(kMagicMicro) || magic == kMagicNano ||
                      magic == swap32(kMagicNano);
    if (pcap) return ingest_pcap(path, keep_macs);

    auto result = ingest_trace_csv(path);
    if (keep_macs) {
        auto kept = std::stable_partition(result.records.begin(), result.records.end(),
                                          [&](const PacketRecord& r) { return keep_macs->contains(r.src_mac); });
        result.stats.packets_filtered_mac = static_cast<std::uint64_t>(result.records.end() - kept);
        result.records.erase(kept, result.records.end());
    }
    return result;
}

std::vector<PacketRecord> filter_by_mac(std::span<const PacketRecord> records, const MacAddress& mac) {
    std::vector<PacketRecord> out;
    for (const auto& r : records)
        if (r.src_mac == mac) out.push_back(r);
    return out;
}

}  // namespace netprint
