#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <unordered_set>
#include <vector>

#include "netprint/mac_address.hpp"

namespace netprint {

/// One device-originated TCP/IPv4 packet, reduced to the fields the
/// fingerprint needs.
struct PacketRecord {
    double timestamp = 0.0;  ///< seconds since the Unix epoch
    MacAddress src_mac;
    std::uint16_t ip_total_length = 0;  ///< IPv4 Total Length
    std::uint16_t tcp_window = 0;       ///< raw TCP header window, unscaled

    friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

inline constexpr std::uint16_t kMinTcpIpv4Length = 40;

/// True when the record satisfies the packet invariants
/// (length >= 40, finite non-negative timestamp).
bool is_valid(const PacketRecord& record);

/// Per-file accounting. packets_seen == packets_kept +
/// packets_skipped_non_tcp_ipv4 + packets_skipped_malformed always holds.
/// packets_filtered_mac is the part of packets_kept that parsed fine but
/// was dropped by the source-MAC filter, so emitted records number
/// packets_kept - packets_filtered_mac.
struct CaptureStats {
    std::uint64_t packets_seen = 0;
    std::uint64_t packets_kept = 0;
    std::uint64_t packets_skipped_non_tcp_ipv4 = 0;
    std::uint64_t packets_skipped_malformed = 0;
    std::uint64_t packets_filtered_mac = 0;

    bool balanced() const {
        return packets_seen == packets_kept + packets_skipped_non_tcp_ipv4 + packets_skipped_malformed &&
               packets_filtered_mac <= packets_kept;
    }
    std::uint64_t packets_emitted() const { return packets_kept - packets_filtered_mac; }

    CaptureStats& operator+=(const CaptureStats& other);
    friend bool operator==(const CaptureStats&, const CaptureStats&) = default;
};

struct IngestResult {
    std::vector<PacketRecord> records;
    CaptureStats stats;
};

using MacSet = std::unordered_set<MacAddress>;

/// Dissects a classic pcap stream (either byte order, micro- or
/// nanosecond timestamps, linktype Ethernet). Only Ethernet II frames
/// carrying IPv4/TCP, optionally behind one 802.1Q tag, yield records;
/// records are emitted in file order. Throws FormatError on a bad global
/// header; damaged packets are counted malformed and skipped.
IngestResult ingest_pcap(std::istream& in, const MacSet* keep_macs = nullptr);
IngestResult ingest_pcap(const std::filesystem::path& path, const MacSet* keep_macs = nullptr);

/// Reads a dissector-exported CSV with columns frame.time_epoch, eth.src,
/// ip.len and tcp.window_size (others ignored). Rows with an empty or
/// unparseable required field are counted malformed and skipped.
IngestResult ingest_trace_csv(std::istream& in);
IngestResult ingest_trace_csv(const std::filesystem::path& path);

/// Picks the pcap or CSV reader from the file's leading bytes.
IngestResult ingest_file(const std::filesystem::path& path, const MacSet* keep_macs = nullptr);

std::vector<PacketRecord> filter_by_mac(std::span<const PacketRecord> records, const MacAddress& mac);

}  // namespace netprint
