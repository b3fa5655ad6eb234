#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "netprint/mac_address.hpp"
#include "netprint/packet_ingest.hpp"

namespace netprint {

inline constexpr std::size_t kFeatureCount = 4;
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "iplen_mu", "iplen_sigma", "tcpwin_mu", "tcpwin_sigma"};

using FeatureVector = std::array<double, kFeatureCount>;

struct ExtractionConfig {
    std::size_t window_size = 5;
    bool drop_remainder = true;

    /// Throws ContractError unless window_size >= 2.
    void validate() const;
};

/// Mean and population standard deviation of IPv4 total length and raw
/// TCP window over one packet window.
struct Fingerprint {
    double iplen_mu = 0.0;
    double iplen_sigma = 0.0;
    double tcpwin_mu = 0.0;
    double tcpwin_sigma = 0.0;

    FeatureVector features() const { return {iplen_mu, iplen_sigma, tcpwin_mu, tcpwin_sigma}; }
    static Fingerprint from_features(const FeatureVector& f) { return {f[0], f[1], f[2], f[3]}; }

    friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

struct LabeledInstance {
    Fingerprint fingerprint;
    std::string label;

    friend bool operator==(const LabeledInstance&, const LabeledInstance&) = default;
};

using PacketWindow = std::span<const PacketRecord>;

/// Disjoint consecutive windows of exactly config.window_size records.
/// The trailing remainder is dropped, so the count is floor(n / size).
/// Windows view into `records` and live only as long as it does.
std::vector<PacketWindow> window_packets(std::span<const PacketRecord> records, const ExtractionConfig& config);

/// Throws ContractError on an empty window.
Fingerprint compute_fingerprint(PacketWindow window);

struct DeviceCount {
    MacAddress mac;
    std::string label;
    std::uint64_t packets = 0;
    std::uint64_t instances = 0;
};

struct ExtractionResult {
    std::vector<LabeledInstance> instances;
    /// One entry per labeled MAC in canonical-MAC order, including devices
    /// that contributed no packets.
    std::vector<DeviceCount> devices;
    std::uint64_t unlabeled_packets = 0;
};

/// Splits the capture by source MAC, then windows and fingerprints each
/// labeled device's own packet sequence. Instances are grouped by device
/// in MAC order and each group is in window order.
ExtractionResult extract_instances(std::span<const PacketRecord> capture,
                                   const std::map<MacAddress, std::string>& device_labels,
                                   const ExtractionConfig& config = {});

}  // namespace netprint
