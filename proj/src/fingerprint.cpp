#include "netprint/fingerprint.hpp"

#include <cmath>
#include <unordered_map>

#include "netprint/error.hpp"

namespace netprint {

namespace {

struct MeanSigma {
    double mean;
    double sigma;
};

template <typename Project>
MeanSigma mean_sigma(PacketWindow window, Project value) {
    const double n = static_cast<double>(window.size());
    double sum = 0.0;
    for (const auto& r : window) sum += value(r);
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& r : window) {
        const double d = value(r) - mean;
        sq += d * d;
    }
    return {mean, std::sqrt(sq / n)};
}

}  // namespace

void ExtractionConfig::validate() const {
    if (window_size < 2) throw ContractError("window size must be at least 2");
}

std::vector<PacketWindow> window_packets(std::span<const PacketRecord> records, const ExtractionConfig& config) {
    config.validate();
    std::vector<PacketWindow> windows;
    windows.reserve(records.size() / config.window_size);
    for (std::size_t at = 0; at + config.window_size <= records.size(); at += config.window_size)
        windows.push_back(records.subspan(at, config.window_size));
    // a short trailing window is only possible with drop_remainder off
    if (!config.drop_remainder && records.size() % config.window_size != 0)
        windows.push_back(records.subspan(records.size() - records.size() % config.window_size));
    return windows;
}

Fingerprint compute_fingerprint(PacketWindow window) {
    if (window.empty()) throw ContractError("cannot fingerprint an empty window");
    const auto len = mean_sigma(window, [](const PacketRecord& r) { return double(r.ip_total_length); });
    const auto win = mean_sigma(window, [](const PacketRecord& r) { return double(r.tcp_window); });
    return {len.mean, len.sigma, win.mean, win.sigma};
}

ExtractionResult extract_instances(std::span<const PacketRecord> capture,
                                   const std::map<MacAddress, std::string>& device_labels,
                                   const ExtractionConfig& config) {
    config.validate();
    if (device_labels.empty()) throw ContractError("device label map is empty");

    ExtractionResult result;
    std::unordered_map<MacAddress, std::size_t> slot;
    std::vector<std::vector<PacketRecord>> streams(device_labels.size());
    for (const auto& [mac, label] : device_labels) {
        if (label.empty()) throw ContractError("empty label for " + mac.to_string());
        slot.emplace(mac, result.devices.size());
        result.devices.push_back({mac, label, 0, 0});
    }

    for (const auto& record : capture) {
        auto it = slot.find(record.src_mac);
        if (it == slot.end()) {
            ++result.unlabeled_packets;
            continue;
        }
        streams[it->second].push_back(record);
    }

    for (std::size_t d = 0; d < streams.size(); ++d) {
        auto& device = result.devices[d];
        device.packets = streams[d].size();
        for (const auto window : window_packets(streams[d], config)) {
            result.instances.push_back({compute_fingerprint(window), device.label});
            ++device.instances;
        }
    }
    return result;
}

}  // namespace netprint
