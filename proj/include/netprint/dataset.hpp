#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "netprint/fingerprint.hpp"

namespace netprint {

/// Immutable collection of labeled fingerprints. The label vocabulary is
/// the sorted set of distinct labels.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<LabeledInstance> instances);

    const std::vector<LabeledInstance>& instances() const { return instances_; }
    const std::vector<std::string>& labels() const { return labels_; }
    std::size_t size() const { return instances_.size(); }
    bool empty() const { return instances_.empty(); }
    const LabeledInstance& operator[](std::size_t i) const { return instances_[i]; }

    /// Instance count per label.
    std::map<std::string, std::size_t> label_counts() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::vector<LabeledInstance> instances_;
    std::vector<std::string> labels_;
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 1;
    bool stratified = false;

    void validate() const;
};

/// Train-set size: train_fraction * n rounded half away from zero.
std::size_t train_count(std::size_t n, double train_fraction);

struct SplitResult {
    Dataset train;
    Dataset test;
    /// Source positions of each train/test member, in output order.
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

/// Fisher-Yates shuffle of instance positions (xoshiro256** seeded with
/// spec.seed), first train_count() go to train. With spec.stratified each
/// label is shuffled and cut separately, labels taken in sorted order.
SplitResult split(const Dataset& dataset, const SplitSpec& spec);

using CategoryMap = std::map<std::string, std::string>;

/// Replaces every label by its category. Throws ContractError naming the
/// first label the map does not cover.
Dataset relabel(const Dataset& dataset, const CategoryMap& map);

/// Drops instances whose label and four features bit-for-bit match an
/// earlier one. Returns the cleaned set and the number removed.
std::pair<Dataset, std::size_t> dedupe(const Dataset& dataset);

inline constexpr const char* kInstanceHeader = "label,iplen_mu,iplen_sigma,tcpwin_mu,tcpwin_sigma";

void write_instances(const Dataset& dataset, std::ostream& out);
void write_instances(const Dataset& dataset, const std::filesystem::path& path);
/// Throws FormatError with the 1-based line number on schema or number errors.
Dataset read_instances(std::istream& in);
Dataset read_instances(const std::filesystem::path& path);

/// Two-column CSV with header device_label,category.
CategoryMap read_category_map(const std::filesystem::path& path);

}  // namespace netprint
