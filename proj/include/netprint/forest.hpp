#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netprint/dataset.hpp"
#include "netprint/fingerprint.hpp"

namespace netprint {

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t mtry = 2;  ///< floor(sqrt(4))
    std::size_t min_leaf = 1;
    std::size_t max_depth = 0;  ///< 0 means unlimited

    void validate() const;
    friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

/// A training row as seen by the split search: features plus class index
/// into the forest's label vocabulary.
struct SplitSample {
    FeatureVector x{};
    std::uint32_t cls = 0;
};

struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;  ///< Gini impurity decrease
};

/// Best Gini split over the given features. Candidate thresholds are the
/// midpoints between consecutive distinct values; rows with value <=
/// threshold go left. Both sides must keep at least min_leaf rows. Ties go
/// to the lower feature index, then the lower threshold; split quality is
/// compared in exact integer arithmetic so ties are detected exactly.
/// Returns nullopt when no candidate has positive gain.
std::optional<Split> best_split(std::span<const SplitSample> samples, std::span<const std::size_t> feature_subset,
                                std::size_t n_classes, std::size_t min_leaf = 1);

/// Candidate threshold between two consecutive distinct values a < b.
/// Always satisfies a <= t < b.
double split_midpoint(double a, double b);

struct ClassCount {
    std::uint32_t cls = 0;
    std::uint32_t count = 0;
    friend bool operator==(const ClassCount&, const ClassCount&) = default;
};

/// Flat preorder node. Internal nodes have their left child at index + 1.
struct TreeNode {
    static constexpr std::uint32_t kLeaf = 0xffffffffu;

    std::uint32_t feature = kLeaf;
    double threshold = 0.0;
    std::uint32_t right = 0;
    // leaf payload: a slice of DecisionTree::leaf_counts() and its argmax
    std::uint32_t counts_begin = 0;
    std::uint32_t counts_size = 0;
    std::uint32_t vote = 0;

    bool is_leaf() const { return feature == kLeaf; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
public:
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const std::vector<ClassCount>& leaf_counts() const { return counts_; }
    std::span<const ClassCount> counts_of(const TreeNode& leaf) const {
        return std::span(counts_).subspan(leaf.counts_begin, leaf.counts_size);
    }

    /// Index of the leaf that `x` falls into.
    std::size_t leaf_for(const FeatureVector& x) const;
    /// Class voted by this tree: the leaf's majority class, lowest index on ties.
    std::uint32_t vote(const FeatureVector& x) const { return nodes_[leaf_for(x)].vote; }

    std::size_t add_internal(std::uint32_t feature, double threshold);
    std::size_t add_leaf(std::span<const ClassCount> counts);
    void set_right(std::size_t node, std::size_t right) { nodes_[node].right = static_cast<std::uint32_t>(right); }

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

private:
    std::vector<TreeNode> nodes_;
    std::vector<ClassCount> counts_;
};

class RandomForest {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    RandomForest() = default;
    RandomForest(ForestParams params, std::uint64_t seed, std::vector<std::string> vocabulary,
                 std::vector<DecisionTree> trees);

    const ForestParams& params() const { return params_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<std::string>& vocabulary() const { return vocabulary_; }
    const std::vector<DecisionTree>& trees() const { return trees_; }

    /// Vocabulary index of `label`, or nullopt.
    std::optional<std::uint32_t> class_index(const std::string& label) const;

    /// Votes per vocabulary class; they sum to the tree count.
    std::vector<std::uint32_t> votes(const FeatureVector& x) const;
    /// Plurality class index, lowest index (smallest label) on ties.
    std::uint32_t predict_index(const FeatureVector& x) const;
    const std::string& predict(const Fingerprint& fp) const { return vocabulary_[predict_index(fp.features())]; }
    /// Fraction of trees voting for each label that received a vote.
    std::map<std::string, double> predict_proba(const Fingerprint& fp) const;

    friend bool operator==(const RandomForest&, const RandomForest&) = default;

private:
    ForestParams params_;
    std::uint64_t seed_ = 0;
    std::vector<std::string> vocabulary_;
    std::vector<DecisionTree> trees_;
};

/// Grows params.n_trees CART trees. Tree t uses a xoshiro256** stream
/// seeded with the t-th output of splitmix64(seed); within a tree the
/// stream is consumed by the N bootstrap draws, then by the per-node
/// feature draws in preorder. `threads` = 0 picks the hardware count,
/// capped by NETPRINT_THREADS. The result does not depend on `threads`.
RandomForest train(const Dataset& train_set, const ForestParams& params, std::uint64_t seed, unsigned threads = 0);

/// Worker count for parallel loops: `requested` (0 = hardware
/// concurrency), capped by the NETPRINT_THREADS environment variable.
unsigned resolve_threads(unsigned requested);

std::vector<std::uint8_t> serialize(const RandomForest& forest);
/// Throws FormatError on bad magic, version, checksum or structure.
RandomForest deserialize(std::span<const std::uint8_t> bytes);

void save_model(const RandomForest& forest, const std::filesystem::path& path);
RandomForest load_model(const std::filesystem::path& path);

/// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

}  // namespace netprint
