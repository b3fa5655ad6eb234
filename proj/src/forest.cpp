#include "netprint/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <thread>

#include "netprint/error.hpp"
#include "netprint/random.hpp"

namespace netprint {

namespace {

using u128 = unsigned __int128;

// Split quality as the exact fraction (SL*nR + SR*nL) / (nL*nR), where
// S = sum of squared class counts on a side. Larger is better; it is the
// weighted Gini impurity of the children up to an affine map.
struct Score {
    u128 num = 0;
    u128 den = 1;
    bool beats(const Score& other) const { return num * other.den > other.num * den; }
};

std::uint32_t argmax_lowest(std::span<const std::uint32_t> counts) {
    std::uint32_t best = 0;
    for (std::uint32_t c = 1; c < counts.size(); ++c)
        if (counts[c] > counts[best]) best = c;
    return best;
}

class TreeGrower {
public:
    TreeGrower(std::span<const SplitSample> data, std::size_t n_classes, const ForestParams& params,
               std::uint64_t tree_seed)
        : data_(data), n_classes_(n_classes), params_(params), rng_(tree_seed) {}

    DecisionTree grow() {
        const std::size_t n = data_.size();
        std::vector<SplitSample> sample(n);
        for (auto& s : sample) s = data_[static_cast<std::size_t>(rng_.uniform_below(n))];

        struct Task {
            std::size_t begin, end, depth, parent;
            bool is_right;
        };
        DecisionTree tree;
        std::vector<Task> stack{{0, n, 0, 0, false}};
        std::vector<std::uint32_t> counts(n_classes_);
        std::array<std::size_t, kFeatureCount> features{};

        while (!stack.empty()) {
            const Task task = stack.back();
            stack.pop_back();
            const std::size_t node_index = tree.nodes().size();
            if (task.is_right) tree.set_right(task.parent, node_index);

            std::span<SplitSample> rows(sample.data() + task.begin, task.end - task.begin);
            std::fill(counts.begin(), counts.end(), 0);
            for (const auto& r : rows) ++counts[r.cls];
            const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
            const bool depth_capped = params_.max_depth != 0 && task.depth >= params_.max_depth;

            std::optional<Split> split;
            if (!pure && !depth_capped && rows.size() >= 2 * params_.min_leaf) {
                std::iota(features.begin(), features.end(), std::size_t{0});
                for (std::size_t i = 0; i < params_.mtry; ++i) {
                    const auto j = i + static_cast<std::size_t>(rng_.uniform_below(kFeatureCount - i));
                    std::swap(features[i], features[j]);
                }
                split = best_split(rows, std::span(features.data(), params_.mtry), n_classes_, params_.min_leaf);
            }

            if (!split) {
                std::vector<ClassCount> leaf;
                for (std::uint32_t c = 0; c < n_classes_; ++c)
                    if (counts[c] > 0) leaf.push_back({c, counts[c]});
                tree.add_leaf(leaf);
                continue;
            }

            tree.add_internal(static_cast<std::uint32_t>(split->feature), split->threshold);
            const auto mid = std::stable_partition(rows.begin(), rows.end(), [&](const SplitSample& s) {
                return s.x[split->feature] <= split->threshold;
            });
            const std::size_t left_end = task.begin + static_cast<std::size_t>(mid - rows.begin());
            // right pushed first so the left subtree is built (and draws) first
            stack.push_back({left_end, task.end, task.depth + 1, node_index, true});
            stack.push_back({task.begin, left_end, task.depth + 1, node_index, false});
        }
        return tree;
    }

private:
    std::span<const SplitSample> data_;
    std::size_t n_classes_;
    const ForestParams& params_;
    Xoshiro256StarStar rng_;
};

}  // namespace

void ForestParams::validate() const {
    if (n_trees < 1) throw ContractError("forest needs at least one tree");
    if (mtry < 1 || mtry > kFeatureCount) throw ContractError("mtry must be between 1 and 4");
    if (min_leaf < 1) throw ContractError("min_leaf must be at least 1");
}

double split_midpoint(double a, double b) {
    const double m = std::midpoint(a, b);
    return m < b ? m : a;
}

std::optional<Split> best_split(std::span<const SplitSample> samples, std::span<const std::size_t> feature_subset,
                                std::size_t n_classes, std::size_t min_leaf) {
    const std::size_t n = samples.size();
    if (n < 2 || min_leaf < 1 || n < 2 * min_leaf) return std::nullopt;

    std::vector<std::uint64_t> total(n_classes);
    for (const auto& s : samples) ++total[s.cls];
    std::uint64_t parent_sq = 0;
    for (auto c : total) parent_sq += c * c;

    std::vector<std::size_t> subset(feature_subset.begin(), feature_subset.end());
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());

    std::vector<std::pair<double, std::uint32_t>> column(n);
    std::vector<std::uint64_t> left(n_classes);
    std::vector<std::uint64_t> right(n_classes);

    std::optional<Split> best;
    Score best_score;
    for (const std::size_t f : subset) {
        for (std::size_t i = 0; i < n; ++i) column[i] = {samples[i].x[f], samples[i].cls};
        std::sort(column.begin(), column.end());
        std::fill(left.begin(), left.end(), 0);
        right = total;
        std::uint64_t left_sq = 0;
        std::uint64_t right_sq = parent_sq;

        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto c = column[i].second;
            left_sq += 2 * left[c] + 1;
            ++left[c];
            right_sq -= 2 * right[c] - 1;
            --right[c];

            const std::uint64_t n_left = i + 1;
            const std::uint64_t n_right = n - n_left;
            if (column[i].first == column[i + 1].first) continue;
            if (n_left < min_leaf || n_right < min_leaf) continue;

            const Score score{u128(left_sq) * n_right + u128(right_sq) * n_left, u128(n_left) * n_right};
            if (!best || score.beats(best_score)) {
                best_score = score;
                best = Split{f, split_midpoint(column[i].first, column[i + 1].first), 0.0};
            }
        }
    }
    if (!best) return std::nullopt;
    // positive gain  <=>  num/den > parent_sq/n
    if (!(best_score.num * n > u128(parent_sq) * best_score.den)) return std::nullopt;
    const double dn = static_cast<double>(n);
    best->gain = (static_cast<double>(best_score.num) / static_cast<double>(best_score.den) -
                  static_cast<double>(parent_sq) / dn) / dn;
    return best;
}

std::size_t DecisionTree::leaf_for(const FeatureVector& x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const auto& node = nodes_[i];
        i = x[node.feature] <= node.threshold ? i + 1 : node.right;
    }
    return i;
}

std::size_t DecisionTree::add_internal(std::uint32_t feature, double threshold) {
    TreeNode node;
    node.feature = feature;
    node.threshold = threshold;
    nodes_.push_back(node);
    return nodes_.size() - 1;
}

std::size_t DecisionTree::add_leaf(std::span<const ClassCount> counts) {
    TreeNode node;
    node.counts_begin = static_cast<std::uint32_t>(counts_.size());
    node.counts_size = static_cast<std::uint32_t>(counts.size());
    const ClassCount* best = nullptr;
    for (const auto& cc : counts) {
        // counts arrive in ascending class order, so strict > keeps the lowest index
        if (!best || cc.count > best->count) best = &cc;
        counts_.push_back(cc);
    }
    node.vote = best ? best->cls : 0;
    nodes_.push_back(node);
    return nodes_.size() - 1;
}

RandomForest::RandomForest(ForestParams params, std::uint64_t seed, std::vector<std::string> vocabulary,
                           std::vector<DecisionTree> trees)
    : params_(params), seed_(seed), vocabulary_(std::move(vocabulary)), trees_(std::move(trees)) {}

std::optional<std::uint32_t> RandomForest::class_index(const std::string& label) const {
    auto it = std::lower_bound(vocabulary_.begin(), vocabulary_.end(), label);
    if (it == vocabulary_.end() || *it != label) return std::nullopt;
    return static_cast<std::uint32_t>(it - vocabulary_.begin());
}

std::vector<std::uint32_t> RandomForest::votes(const FeatureVector& x) const {
    std::vector<std::uint32_t> counts(vocabulary_.size());
    for (const auto& tree : trees_) ++counts[tree.vote(x)];
    return counts;
}

std::uint32_t RandomForest::predict_index(const FeatureVector& x) const {
    return argmax_lowest(votes(x));
}

std::map<std::string, double> RandomForest::predict_proba(const Fingerprint& fp) const {
    const auto counts = votes(fp.features());
    std::map<std::string, double> proba;
    const double n = static_cast<double>(trees_.size());
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] > 0) proba.emplace(vocabulary_[c], counts[c] / n);
    return proba;
}

unsigned resolve_threads(unsigned requested) {
    unsigned threads = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("NETPRINT_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) threads = std::min(threads, static_cast<unsigned>(cap));
    }
    return threads;
}

RandomForest train(const Dataset& train_set, const ForestParams& params, std::uint64_t seed, unsigned threads) {
    params.validate();
    if (train_set.empty()) throw ContractError("cannot train on an empty dataset");
    if (train_set.size() < params.min_leaf)
        throw ContractError("training set has " + std::to_string(train_set.size()) +
                            " instances, fewer than min_leaf = " + std::to_string(params.min_leaf));

    const auto& vocabulary = train_set.labels();
    std::vector<SplitSample> data(train_set.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& inst = train_set[i];
        data[i].x = inst.fingerprint.features();
        data[i].cls = static_cast<std::uint32_t>(
            std::lower_bound(vocabulary.begin(), vocabulary.end(), inst.label) - vocabulary.begin());
    }

    std::vector<std::uint64_t> tree_seeds(params.n_trees);
    SplitMix64 master(seed);
    for (auto& s : tree_seeds) s = master.next();

    std::vector<DecisionTree> trees(params.n_trees);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (std::size_t t; (t = next.fetch_add(1)) < trees.size() && !failed;) {
            try {
                trees[t] = TreeGrower(data, vocabulary.size(), params, tree_seeds[t]).grow();
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
            }
        }
    };

    const unsigned workers = std::min<std::size_t>(resolve_threads(threads), trees.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return RandomForest(params, seed, vocabulary, std::move(trees));
}

}  // namespace netprint
