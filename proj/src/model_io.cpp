#include "netprint/forest.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "netprint/error.hpp"

// Model file layout, little-endian throughout:
//   "NFPT" | u32 version | u32 n_trees | u32 mtry | u32 min_leaf
//   | u32 max_depth | u64 seed | u32 n_labels | n_labels x (u32 len, bytes)
//   then per tree: u32 node_count, nodes in preorder
//     internal: u8 0, u8 feature, u64 threshold (IEEE-754 bits)
//     leaf:     u8 1, u32 n_entries, n_entries x (u32 class, u32 count)
//   | u64 FNV-1a of every preceding byte

namespace netprint {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'N', 'F', 'P', 'T'};
constexpr std::uint8_t kTagInternal = 0;
constexpr std::uint8_t kTagLeaf = 1;

class Writer {
public:
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8() { return take(1)[0]; }
    std::uint32_t u32() {
        auto b = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }
    std::uint64_t u64() {
        auto b = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }
    std::string str() {
        const auto len = u32();
        auto b = take(len);
        return std::string(b.begin(), b.end());
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> take(std::size_t n) {
        if (n > remaining()) throw FormatError("model: truncated");
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

DecisionTree read_tree(Reader& in, std::size_t n_labels) {
    const std::uint32_t node_count = in.u32();
    if (node_count == 0) throw FormatError("model: empty tree");
    // each node takes at least 6 bytes
    if (node_count > in.remaining() / 6) throw FormatError("model: truncated");

    DecisionTree tree;
    // internal nodes still waiting for a child; second = left already attached
    std::vector<std::pair<std::size_t, bool>> open;
    for (std::uint32_t k = 0; k < node_count; ++k) {
        if (k > 0) {
            if (open.empty()) throw FormatError("model: tree has nodes after its last leaf");
            auto& top = open.back();
            if (!top.second) {
                top.second = true;
            } else {
                tree.set_right(top.first, k);
                open.pop_back();
            }
        }
        const auto tag = in.u8();
        if (tag == kTagInternal) {
            const auto feature = in.u8();
            if (feature >= kFeatureCount) throw FormatError("model: feature index out of range");
            const double threshold = std::bit_cast<double>(in.u64());
            open.emplace_back(tree.add_internal(feature, threshold), false);
        } else if (tag == kTagLeaf) {
            const auto entries = in.u32();
            if (entries == 0 || entries > n_labels) throw FormatError("model: bad leaf entry count");
            std::vector<ClassCount> counts(entries);
            for (std::uint32_t e = 0; e < entries; ++e) {
                counts[e].cls = in.u32();
                counts[e].count = in.u32();
                if (counts[e].cls >= n_labels || counts[e].count == 0 || (e > 0 && counts[e].cls <= counts[e - 1].cls))
                    throw FormatError("model: bad leaf class counts");
            }
            tree.add_leaf(counts);
        } else {
            throw FormatError("model: unknown node tag");
        }
    }
    if (!open.empty()) throw FormatError("model: tree ends with an incomplete node");
    return tree;
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::uint8_t> serialize(const RandomForest& forest) {
    Writer out;
    for (auto c : kMagic) out.u8(c);
    out.u32(RandomForest::kFormatVersion);
    const auto& p = forest.params();
    out.u32(static_cast<std::uint32_t>(forest.trees().size()));
    out.u32(static_cast<std::uint32_t>(p.mtry));
    out.u32(static_cast<std::uint32_t>(p.min_leaf));
    out.u32(static_cast<std::uint32_t>(p.max_depth));
    out.u64(forest.seed());
    out.u32(static_cast<std::uint32_t>(forest.vocabulary().size()));
    for (const auto& label : forest.vocabulary()) out.str(label);

    for (const auto& tree : forest.trees()) {
        out.u32(static_cast<std::uint32_t>(tree.nodes().size()));
        for (const auto& node : tree.nodes()) {
            if (node.is_leaf()) {
                out.u8(kTagLeaf);
                const auto counts = tree.counts_of(node);
                out.u32(static_cast<std::uint32_t>(counts.size()));
                for (const auto& cc : counts) {
                    out.u32(cc.cls);
                    out.u32(cc.count);
                }
            } else {
                out.u8(kTagInternal);
                out.u8(static_cast<std::uint8_t>(node.feature));
                out.u64(std::bit_cast<std::uint64_t>(node.threshold));
            }
        }
    }
    out.u64(fnv1a64(out.bytes));
    return std::move(out.bytes);
}

RandomForest deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kMagic.size() + 4 + 8) throw FormatError("model: file too short");
    if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw FormatError("model: bad magic");

    const auto body = bytes.first(bytes.size() - 8);
    Reader trailer(bytes.last(8));
    if (trailer.u64() != fnv1a64(body)) throw FormatError("model: checksum mismatch");

    Reader in(body.subspan(kMagic.size()));
    const auto version = in.u32();
    if (version != RandomForest::kFormatVersion)
        throw FormatError("model: unsupported format version " + std::to_string(version));

    ForestParams params;
    params.n_trees = in.u32();
    params.mtry = in.u32();
    params.min_leaf = in.u32();
    params.max_depth = in.u32();
    const auto seed = in.u64();
    try {
        params.validate();
    } catch (const ContractError& e) {
        throw FormatError(std::string("model: ") + e.what());
    }

    const auto n_labels = in.u32();
    if (n_labels == 0 || n_labels > in.remaining() / 4) throw FormatError("model: bad label count");
    std::vector<std::string> vocabulary(n_labels);
    for (auto& label : vocabulary) label = in.str();
    if (!std::is_sorted(vocabulary.begin(), vocabulary.end()) ||
        std::adjacent_find(vocabulary.begin(), vocabulary.end()) != vocabulary.end())
        throw FormatError("model: label vocabulary not sorted and unique");

    std::vector<DecisionTree> trees;
    for (std::size_t t = 0; t < params.n_trees; ++t) trees.push_back(read_tree(in, n_labels));
    if (in.remaining() != 0) throw FormatError("model: trailing bytes after last tree");
    return RandomForest(params, seed, std::move(vocabulary), std::move(trees));
}

void save_model(const RandomForest& forest, const std::filesystem::path& path) {
    const auto bytes = serialize(forest);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

RandomForest load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return deserialize(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace netprint
