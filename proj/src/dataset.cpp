#include "netprint/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

#include "netprint/csv.hpp"
#include "netprint/error.hpp"
#include "netprint/random.hpp"

namespace netprint {

namespace {

void shuffle_positions(std::vector<std::size_t>& positions, Xoshiro256StarStar& rng) {
    for (std::size_t i = positions.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_below(i));
        std::swap(positions[i - 1], positions[j]);
    }
}

Dataset gather(const Dataset& source, const std::vector<std::size_t>& positions) {
    std::vector<LabeledInstance> out;
    out.reserve(positions.size());
    for (auto p : positions) out.push_back(source[p]);
    return Dataset(std::move(out));
}

}  // namespace

Dataset::Dataset(std::vector<LabeledInstance> instances) : instances_(std::move(instances)) {
    std::set<std::string> distinct;
    for (const auto& inst : instances_) distinct.insert(inst.label);
    labels_.assign(distinct.begin(), distinct.end());
}

std::map<std::string, std::size_t> Dataset::label_counts() const {
    std::map<std::string, std::size_t> counts;
    for (const auto& inst : instances_) ++counts[inst.label];
    return counts;
}

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ContractError("train fraction must lie strictly between 0 and 1");
}

std::size_t train_count(std::size_t n, double train_fraction) {
    return static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
}

SplitResult split(const Dataset& dataset, const SplitSpec& spec) {
    spec.validate();
    if (dataset.empty()) throw ContractError("cannot split an empty dataset");

    Xoshiro256StarStar rng(spec.seed);
    SplitResult result;
    if (!spec.stratified) {
        std::vector<std::size_t> order(dataset.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle_positions(order, rng);
        const auto cut = static_cast<std::ptrdiff_t>(train_count(order.size(), spec.train_fraction));
        result.train_indices.assign(order.begin(), order.begin() + cut);
        result.test_indices.assign(order.begin() + cut, order.end());
    } else {
        std::map<std::string, std::vector<std::size_t>> by_label;
        for (std::size_t i = 0; i < dataset.size(); ++i) by_label[dataset[i].label].push_back(i);
        for (auto& [label, members] : by_label) {
            shuffle_positions(members, rng);
            const auto cut = static_cast<std::ptrdiff_t>(train_count(members.size(), spec.train_fraction));
            result.train_indices.insert(result.train_indices.end(), members.begin(), members.begin() + cut);
            result.test_indices.insert(result.test_indices.end(), members.begin() + cut, members.end());
        }
    }
    result.train = gather(dataset, result.train_indices);
    result.test = gather(dataset, result.test_indices);
    return result;
}

Dataset relabel(const Dataset& dataset, const CategoryMap& map) {
    for (const auto& label : dataset.labels())
        if (!map.contains(label)) throw ContractError("category map has no entry for label '" + label + "'");
    std::vector<LabeledInstance> out;
    out.reserve(dataset.size());
    for (const auto& inst : dataset.instances()) out.push_back({inst.fingerprint, map.at(inst.label)});
    return Dataset(std::move(out));
}

std::pair<Dataset, std::size_t> dedupe(const Dataset& dataset) {
    struct Key {
        std::string label;
        std::array<std::uint64_t, kFeatureCount> bits;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept {
            std::size_t h = std::hash<std::string>{}(k.label);
            for (auto b : k.bits) h = h * 1099511628211ULL ^ std::hash<std::uint64_t>{}(b);
            return h;
        }
    };

    std::unordered_set<Key, KeyHash> seen;
    std::vector<LabeledInstance> kept;
    for (const auto& inst : dataset.instances()) {
        Key key{inst.label, {}};
        const auto f = inst.fingerprint.features();
        for (std::size_t i = 0; i < kFeatureCount; ++i) key.bits[i] = std::bit_cast<std::uint64_t>(f[i]);
        if (seen.insert(std::move(key)).second) kept.push_back(inst);
    }
    const std::size_t removed = dataset.size() - kept.size();
    return {Dataset(std::move(kept)), removed};
}

void write_instances(const Dataset& dataset, std::ostream& out) {
    out << kInstanceHeader << '\n';
    for (const auto& inst : dataset.instances()) {
        if (inst.label.find_first_of("\r\n") != std::string::npos)
            throw ContractError("label contains a line break: '" + inst.label + "'");
        out << csv::escape_field(inst.label);
        for (double v : inst.fingerprint.features()) out << ',' << csv::format_double(v);
        out << '\n';
    }
}

void write_instances(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    write_instances(dataset, out);
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Dataset read_instances(std::istream& in) {
    std::string line;
    if (!csv::read_line(in, line)) throw FormatError("instance csv: missing header (line 1)");
    if (line != kInstanceHeader)
        throw FormatError("instance csv: line 1: expected header '" + std::string(kInstanceHeader) + "'");

    std::vector<LabeledInstance> instances;
    std::size_t line_no = 1;
    while (csv::read_line(in, line)) {
        ++line_no;
        const auto where = "instance csv: line " + std::to_string(line_no) + ": ";
        std::vector<std::string> fields;
        try {
            fields = csv::split_line(line);
        } catch (const FormatError& e) {
            throw FormatError(where + e.what());
        }
        if (fields.size() != 1 + kFeatureCount)
            throw FormatError(where + "expected 5 fields, found " + std::to_string(fields.size()));
        if (fields[0].empty()) throw FormatError(where + "empty label");
        FeatureVector f{};
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            const auto v = csv::parse_double(fields[i + 1]);
            if (!v || !std::isfinite(*v))
                throw FormatError(where + "bad value for " + kFeatureNames[i] + ": '" + fields[i + 1] + "'");
            f[i] = *v;
        }
        instances.push_back({Fingerprint::from_features(f), std::move(fields[0])});
    }
    return Dataset(std::move(instances));
}

Dataset read_instances(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return read_instances(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

CategoryMap read_category_map(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    if (!csv::read_line(in, line) || csv::split_line(line) != std::vector<std::string>{"device_label", "category"})
        throw FormatError(path.string() + ": line 1: expected header 'device_label,category'");
    CategoryMap map;
    std::size_t line_no = 1;
    while (csv::read_line(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        const auto fields = csv::split_line(line);
        const auto where = path.string() + ": line " + std::to_string(line_no) + ": ";
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
            throw FormatError(where + "expected 'device_label,category'");
        if (!map.emplace(fields[0], fields[1]).second)
            throw FormatError(where + "duplicate device label '" + fields[0] + "'");
    }
    return map;
}

}  // namespace netprint
