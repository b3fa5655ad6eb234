#include "netprint/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "netprint/csv.hpp"
#include "netprint/error.hpp"
#include "netprint/random.hpp"

namespace netprint {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

std::string score_text(const std::optional<double>& v) { return v ? csv::format_double(*v) : "NA"; }

}  // namespace

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) sum += row_sum(i);
    return sum;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t i) const {
    std::uint64_t sum = 0;
    for (auto c : counts[i]) sum += c;
    return sum;
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t j) const {
    std::uint64_t sum = 0;
    for (const auto& row : counts) sum += row[j];
    return sum;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) sum += counts[i][i];
    return sum;
}

EvalReport evaluate(const RandomForest& forest, const Dataset& test, unsigned threads) {
    if (test.empty()) throw ContractError("cannot evaluate on an empty test set");
    for (const auto& label : test.labels())
        if (!forest.class_index(label)) throw ContractError("test label '" + label + "' is not in the model vocabulary");

    const std::size_t k = forest.vocabulary().size();
    const std::size_t n = test.size();
    const double n_trees = static_cast<double>(forest.trees().size());

    // per-instance results land in fixed slots; the reduction below is serial
    std::vector<std::uint32_t> truth(n), predicted(n);
    std::vector<double> squared_error(n);
    auto score_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto& inst = test[i];
            const auto x = inst.fingerprint.features();
            const auto votes = forest.votes(x);
            truth[i] = *forest.class_index(inst.label);
            predicted[i] = static_cast<std::uint32_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
            double se = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                const double p = votes[c] / n_trees;
                const double y = c == truth[i] ? 1.0 : 0.0;
                se += (p - y) * (p - y);
            }
            squared_error[i] = se;
        }
    };

    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), n));
    if (workers <= 1) {
        score_range(0, n);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t begin = 0; begin < n; begin += chunk)
            pool.emplace_back(score_range, begin, std::min(n, begin + chunk));
    }

    EvalReport report;
    report.n_test = n;
    report.params = forest.params();
    report.seed = forest.seed();
    report.matrix.labels = forest.vocabulary();
    report.matrix.counts.assign(k, std::vector<std::uint64_t>(k, 0));
    double sum_se = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ++report.matrix.counts[truth[i]][predicted[i]];
        sum_se += squared_error[i];
    }
    report.accuracy = static_cast<double>(report.matrix.trace()) / static_cast<double>(n);
    report.rmse = std::sqrt(sum_se / (static_cast<double>(n) * static_cast<double>(k)));
    for (std::size_t c = 0; c < k; ++c) {
        const auto row = report.matrix.row_sum(c);
        const auto col = report.matrix.column_sum(c);
        const auto hit = static_cast<double>(report.matrix.counts[c][c]);
        report.recall.push_back(row ? std::optional(hit / static_cast<double>(row)) : std::nullopt);
        report.precision.push_back(col ? std::optional(hit / static_cast<double>(col)) : std::nullopt);
    }
    return report;
}

void write_per_device_report(const EvalReport& report, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << "label,n_test,recall,precision\n";
    const auto& labels = report.matrix.labels;
    for (std::size_t c = 0; c < labels.size(); ++c) {
        out << csv::escape_field(labels[c]) << ',' << report.matrix.row_sum(c) << ',' << score_text(report.recall[c])
            << ',' << score_text(report.precision[c]) << '\n';
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_confusion(const EvalReport& report, const std::filesystem::path& path) {
    auto out = open_output(path);
    const auto& labels = report.matrix.labels;
    out << "true\\predicted";
    for (const auto& l : labels) out << ',' << csv::escape_field(l);
    out << '\n';
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << csv::escape_field(labels[i]);
        for (auto c : report.matrix.counts[i]) out << ',' << c;
        out << '\n';
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_summary(const EvalReport& report, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << "accuracy: " << csv::format_double(report.accuracy) << '\n'
        << "rmse: " << csv::format_double(report.rmse) << '\n'
        << "n_test: " << report.n_test << '\n'
        << "n_classes: " << report.matrix.labels.size() << '\n'
        << "trees: " << report.params.n_trees << '\n'
        << "mtry: " << report.params.mtry << '\n'
        << "min_leaf: " << report.params.min_leaf << '\n'
        << "max_depth: " << report.params.max_depth << '\n'
        << "seed: " << report.seed << '\n'
        << "per_class_accuracy: recall (correct / test instances of that class); NA = class absent\n";
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_reports(const EvalReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    write_per_device_report(report, dir / "report.csv");
    write_confusion(report, dir / "confusion.csv");
    write_summary(report, dir / "summary.txt");
}

Dataset make_synthetic(const std::vector<SyntheticProfile>& profiles, std::uint64_t seed, std::size_t window_size) {
    ExtractionConfig{window_size, true}.validate();
    Xoshiro256StarStar rng(seed);
    auto draw = [&rng](double mean, double sd, double lo) {
        const double v = std::round(mean + sd * rng.normal());
        return static_cast<std::uint16_t>(std::clamp(v, lo, 65535.0));
    };

    std::vector<LabeledInstance> instances;
    std::vector<PacketRecord> window(window_size);
    for (const auto& profile : profiles) {
        if (profile.label.empty()) throw ContractError("synthetic profile needs a label");
        if (profile.iplen_sd < 0 || profile.win_sd < 0) throw ContractError("synthetic profile sd must be >= 0");
        for (std::size_t i = 0; i < profile.n_instances; ++i) {
            for (auto& packet : window) {
                packet.ip_total_length = draw(profile.iplen_mean, profile.iplen_sd, kMinTcpIpv4Length);
                packet.tcp_window = draw(profile.win_mean, profile.win_sd, 0.0);
            }
            instances.push_back({compute_fingerprint(window), profile.label});
        }
    }
    return Dataset(std::move(instances));
}

}  // namespace netprint
