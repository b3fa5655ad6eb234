#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "netprint/dataset.hpp"
#include "netprint/forest.hpp"

namespace netprint {

struct ConfusionMatrix {
    std::vector<std::string> labels;
    /// counts[i][j]: instances of true class i predicted as class j.
    std::vector<std::vector<std::uint64_t>> counts;

    std::uint64_t total() const;
    std::uint64_t row_sum(std::size_t i) const;
    std::uint64_t column_sum(std::size_t j) const;
    std::uint64_t trace() const;
};

/// Per-class scores are nullopt when undefined: recall for a class with
/// no test instances, precision for a class never predicted.
struct EvalReport {
    double accuracy = 0.0;
    std::vector<std::optional<double>> recall;
    std::vector<std::optional<double>> precision;
    double rmse = 0.0;
    ConfusionMatrix matrix;
    std::uint64_t n_test = 0;
    ForestParams params;
    std::uint64_t seed = 0;
};

/// Scores every test instance. RMSE compares each instance's vote
/// fractions with its one-hot truth, averaged over instances and over the
/// forest's classes. Throws ContractError naming a test label the forest
/// never saw, or on an empty test set.
EvalReport evaluate(const RandomForest& forest, const Dataset& test, unsigned threads = 0);

/// report.csv: label,n_test,recall,precision sorted by label; NA marks
/// an undefined score.
void write_per_device_report(const EvalReport& report, const std::filesystem::path& path);
/// confusion.csv: square matrix with a label header row and column.
void write_confusion(const EvalReport& report, const std::filesystem::path& path);
void write_summary(const EvalReport& report, const std::filesystem::path& path);
/// Writes report.csv, confusion.csv and summary.txt into `dir`, creating it.
void write_reports(const EvalReport& report, const std::filesystem::path& dir);

/// Packet-level generator for a synthetic device: each packet draws
/// ip.len ~ N(iplen_mean, iplen_sd) and window ~ N(win_mean, win_sd),
/// rounded and clamped to the valid header ranges, and every window of
/// `window_size` packets becomes one fingerprint.
struct SyntheticProfile {
    std::string label;
    double iplen_mean = 0.0;
    double iplen_sd = 0.0;
    double win_mean = 0.0;
    double win_sd = 0.0;
    std::size_t n_instances = 0;
};

/// Deterministic under `seed`; profiles are generated in the given order.
Dataset make_synthetic(const std::vector<SyntheticProfile>& profiles, std::uint64_t seed,
                       std::size_t window_size = 5);

}  // namespace netprint
