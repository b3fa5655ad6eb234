#include "netprint/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "netprint/csv.hpp"
#include "netprint/dataset.hpp"
#include "netprint/error.hpp"
#include "netprint/eval.hpp"
#include "netprint/fingerprint.hpp"
#include "netprint/forest.hpp"
#include "netprint/packet_ingest.hpp"

namespace netprint::cli {

namespace {

struct DeviceEntry {
    std::string label;
    std::string category;
};

// mac,label[,category]
std::map<MacAddress, DeviceEntry> read_device_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!csv::read_line(in, line)) throw FormatError(path + ": line 1: missing header");
    const auto header = csv::split_line(line);
    const bool has_category = header.size() == 3 && header[2] == "category";
    if (header.size() < 2 || header[0] != "mac" || header[1] != "label" || (header.size() == 3 && !has_category) ||
        header.size() > 3)
        throw FormatError(path + ": line 1: expected header 'mac,label' or 'mac,label,category'");

    std::map<MacAddress, DeviceEntry> devices;
    std::size_t line_no = 1;
    while (csv::read_line(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        const auto where = path + ": line " + std::to_string(line_no) + ": ";
        const auto fields = csv::split_line(line);
        if (fields.size() != header.size()) throw FormatError(where + "expected " + std::to_string(header.size()) + " fields");
        const auto mac = MacAddress::parse(fields[0]);
        if (!mac) throw FormatError(where + "invalid MAC '" + fields[0] + "'");
        if (fields[1].empty()) throw FormatError(where + "empty label");
        DeviceEntry entry{fields[1], has_category ? fields[2] : std::string{}};
        if (!devices.emplace(*mac, std::move(entry)).second)
            throw FormatError(where + "duplicate MAC " + mac->to_string());
    }
    if (devices.empty()) throw FormatError(path + ": no devices listed");
    return devices;
}

void print_stats(std::ostream& err, const std::string& name, const CaptureStats& s) {
    err << name << ": seen=" << s.packets_seen << " kept=" << s.packets_kept
        << " non_tcp_ipv4=" << s.packets_skipped_non_tcp_ipv4 << " malformed=" << s.packets_skipped_malformed
        << " other_mac=" << s.packets_filtered_mac << '\n';
}

struct ExtractOptions {
    std::vector<std::string> inputs;
    std::string device_map;
    std::size_t window = 5;
    bool dedupe = false;
    std::string label_by = "device";
    std::string output;
};

int cmd_extract(const ExtractOptions& opt, std::ostream& err) {
    const auto devices = read_device_map(opt.device_map);
    std::map<MacAddress, std::string> labels;
    for (const auto& [mac, entry] : devices) {
        if (opt.label_by == "category") {
            if (entry.category.empty())
                throw FormatError(opt.device_map + ": no category for " + mac.to_string() + " (needed by --label-by category)");
            labels.emplace(mac, entry.category);
        } else {
            labels.emplace(mac, entry.label);
        }
    }
    MacSet keep;
    for (const auto& [mac, entry] : devices) keep.insert(mac);

    // one device's stream is concatenated across files in path order
    auto inputs = opt.inputs;
    std::sort(inputs.begin(), inputs.end());
    std::vector<PacketRecord> capture;
    CaptureStats total;
    for (const auto& path : inputs) {
        auto result = ingest_file(path, &keep);
        if (!result.stats.balanced()) throw std::logic_error("capture accounting does not balance for " + path);
        print_stats(err, path, result.stats);
        total += result.stats;
        capture.insert(capture.end(), result.records.begin(), result.records.end());
    }
    if (inputs.size() > 1) print_stats(err, "total", total);

    ExtractionConfig config;
    config.window_size = opt.window;
    const auto extracted = extract_instances(capture, labels, config);
    for (const auto& d : extracted.devices)
        err << "device " << d.mac.to_string() << " (" << d.label << "): packets=" << d.packets
            << " instances=" << d.instances << '\n';

    Dataset dataset(extracted.instances);
    if (opt.dedupe) {
        auto [clean, removed] = dedupe(dataset);
        err << "duplicates removed: " << removed << '\n';
        dataset = std::move(clean);
    }
    write_instances(dataset, std::filesystem::path(opt.output));
    err << "instances written: " << dataset.size() << '\n';
    return kSuccess;
}

struct SplitOptions {
    std::string input;
    double fraction = 0.8;
    std::uint64_t seed = 1;
    bool stratified = false;
    std::vector<std::string> outputs;
};

int cmd_split(const SplitOptions& opt, std::ostream& err) {
    const auto dataset = read_instances(std::filesystem::path(opt.input));
    SplitSpec spec;
    spec.train_fraction = opt.fraction;
    spec.seed = opt.seed;
    spec.stratified = opt.stratified;
    const auto parts = split(dataset, spec);
    write_instances(parts.train, std::filesystem::path(opt.outputs.at(0)));
    write_instances(parts.test, std::filesystem::path(opt.outputs.at(1)));
    err << "instances=" << dataset.size() << " train=" << parts.train.size() << " test=" << parts.test.size()
        << " seed=" << opt.seed << '\n';
    return kSuccess;
}

struct RelabelOptions {
    std::string input;
    std::string map;
    std::string output;
};

int cmd_relabel(const RelabelOptions& opt, std::ostream& err) {
    const auto dataset = read_instances(std::filesystem::path(opt.input));
    const auto relabeled = relabel(dataset, read_category_map(opt.map));
    write_instances(relabeled, std::filesystem::path(opt.output));
    for (const auto& [label, count] : relabeled.label_counts()) err << label << ": " << count << '\n';
    return kSuccess;
}

struct TrainOptions {
    std::string input;
    ForestParams params;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string output;
};

int cmd_train(const TrainOptions& opt, std::ostream& err) {
    const auto dataset = read_instances(std::filesystem::path(opt.input));
    err << "training: instances=" << dataset.size() << " classes=" << dataset.labels().size()
        << " trees=" << opt.params.n_trees << " seed=" << opt.seed << " mtry=" << opt.params.mtry
        << " min_leaf=" << opt.params.min_leaf << " max_depth=" << opt.params.max_depth << '\n';
    const auto start = std::chrono::steady_clock::now();
    const auto forest = train(dataset, opt.params, opt.seed, opt.threads);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    save_model(forest, opt.output);
    err << "trained in " << elapsed.count() << " s, model written to " << opt.output << '\n';
    return kSuccess;
}

struct EvaluateOptions {
    std::string model;
    std::string input;
    std::string outdir = "reports";
    unsigned threads = 0;
};

int cmd_evaluate(const EvaluateOptions& opt, std::ostream& err) {
    const auto forest = load_model(opt.model);
    const auto test = read_instances(std::filesystem::path(opt.input));
    const auto report = evaluate(forest, test, opt.threads);
    write_reports(report, opt.outdir);
    err << "accuracy=" << csv::format_double(report.accuracy) << " rmse=" << csv::format_double(report.rmse)
        << " n_test=" << report.n_test << " reports in " << opt.outdir << '\n';
    return kSuccess;
}

struct PredictOptions {
    std::string model;
    std::string input;
    std::string output;
};

int cmd_predict(const PredictOptions& opt, std::ostream& err) {
    const auto forest = load_model(opt.model);
    const auto instances = read_instances(std::filesystem::path(opt.input));
    std::ofstream out(opt.output, std::ios::binary);
    if (!out) throw IoError("cannot write '" + opt.output + "'");
    out << "row_index,predicted_label,vote_fraction\n";
    const double n_trees = static_cast<double>(forest.trees().size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto votes = forest.votes(instances[i].fingerprint.features());
        const auto best = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
        out << i << ',' << csv::escape_field(forest.vocabulary()[best]) << ','
            << csv::format_double(votes[best] / n_trees) << '\n';
    }
    if (!out) throw IoError("write failed for '" + opt.output + "'");
    err << "predictions written: " << instances.size() << '\n';
    return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"netprint: passive device fingerprinting from packet headers"};
    app.name("netprint");
    app.require_subcommand(1);

    ExtractOptions ex;
    auto* extract = app.add_subcommand("extract", "Turn pcap/trace-CSV captures into a fingerprint instance CSV");
    extract->add_option("inputs", ex.inputs, "pcap or trace CSV files (read in sorted path order)")->required();
    extract->add_option("-m,--map", ex.device_map, "device map CSV: mac,label[,category]")->required();
    extract->add_option("-w,--window", ex.window, "packets per fingerprint window")->capture_default_str()
        ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20));
    extract->add_flag("--dedupe", ex.dedupe, "drop repeated (label, features) instances");
    extract->add_option("--label-by", ex.label_by, "label instances by device label or by category")
        ->capture_default_str()->check(CLI::IsMember({"device", "category"}));
    extract->add_option("-o,--output", ex.output, "instance CSV to write")->required();

    SplitOptions sp;
    auto* split_cmd = app.add_subcommand("split", "Shuffle and cut an instance CSV into train and test files");
    split_cmd->add_option("instances", sp.input, "instance CSV")->required();
    split_cmd->add_option("-f,--fraction", sp.fraction, "training fraction")->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    split_cmd->add_option("-s,--seed", sp.seed, "shuffle seed")->capture_default_str();
    split_cmd->add_flag("--stratified", sp.stratified, "cut each label separately");
    split_cmd->add_option("-o,--output", sp.outputs, "train CSV and test CSV")->required()->expected(2);

    RelabelOptions rl;
    auto* relabel_cmd = app.add_subcommand("relabel", "Map device labels to categories (e.g. iot / non-iot)");
    relabel_cmd->add_option("instances", rl.input, "instance CSV")->required();
    relabel_cmd->add_option("-m,--map", rl.map, "category CSV: device_label,category")->required();
    relabel_cmd->add_option("-o,--output", rl.output, "instance CSV to write")->required();

    TrainOptions tr;
    auto* train_cmd = app.add_subcommand("train", "Train a random forest on an instance CSV");
    train_cmd->add_option("train", tr.input, "training instance CSV")->required();
    train_cmd->add_option("-t,--trees", tr.params.n_trees, "number of trees")->capture_default_str()
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("-s,--seed", tr.seed, "forest seed")->capture_default_str();
    train_cmd->add_option("--mtry", tr.params.mtry, "features tried per node (1-4)")->capture_default_str()
        ->check(CLI::Range(1, 4));
    train_cmd->add_option("--min-leaf", tr.params.min_leaf, "minimum instances per leaf")->capture_default_str()
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--max-depth", tr.params.max_depth, "depth cap, 0 = unlimited")->capture_default_str();
    train_cmd->add_option("--threads", tr.threads, "worker threads, 0 = all cores (NETPRINT_THREADS caps)")
        ->capture_default_str();
    train_cmd->add_option("-o,--output", tr.output, "model file to write")->required();

    EvaluateOptions ev;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a model on a labeled test CSV and write reports");
    evaluate_cmd->add_option("model", ev.model, "model file")->required();
    evaluate_cmd->add_option("test", ev.input, "test instance CSV")->required();
    evaluate_cmd->add_option("--outdir", ev.outdir, "report directory")->capture_default_str();
    evaluate_cmd->add_option("--threads", ev.threads, "worker threads, 0 = all cores")->capture_default_str();

    PredictOptions pr;
    auto* predict_cmd = app.add_subcommand("predict", "Label each instance with the forest's plurality vote");
    predict_cmd->add_option("model", pr.model, "model file")->required();
    predict_cmd->add_option("instances", pr.input, "instance CSV (labels ignored)")->required();
    predict_cmd->add_option("-o,--output", pr.output, "predictions CSV to write")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kUsageOrFormat;
    }

    try {
        if (*extract) return cmd_extract(ex, err);
        if (*split_cmd) return cmd_split(sp, err);
        if (*relabel_cmd) return cmd_relabel(rl, err);
        if (*train_cmd) return cmd_train(tr, err);
        if (*evaluate_cmd) return cmd_evaluate(ev, err);
        if (*predict_cmd) return cmd_predict(pr, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kUsageOrFormat;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternal;
    }
    return kInternal;
}

}  // namespace netprint::cli
