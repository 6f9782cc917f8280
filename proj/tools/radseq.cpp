// radseq — discovery-radiomics pipeline front end.
//
// Subcommands wire the library into reproducible batch experiments: synth,
// split, augment, discover, extract, fit-tree, eval, cv. Every command prints
// a single-line JSON summary to stdout; artifacts are written atomically.
// Exit codes: 0 success, 1 domain error, 2 usage or I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "radseq/augment.hpp"
#include "radseq/classifier.hpp"
#include "radseq/dataset.hpp"
#include "radseq/eval.hpp"
#include "radseq/sequencer.hpp"
#include "radseq/util.hpp"

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Config and command-line problems; maps to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Run configuration (JSON file). Unknown keys are rejected; seeds have no
// defaults and must be spelled out in the sections that use them.

struct RunConfig {
    json raw = json::object();

    bool has(const std::string& section) const { return raw.contains(section); }

    const json& section(const std::string& name) const {
        if (!raw.contains(name)) {
            throw UsageError("config: missing section '" + name + "'");
        }
        return raw.at(name);
    }
};

void check_keys(const json& obj, const std::string& where,
                const std::vector<std::string>& known) {
    if (!obj.is_object()) {
        throw UsageError("config: '" + where + "' must be an object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw UsageError("config: unknown key '" + where + "." + key + "'");
        }
    }
}

template <class T>
T get_or(const json& obj, const std::string& where, const std::string& key, T fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw UsageError("config: bad value for '" + where + "." + key + "'");
    }
}

std::uint64_t require_seed(const json& obj, const std::string& where) {
    if (!obj.contains("seed")) {
        throw UsageError("config: '" + where + ".seed' must be set explicitly");
    }
    try {
        return obj.at("seed").get<std::uint64_t>();
    } catch (const json::exception&) {
        throw UsageError("config: bad value for '" + where + ".seed'");
    }
}

RunConfig load_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) {
        return cfg;
    }
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot open config " + path);
    }
    try {
        cfg.raw = json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError("config " + path + ": " + e.what());
    }
    check_keys(cfg.raw, "<root>",
               {"sequencer", "augment", "tree", "split", "synth", "cv", "paths"});
    if (cfg.has("paths")) {
        check_keys(cfg.raw.at("paths"), "paths",
                   {"archive", "train", "val", "test", "model", "tree", "sequences",
                    "report", "log", "out"});
    }
    return cfg;
}

radseq::SequencerConfig sequencer_config(const RunConfig& cfg) {
    const json& s = cfg.section("sequencer");
    check_keys(s, "sequencer",
               {"input_size", "conv_channels", "head_classes", "seed", "learning_rate",
                "epochs", "batch_size", "momentum", "weight_decay", "sequence_before_relu"});
    radseq::SequencerConfig c;
    c.input_size = get_or<std::size_t>(s, "sequencer", "input_size", c.input_size);
    if (s.contains("conv_channels")) {
        const auto ch = s.at("conv_channels");
        if (!ch.is_array() || ch.size() != 3) {
            throw UsageError("config: sequencer.conv_channels must have 3 entries");
        }
        for (std::size_t i = 0; i < 3; ++i) {
            c.conv_channels[i] = ch.at(i).get<std::size_t>();
        }
    }
    c.head_classes = get_or<std::size_t>(s, "sequencer", "head_classes", c.head_classes);
    c.seed = require_seed(s, "sequencer");
    c.hyperparams.learning_rate =
        get_or<double>(s, "sequencer", "learning_rate", c.hyperparams.learning_rate);
    c.hyperparams.epochs = get_or<std::size_t>(s, "sequencer", "epochs", c.hyperparams.epochs);
    c.hyperparams.batch_size =
        get_or<std::size_t>(s, "sequencer", "batch_size", c.hyperparams.batch_size);
    c.hyperparams.momentum = get_or<double>(s, "sequencer", "momentum", c.hyperparams.momentum);
    c.hyperparams.weight_decay =
        get_or<double>(s, "sequencer", "weight_decay", c.hyperparams.weight_decay);
    c.sequence_before_relu =
        get_or<bool>(s, "sequencer", "sequence_before_relu", c.sequence_before_relu);
    return c;
}

radseq::AugmentPolicy augment_policy(const RunConfig& cfg) {
    radseq::AugmentPolicy p;
    if (!cfg.has("augment")) {
        return p;
    }
    const json& a = cfg.section("augment");
    check_keys(a, "augment",
               {"malignant_step_deg", "benign_step_deg", "interpolation", "fill_value"});
    p.malignant_step_deg = get_or<int>(a, "augment", "malignant_step_deg", p.malignant_step_deg);
    p.benign_step_deg = get_or<int>(a, "augment", "benign_step_deg", p.benign_step_deg);
    if (a.contains("interpolation") && a.at("interpolation") != "bilinear") {
        throw UsageError("config: augment.interpolation must be \"bilinear\"");
    }
    p.fill_value = get_or<double>(a, "augment", "fill_value", p.fill_value);
    return p;
}

radseq::TreeParams tree_params(const RunConfig& cfg) {
    radseq::TreeParams t;
    if (!cfg.has("tree")) {
        return t;
    }
    const json& s = cfg.section("tree");
    check_keys(s, "tree", {"max_depth", "min_samples_leaf", "min_impurity_decrease"});
    t.max_depth = get_or<std::size_t>(s, "tree", "max_depth", t.max_depth);
    t.min_samples_leaf = get_or<std::size_t>(s, "tree", "min_samples_leaf", t.min_samples_leaf);
    t.min_impurity_decrease =
        get_or<double>(s, "tree", "min_impurity_decrease", t.min_impurity_decrease);
    return t;
}

std::string config_path(const RunConfig& cfg, const std::string& flag_value,
                        const std::string& key) {
    if (!flag_value.empty()) {
        return flag_value;
    }
    if (cfg.has("paths")) {
        const json& p = cfg.raw.at("paths");
        if (p.contains(key)) {
            return p.at(key).get<std::string>();
        }
    }
    throw UsageError("no path given for '" + key + "' (flag or config paths." + key + ")");
}

void atomic_write_text(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw UsageError("cannot open " + tmp.string() + " for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw UsageError("write failure on " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw UsageError("cannot rename " + tmp.string() + " to " + path.string());
    }
}

std::string file_hash(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw UsageError("cannot reopen " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return radseq::to_hex(radseq::fnv1a64(bytes));
}

void print_summary(const ordered_json& j) { std::cout << j.dump() << "\n"; }

// CSV of extracted sequences; full float64 round-trip formatting so tree
// fitting stays bit-reproducible across the file boundary.
std::string sequences_csv(const std::vector<radseq::RadiomicSequence>& seqs) {
    if (seqs.empty()) {
        throw radseq::ArgumentError("no sequences to write");
    }
    const std::size_t d = seqs[0].features.size();
    std::string out = "patient_id,lesion_id,rotation_deg,annotator_id,label";
    for (std::size_t i = 0; i < d; ++i) {
        out += ",f" + std::to_string(i);
    }
    out += '\n';
    for (const radseq::RadiomicSequence& s : seqs) {
        out += s.patient_id + "," + s.lesion_id + "," + std::to_string(s.rotation_deg) + "," +
               std::to_string(s.annotator_id) + "," +
               std::to_string(static_cast<int>(s.label));
        for (double f : s.features) {
            out += ",";
            out += fmt_double(f);
        }
        out += '\n';
    }
    return out;
}

std::vector<radseq::RadiomicSequence> sequences_from_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot open " + path.string());
    }
    std::string line;
    std::uint64_t line_no = 1;
    if (!std::getline(in, line)) {
        throw radseq::ParseError("sequences " + path.string() + ": empty file", 1);
    }
    if (line.rfind("patient_id,lesion_id,rotation_deg,annotator_id,label", 0) != 0) {
        throw radseq::ParseError("sequences " + path.string() + ": bad header", 1);
    }

    std::vector<radseq::RadiomicSequence> seqs;
    std::optional<std::size_t> width;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
        if (cells.size() < 6) {
            throw radseq::ParseError(
                "sequences " + path.string() + ": too few columns at line " +
                    std::to_string(line_no),
                line_no);
        }
        radseq::RadiomicSequence s;
        s.patient_id = cells[0];
        s.lesion_id = cells[1];
        try {
            s.rotation_deg = static_cast<std::uint16_t>(std::stoul(cells[2]));
            s.annotator_id = static_cast<std::uint8_t>(std::stoul(cells[3]));
            const int label = std::stoi(cells[4]);
            if (label != 0 && label != 1) {
                throw std::invalid_argument("label");
            }
            s.label = static_cast<radseq::Label>(label);
            s.features.reserve(cells.size() - 5);
            for (std::size_t i = 5; i < cells.size(); ++i) {
                std::size_t used = 0;
                s.features.push_back(std::stod(cells[i], &used));
                if (used != cells[i].size()) {
                    throw std::invalid_argument("feature");
                }
            }
        } catch (const std::exception&) {
            throw radseq::ParseError("sequences " + path.string() +
                                         ": malformed row at line " + std::to_string(line_no),
                                     line_no);
        }
        if (width.has_value() && s.features.size() != *width) {
            throw radseq::ParseError("sequences " + path.string() +
                                         ": ragged row at line " + std::to_string(line_no),
                                     line_no);
        }
        width = s.features.size();
        seqs.push_back(std::move(s));
    }
    if (seqs.empty()) {
        throw radseq::ParseError("sequences " + path.string() + ": no data rows", line_no);
    }
    return seqs;
}

// ---------------------------------------------------------------------------
// Commands.

int cmd_synth(const RunConfig& cfg, const std::string& out_flag) {
    const json& s = cfg.section("synth");
    check_keys(s, "synth",
               {"seed", "benign_patients", "malignant_patients", "lesions_per_patient",
                "patch_size"});
    const std::uint64_t seed = require_seed(s, "synth");
    const auto benign = get_or<std::size_t>(s, "synth", "benign_patients", 28);
    const auto malignant = get_or<std::size_t>(s, "synth", "malignant_patients", 69);
    const auto lesions = get_or<std::size_t>(s, "synth", "lesions_per_patient", 5);
    const auto patch_size = get_or<std::size_t>(s, "synth", "patch_size", 18);

    const fs::path out = config_path(cfg, out_flag, "archive");
    const radseq::PatchArchive archive =
        radseq::synthesize_cohort(seed, benign, malignant, lesions, patch_size);
    radseq::save_archive(archive, out);

    ordered_json j;
    j["command"] = "synth";
    j["archive"] = out.string();
    j["manifest"] = out.string() + ".manifest.csv";
    j["patches"] = archive.patches.size();
    j["patients"] = radseq::patient_ids(archive).size();
    j["archive_hash"] = file_hash(out);
    print_summary(j);
    return 0;
}

int cmd_split(const RunConfig& cfg, const std::string& in_flag,
              const std::string& train_flag, const std::string& val_flag,
              const std::string& test_flag) {
    const json& s = cfg.section("split");
    check_keys(s, "split", {"fractions", "seed"});
    radseq::SplitFractions fr;
    if (s.contains("fractions")) {
        const auto f = s.at("fractions");
        if (!f.is_array() || f.size() != 3) {
            throw UsageError("config: split.fractions must have 3 entries");
        }
        fr.train = f.at(0).get<double>();
        fr.val = f.at(1).get<double>();
        fr.test = f.at(2).get<double>();
    }
    const std::uint64_t seed = require_seed(s, "split");

    const fs::path in = config_path(cfg, in_flag, "archive");
    const radseq::PatchArchive archive = radseq::load_archive(in);
    const radseq::SplitSpec spec = radseq::stratified_patient_split(archive, fr, seed);

    ordered_json j;
    j["command"] = "split";
    j["archive"] = in.string();
    const std::array<std::pair<const std::string*, int>, 3> parts = {
        std::make_pair(&train_flag, 0), std::make_pair(&val_flag, 1),
        std::make_pair(&test_flag, 2)};
    for (const auto& [flag, part] : parts) {
        const radseq::PatchArchive sub = radseq::select_partition(archive, spec, part);
        const std::string name = spec.partition_names[static_cast<std::size_t>(part)];
        if (sub.patches.empty()) {
            j[name] = nullptr;
            continue;
        }
        const std::string path = config_path(cfg, *flag, name);
        radseq::save_archive(sub, path);
        j[name] = path;
        j[name + "_patches"] = sub.patches.size();
    }
    print_summary(j);
    return 0;
}

int cmd_augment(const RunConfig& cfg, const std::string& in_flag,
                const std::string& out_flag) {
    const radseq::AugmentPolicy policy = augment_policy(cfg);
    const fs::path in = config_path(cfg, in_flag, "archive");
    const fs::path out = config_path(cfg, out_flag, "out");

    const radseq::PatchArchive archive = radseq::load_archive(in);
    const radseq::PatchArchive augmented = radseq::augment_archive(archive, policy);
    radseq::save_archive(augmented, out);

    ordered_json j;
    j["command"] = "augment";
    j["archive"] = in.string();
    j["out"] = out.string();
    j["input_patches"] = archive.patches.size();
    j["output_patches"] = augmented.patches.size();
    j["archive_hash"] = file_hash(out);
    print_summary(j);
    return 0;
}

int cmd_discover(const RunConfig& cfg, const std::string& train_flag,
                 const std::string& val_flag, const std::string& model_flag,
                 const std::string& log_flag) {
    const radseq::SequencerConfig config = sequencer_config(cfg);
    const fs::path train_path = config_path(cfg, train_flag, "train");
    const fs::path model_path = config_path(cfg, model_flag, "model");

    const radseq::PatchArchive train = radseq::load_archive(train_path);
    radseq::PatchArchive val;
    val.patch_size = train.patch_size;
    std::string val_str;
    if (!val_flag.empty() || (cfg.has("paths") && cfg.raw.at("paths").contains("val"))) {
        val_str = config_path(cfg, val_flag, "val");
        val = radseq::load_archive(val_str);
    }

    const auto [model, log] = radseq::discover(train, val, config);
    radseq::save_model(model, model_path);

    std::string log_path;
    if (!log_flag.empty() || (cfg.has("paths") && cfg.raw.at("paths").contains("log"))) {
        log_path = config_path(cfg, log_flag, "log");
        atomic_write_text(log_path, radseq::training_log_csv(log));
    }

    ordered_json j;
    j["command"] = "discover";
    j["train"] = train_path.string();
    j["val"] = val_str.empty() ? ordered_json(nullptr) : ordered_json(val_str);
    j["model"] = model_path.string();
    j["log"] = log_path.empty() ? ordered_json(nullptr) : ordered_json(log_path);
    j["epochs"] = model.trained_epochs;
    if (!log.epochs.empty()) {
        j["final_train_loss"] = log.epochs.back().train_loss;
        j["final_train_acc"] = log.epochs.back().train_accuracy;
        if (!std::isnan(log.epochs.back().val_accuracy)) {
            j["final_val_acc"] = log.epochs.back().val_accuracy;
        }
    }
    j["model_hash"] = file_hash(model_path);
    print_summary(j);
    return 0;
}

int cmd_extract(const RunConfig& cfg, const std::string& model_flag,
                const std::string& archive_flag, const std::string& out_flag) {
    const fs::path model_path = config_path(cfg, model_flag, "model");
    const fs::path archive_path = config_path(cfg, archive_flag, "archive");
    const fs::path out = config_path(cfg, out_flag, "sequences");

    const radseq::SequencerModel model = radseq::load_model(model_path);
    const radseq::PatchArchive archive = radseq::load_archive(archive_path);
    const auto seqs = radseq::extract_sequences(model, archive);
    atomic_write_text(out, sequences_csv(seqs));

    ordered_json j;
    j["command"] = "extract";
    j["model"] = model_path.string();
    j["archive"] = archive_path.string();
    j["sequences"] = out.string();
    j["rows"] = seqs.size();
    j["features"] = seqs[0].features.size();
    j["csv_hash"] = file_hash(out);
    print_summary(j);
    return 0;
}

int cmd_fit_tree(const RunConfig& cfg, const std::string& seq_flag,
                 const std::string& out_flag) {
    const radseq::TreeParams params = tree_params(cfg);
    const fs::path seq_path = config_path(cfg, seq_flag, "sequences");
    const fs::path out = config_path(cfg, out_flag, "tree");

    const auto seqs = sequences_from_csv(seq_path);
    const radseq::DecisionTree tree = radseq::fit_tree(seqs, params);
    radseq::save_tree(tree, out);

    std::size_t leaves = 0;
    for (const auto& n : tree.nodes) {
        leaves += n.is_leaf ? 1 : 0;
    }
    ordered_json j;
    j["command"] = "fit-tree";
    j["sequences"] = seq_path.string();
    j["tree"] = out.string();
    j["nodes"] = tree.nodes.size();
    j["leaves"] = leaves;
    j["tree_hash"] = file_hash(out);
    print_summary(j);
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& model_flag,
             const std::string& tree_flag, const std::string& archive_flag,
             const std::string& out_flag) {
    const fs::path model_path = config_path(cfg, model_flag, "model");
    const fs::path tree_path = config_path(cfg, tree_flag, "tree");
    const fs::path archive_path = config_path(cfg, archive_flag, "archive");
    const fs::path out = config_path(cfg, out_flag, "report");

    const radseq::SequencerModel model = radseq::load_model(model_path);
    const radseq::DecisionTree tree = radseq::load_tree(tree_path);
    const radseq::PatchArchive archive = radseq::load_archive(archive_path);

    const auto seqs = radseq::extract_sequences(model, archive);
    std::vector<radseq::LabeledPrediction> lesion_preds;
    std::vector<radseq::LesionPrediction> for_patients;
    for (const auto& s : seqs) {
        const radseq::TreePrediction p = radseq::predict_tree(tree, s.features);
        lesion_preds.push_back(radseq::LabeledPrediction{
            s.patient_id + "/" + s.lesion_id + "/" + std::to_string(s.annotator_id) + "/" +
                std::to_string(s.rotation_deg),
            p.label, s.label});
        if (s.rotation_deg == 0) {
            for_patients.push_back(
                radseq::LesionPrediction{s.patient_id, s.lesion_id, p.label, s.label});
        }
    }
    const radseq::MetricsReport lesion =
        radseq::compute_metrics(lesion_preds, radseq::EvalLevel::lesion);

    ordered_json report;
    report["lesion"] = ordered_json::parse(radseq::metrics_report_json(lesion));
    if (!for_patients.empty()) {
        const radseq::MetricsReport patient = radseq::compute_metrics(
            radseq::aggregate_patient(for_patients), radseq::EvalLevel::patient);
        report["patient"] = ordered_json::parse(radseq::metrics_report_json(patient));
    } else {
        report["patient"] = nullptr;
    }
    atomic_write_text(out, report.dump(2) + "\n");

    ordered_json j;
    j["command"] = "eval";
    j["model"] = model_path.string();
    j["tree"] = tree_path.string();
    j["archive"] = archive_path.string();
    j["report"] = out.string();
    j["units"] = lesion_preds.size();
    j["report_hash"] = file_hash(out);
    print_summary(j);
    return 0;
}

int cmd_cv(const RunConfig& cfg, const std::string& archive_flag,
           const std::string& out_flag, std::size_t jobs_flag) {
    const radseq::SequencerConfig seq_cfg = sequencer_config(cfg);
    const radseq::TreeParams tparams = tree_params(cfg);
    const radseq::AugmentPolicy policy = augment_policy(cfg);

    const json& s = cfg.section("cv");
    check_keys(s, "cv", {"k", "seed", "jobs"});
    const auto k = get_or<std::size_t>(s, "cv", "k", 10);
    const std::uint64_t seed = require_seed(s, "cv");
    std::size_t jobs = get_or<std::size_t>(s, "cv", "jobs", 1);
    if (jobs_flag > 0) {
        jobs = jobs_flag;
    }

    const fs::path archive_path = config_path(cfg, archive_flag, "archive");
    const fs::path out = config_path(cfg, out_flag, "report");

    const radseq::PatchArchive archive = radseq::load_archive(archive_path);
    const radseq::CvReport report =
        radseq::run_cv(archive, seq_cfg, tparams, policy, k, seed, jobs);

    atomic_write_text(out, radseq::cv_report_json(report));
    fs::path csv = out;
    csv.replace_extension(".csv");
    atomic_write_text(csv, radseq::cv_report_csv(report));

    ordered_json j;
    j["command"] = "cv";
    j["archive"] = archive_path.string();
    j["report"] = out.string();
    j["report_csv"] = csv.string();
    j["k"] = report.k;
    j["config_fingerprint"] = report.config_fingerprint;
    if (report.lesion_summary.accuracy.mean.has_value()) {
        j["mean_lesion_accuracy"] = *report.lesion_summary.accuracy.mean;
    }
    if (report.patient_summary.accuracy.mean.has_value()) {
        j["mean_patient_accuracy"] = *report.patient_summary.accuracy.mean;
    }
    j["report_hash"] = file_hash(out);
    j["report_csv_hash"] = file_hash(csv);
    print_summary(j);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"discovery radiomics pipeline"};
    app.require_subcommand(1);

    std::string config_file;
    app.add_option("--config", config_file, "run configuration JSON file")
        ->expected(1);

    std::string in_path, out_path, train_path, val_path, test_path, model_path,
        tree_path, seq_path, log_path, report_path;
    std::size_t jobs = 0;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cohort archive");
    synth->add_option("--out", out_path, "output archive path");

    CLI::App* split = app.add_subcommand("split", "stratified patient train/val/test split");
    split->add_option("--archive", in_path, "input archive");
    split->add_option("--train-out", train_path, "train archive path");
    split->add_option("--val-out", val_path, "val archive path");
    split->add_option("--test-out", test_path, "test archive path");

    CLI::App* augment = app.add_subcommand("augment", "rotation-enrich an archive");
    augment->add_option("--archive", in_path, "input archive");
    augment->add_option("--out", out_path, "output archive path");

    CLI::App* discover = app.add_subcommand("discover", "train the radiomic sequencer");
    discover->add_option("--train", train_path, "training archive");
    discover->add_option("--val", val_path, "validation archive");
    discover->add_option("--model-out", model_path, "model output path");
    discover->add_option("--log-out", log_path, "training log CSV path");

    CLI::App* extract = app.add_subcommand("extract", "extract radiomic sequences to CSV");
    extract->add_option("--model", model_path, "sequencer model");
    extract->add_option("--archive", in_path, "input archive");
    extract->add_option("--out", seq_path, "output CSV path");

    CLI::App* fit_tree = app.add_subcommand("fit-tree", "fit the decision tree classifier");
    fit_tree->add_option("--sequences", seq_path, "sequences CSV");
    fit_tree->add_option("--out", tree_path, "tree output path");

    CLI::App* eval = app.add_subcommand("eval", "classify an archive and report metrics");
    eval->add_option("--model", model_path, "sequencer model");
    eval->add_option("--tree", tree_path, "decision tree");
    eval->add_option("--archive", in_path, "input archive");
    eval->add_option("--out", report_path, "report JSON path");

    CLI::App* cv = app.add_subcommand("cv", "stratified k-fold cross-validation");
    cv->add_option("--archive", in_path, "unaugmented archive");
    cv->add_option("--out", report_path, "report JSON path");
    cv->add_option("--jobs", jobs, "worker threads across folds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const RunConfig cfg = load_config(config_file);
        if (synth->parsed()) {
            return cmd_synth(cfg, out_path);
        }
        if (split->parsed()) {
            return cmd_split(cfg, in_path, train_path, val_path, test_path);
        }
        if (augment->parsed()) {
            return cmd_augment(cfg, in_path, out_path);
        }
        if (discover->parsed()) {
            return cmd_discover(cfg, train_path, val_path, model_path, log_path);
        }
        if (extract->parsed()) {
            return cmd_extract(cfg, model_path, in_path, seq_path);
        }
        if (fit_tree->parsed()) {
            return cmd_fit_tree(cfg, seq_path, tree_path);
        }
        if (eval->parsed()) {
            return cmd_eval(cfg, model_path, tree_path, in_path, report_path);
        }
        if (cv->parsed()) {
            return cmd_cv(cfg, in_path, report_path, jobs);
        }
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const radseq::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const radseq::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const radseq::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
