#include "radseq/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <thread>

#include "json.hpp"

#include "radseq/util.hpp"

namespace radseq {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

MetricsReport compute_metrics(const std::vector<LabeledPrediction>& predictions,
                              EvalLevel level) {
    if (predictions.empty()) {
        throw ArgumentError("compute_metrics: no predictions");
    }
    MetricsReport r;
    r.level = level;
    for (const LabeledPrediction& p : predictions) {
        if (p.truth == Label::malignant) {
            (p.predicted == Label::malignant ? r.counts.tp : r.counts.fn) += 1;
        } else {
            (p.predicted == Label::benign ? r.counts.tn : r.counts.fp) += 1;
        }
    }
    const auto ratio = [](std::size_t num, std::size_t denom) -> std::optional<double> {
        if (denom == 0) {
            return std::nullopt;
        }
        return static_cast<double>(num) / static_cast<double>(denom);
    };
    r.sensitivity = ratio(r.counts.tp, r.counts.tp + r.counts.fn);
    r.specificity = ratio(r.counts.tn, r.counts.tn + r.counts.fp);
    r.accuracy = ratio(r.counts.tp + r.counts.tn, r.counts.total());
    return r;
}

std::vector<LabeledPrediction> aggregate_patient(
    const std::vector<LesionPrediction>& lesion_predictions) {
    struct Tally {
        std::size_t predicted_malignant = 0;
        std::size_t n = 0;
        bool truth_malignant = false;
    };
    std::map<std::string, Tally> per_patient;
    for (const LesionPrediction& p : lesion_predictions) {
        Tally& t = per_patient[p.patient_id];
        t.n += 1;
        if (p.predicted == Label::malignant) {
            t.predicted_malignant += 1;
        }
        if (p.truth == Label::malignant) {
            t.truth_malignant = true;
        }
    }

    std::vector<LabeledPrediction> out;
    out.reserve(per_patient.size());
    for (const auto& [pid, t] : per_patient) {
        LabeledPrediction p;
        p.unit_id = pid;
        // majority vote; ties go malignant
        p.predicted = 2 * t.predicted_malignant >= t.n ? Label::malignant : Label::benign;
        p.truth = t.truth_malignant ? Label::malignant : Label::benign;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<FoldPlan> plan_cv_folds(const PatchArchive& archive, std::size_t k,
                                    std::uint64_t seed) {
    const SplitSpec folds = kfold_patient_partition(archive, k, seed);
    std::vector<FoldPlan> plans;
    plans.reserve(k);
    for (std::size_t f = 0; f < k; ++f) {
        FoldPlan plan;
        plan.fold = f;

        PatchArchive rest;
        rest.patch_size = archive.patch_size;
        for (const LesionPatch& p : archive.patches) {
            if (folds.assignment.at(p.patient_id) == static_cast<int>(f)) {
                if (std::find(plan.test_patients.begin(), plan.test_patients.end(),
                              p.patient_id) == plan.test_patients.end()) {
                    plan.test_patients.push_back(p.patient_id);
                }
            } else {
                rest.patches.push_back(p);
            }
        }

        // 8:1 train:val over the remainder, i.e. 80%/10% of the whole archive.
        // Cohorts too small to stratify put everything in train.
        try {
            const SplitSpec inner = stratified_patient_split(
                rest, SplitFractions{8.0 / 9.0, 1.0 / 9.0, 0.0}, derive_seed(seed, 23, f));
            for (const auto& [pid, part] : inner.assignment) {
                (part == 0 ? plan.train_patients : plan.val_patients).push_back(pid);
            }
        } catch (const SplitError&) {
            for (const std::string& pid : patient_ids(rest)) {
                plan.train_patients.push_back(pid);
            }
        }
        plans.push_back(std::move(plan));
    }
    return plans;
}

namespace {

PatchArchive subset_by_patients(const PatchArchive& archive,
                                const std::vector<std::string>& patients) {
    PatchArchive out;
    out.patch_size = archive.patch_size;
    out.provenance = archive.provenance;
    for (const LesionPatch& p : archive.patches) {
        if (std::find(patients.begin(), patients.end(), p.patient_id) != patients.end()) {
            out.patches.push_back(p);
        }
    }
    return out;
}

FoldReport evaluate_fold(const PatchArchive& archive, const FoldPlan& plan,
                         const SequencerConfig& seq_config, const TreeParams& tree_params,
                         const AugmentPolicy& policy, std::uint64_t seed) {
    const PatchArchive train = subset_by_patients(archive, plan.train_patients);
    const PatchArchive val = subset_by_patients(archive, plan.val_patients);
    const PatchArchive test = subset_by_patients(archive, plan.test_patients);

    const PatchArchive train_aug = augment_archive(train, policy);

    SequencerConfig fold_config = seq_config;
    fold_config.seed = derive_seed(seq_config.seed ^ seed, 29, plan.fold);
    auto [model, log] = discover(train_aug, val, fold_config);

    const std::vector<RadiomicSequence> train_seqs = extract_sequences(model, train_aug);
    const DecisionTree tree = fit_tree(train_seqs, tree_params);

    const std::vector<RadiomicSequence> test_seqs = extract_sequences(model, test);
    std::vector<LabeledPrediction> lesion_preds;
    std::vector<LesionPrediction> for_patients;
    lesion_preds.reserve(test_seqs.size());
    for (const RadiomicSequence& s : test_seqs) {
        const TreePrediction p = predict_tree(tree, s.features);
        LabeledPrediction lp;
        lp.unit_id = s.patient_id + "/" + s.lesion_id + "/" +
                     std::to_string(s.annotator_id) + "/" + std::to_string(s.rotation_deg);
        lp.predicted = p.label;
        lp.truth = s.label;
        lesion_preds.push_back(lp);
        if (s.rotation_deg == 0) {
            for_patients.push_back(LesionPrediction{s.patient_id, s.lesion_id, p.label, s.label});
        }
    }

    FoldReport report;
    report.fold = plan.fold;
    report.lesion = compute_metrics(lesion_preds, EvalLevel::lesion);
    report.patient = compute_metrics(aggregate_patient(for_patients), EvalLevel::patient);
    report.model_hash = to_hex(fnv1a64(serialize_model(model)));
    return report;
}

MetricSummary summarize(const std::vector<std::optional<double>>& values) {
    std::vector<double> present;
    for (const auto& v : values) {
        if (v.has_value()) {
            present.push_back(*v);
        }
    }
    MetricSummary s;
    if (present.empty()) {
        return s;
    }
    double sum = 0.0;
    for (double v : present) {
        sum += v;
    }
    const double mean = sum / static_cast<double>(present.size());
    s.mean = mean;
    if (present.size() >= 2) {
        double ss = 0.0;
        for (double v : present) {
            ss += (v - mean) * (v - mean);
        }
        s.stddev = std::sqrt(ss / static_cast<double>(present.size() - 1));
    }
    return s;
}

CvLevelSummary summarize_level(const std::vector<FoldReport>& folds, bool patient_level) {
    std::vector<std::optional<double>> sens, spec, acc;
    for (const FoldReport& f : folds) {
        const MetricsReport& r = patient_level ? f.patient : f.lesion;
        sens.push_back(r.sensitivity);
        spec.push_back(r.specificity);
        acc.push_back(r.accuracy);
    }
    return CvLevelSummary{summarize(sens), summarize(spec), summarize(acc)};
}

}  // namespace

std::string cv_config_fingerprint(const SequencerConfig& c, const TreeParams& t,
                                  const AugmentPolicy& a, std::size_t k,
                                  std::uint64_t seed) {
    std::string s = "k=" + std::to_string(k) + ";seed=" + std::to_string(seed) +
                    ";seq.input=" + std::to_string(c.input_size) +
                    ";seq.channels=" + std::to_string(c.conv_channels[0]) + "," +
                    std::to_string(c.conv_channels[1]) + "," +
                    std::to_string(c.conv_channels[2]) +
                    ";seq.classes=" + std::to_string(c.head_classes) +
                    ";seq.seed=" + std::to_string(c.seed) +
                    ";seq.lr=" + fmt_double(c.hyperparams.learning_rate) +
                    ";seq.epochs=" + std::to_string(c.hyperparams.epochs) +
                    ";seq.batch=" + std::to_string(c.hyperparams.batch_size) +
                    ";seq.momentum=" + fmt_double(c.hyperparams.momentum) +
                    ";seq.wd=" + fmt_double(c.hyperparams.weight_decay) +
                    ";seq.prerelu=" + (c.sequence_before_relu ? "1" : "0") +
                    ";tree.depth=" + std::to_string(t.max_depth) +
                    ";tree.minleaf=" + std::to_string(t.min_samples_leaf) +
                    ";tree.mid=" + fmt_double(t.min_impurity_decrease) +
                    ";aug.mal=" + std::to_string(a.malignant_step_deg) +
                    ";aug.ben=" + std::to_string(a.benign_step_deg) +
                    ";aug.fill=" + fmt_double(a.fill_value);
    return to_hex(fnv1a64(s));
}

CvReport run_cv(const PatchArchive& archive, const SequencerConfig& seq_config,
                const TreeParams& tree_params, const AugmentPolicy& policy,
                std::size_t k, std::uint64_t seed, std::size_t jobs) {
    if (k < 2) {
        throw ArgumentError("run_cv: k must be >= 2");
    }
    for (const LesionPatch& p : archive.patches) {
        if (p.rotation_deg != 0) {
            throw ArgumentError("run_cv: archive must be unaugmented, patch (" +
                                p.patient_id + "," + p.lesion_id + ") has rotation_deg=" +
                                std::to_string(p.rotation_deg));
        }
    }

    const std::vector<FoldPlan> plans = plan_cv_folds(archive, k, seed);

    CvReport report;
    report.k = k;
    report.seed = seed;
    report.config_fingerprint =
        cv_config_fingerprint(seq_config, tree_params, policy, k, seed);
    report.folds.resize(k);

    std::vector<std::exception_ptr> errors(k);
    std::atomic<std::size_t> next{0};
    const std::size_t n_workers = std::max<std::size_t>(1, std::min(jobs, k));

    const auto worker = [&]() {
        for (;;) {
            const std::size_t f = next.fetch_add(1);
            if (f >= k) {
                return;
            }
            try {
                report.folds[f] =
                    evaluate_fold(archive, plans[f], seq_config, tree_params, policy, seed);
            } catch (...) {
                errors[f] = std::current_exception();
            }
        }
    };

    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_workers);
        for (std::size_t i = 0; i < n_workers; ++i) {
            threads.emplace_back(worker);
        }
        for (std::thread& t : threads) {
            t.join();
        }
    }
    for (const std::exception_ptr& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    report.lesion_summary = summarize_level(report.folds, false);
    report.patient_summary = summarize_level(report.folds, true);
    return report;
}

namespace {

ordered_json metrics_to_json(const MetricsReport& r) {
    ordered_json j;
    j["level"] = r.level == EvalLevel::lesion ? "lesion" : "patient";
    j["tp"] = r.counts.tp;
    j["fp"] = r.counts.fp;
    j["tn"] = r.counts.tn;
    j["fn"] = r.counts.fn;
    j["sensitivity"] = r.sensitivity.has_value() ? ordered_json(*r.sensitivity) : ordered_json(nullptr);
    j["specificity"] = r.specificity.has_value() ? ordered_json(*r.specificity) : ordered_json(nullptr);
    j["accuracy"] = r.accuracy.has_value() ? ordered_json(*r.accuracy) : ordered_json(nullptr);
    return j;
}

ordered_json summary_to_json(const CvLevelSummary& s) {
    const auto metric = [](const MetricSummary& m) {
        ordered_json j;
        j["mean"] = m.mean.has_value() ? ordered_json(*m.mean) : ordered_json(nullptr);
        j["stddev"] = m.stddev.has_value() ? ordered_json(*m.stddev) : ordered_json(nullptr);
        return j;
    };
    ordered_json j;
    j["sensitivity"] = metric(s.sensitivity);
    j["specificity"] = metric(s.specificity);
    j["accuracy"] = metric(s.accuracy);
    return j;
}

}  // namespace

std::string metrics_report_json(const MetricsReport& report) {
    return metrics_to_json(report).dump();
}

std::string cv_report_json(const CvReport& report) {
    ordered_json j;
    j["k"] = report.k;
    j["seed"] = report.seed;
    j["config_fingerprint"] = report.config_fingerprint;
    j["folds"] = ordered_json::array();
    for (const FoldReport& f : report.folds) {
        ordered_json fj;
        fj["fold"] = f.fold;
        fj["model_hash"] = f.model_hash;
        fj["lesion"] = metrics_to_json(f.lesion);
        fj["patient"] = metrics_to_json(f.patient);
        j["folds"].push_back(std::move(fj));
    }
    j["summary"]["lesion"] = summary_to_json(report.lesion_summary);
    j["summary"]["patient"] = summary_to_json(report.patient_summary);
    return j.dump(2) + "\n";
}

std::string cv_report_csv(const CvReport& report) {
    std::string out = "fold,level,sensitivity,specificity,accuracy\n";
    const auto cell = [](const std::optional<double>& v) {
        return v.has_value() ? fmt_double(*v) : std::string();
    };
    for (const FoldReport& f : report.folds) {
        out += std::to_string(f.fold) + ",lesion," + cell(f.lesion.sensitivity) + "," +
               cell(f.lesion.specificity) + "," + cell(f.lesion.accuracy) + "\n";
        out += std::to_string(f.fold) + ",patient," + cell(f.patient.sensitivity) + "," +
               cell(f.patient.specificity) + "," + cell(f.patient.accuracy) + "\n";
    }
    return out;
}

}  // namespace radseq
