#pragma once

#include <optional>
#include <string>
#include <vector>

#include "radseq/augment.hpp"
#include "radseq/classifier.hpp"
#include "radseq/dataset.hpp"
#include "radseq/sequencer.hpp"

namespace radseq {

/// Malignant is the positive class throughout.
struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t total() const { return tp + fp + tn + fn; }
};

enum class EvalLevel { lesion, patient };

/// Ratios with a zero denominator are reported as absent, not as 0.
struct MetricsReport {
    EvalLevel level = EvalLevel::lesion;
    ConfusionCounts counts;
    std::optional<double> sensitivity;  // tp / (tp + fn)
    std::optional<double> specificity;  // tn / (tn + fp)
    std::optional<double> accuracy;     // (tp + tn) / total
};

struct LabeledPrediction {
    std::string unit_id;
    Label predicted = Label::benign;
    Label truth = Label::benign;
};

struct LesionPrediction {
    std::string patient_id;
    std::string lesion_id;
    Label predicted = Label::benign;
    Label truth = Label::benign;
};

MetricsReport compute_metrics(const std::vector<LabeledPrediction>& predictions,
                              EvalLevel level);

/// Patient prediction = majority vote over the patient's lesion predictions,
/// ties predicting malignant. Patient truth = malignant if any lesion truth is
/// malignant. Output is ordered by patient_id.
std::vector<LabeledPrediction> aggregate_patient(
    const std::vector<LesionPrediction>& lesion_predictions);

struct FoldReport {
    std::size_t fold = 0;
    MetricsReport lesion;
    MetricsReport patient;
    std::string model_hash;  // fnv1a64 of the fold's serialized sequencer
};

struct MetricSummary {
    std::optional<double> mean;
    std::optional<double> stddev;  // sample standard deviation
};

struct CvLevelSummary {
    MetricSummary sensitivity, specificity, accuracy;
};

struct CvReport {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::string config_fingerprint;
    std::vector<FoldReport> folds;
    CvLevelSummary lesion_summary;
    CvLevelSummary patient_summary;
};

/// How one fold's data is laid out: the held-out fold is the test set, the
/// remaining patients split 8:1 into train and validation.
struct FoldPlan {
    std::size_t fold = 0;
    std::vector<std::string> train_patients;
    std::vector<std::string> val_patients;
    std::vector<std::string> test_patients;
};

/// The exact fold layout run_cv uses, exposed for leakage auditing.
std::vector<FoldPlan> plan_cv_folds(const PatchArchive& archive, std::size_t k,
                                    std::uint64_t seed);

/// Stratified k-fold cross-validation of the whole pipeline on an unaugmented
/// archive. Per fold: augment the training patients' patches, discover a
/// sequencer, fit a tree on the training sequences, and evaluate the held-out
/// fold at lesion and patient level. Deterministic in (data, configs, seed);
/// `jobs` only spreads folds across threads.
CvReport run_cv(const PatchArchive& archive, const SequencerConfig& seq_config,
                const TreeParams& tree_params, const AugmentPolicy& policy,
                std::size_t k, std::uint64_t seed, std::size_t jobs = 1);

/// Canonical parameter fingerprint (hash of all seeds and params).
std::string cv_config_fingerprint(const SequencerConfig& seq_config,
                                  const TreeParams& tree_params,
                                  const AugmentPolicy& policy, std::size_t k,
                                  std::uint64_t seed);

/// JSON with fixed key order.
std::string cv_report_json(const CvReport& report);
/// Flat CSV: fold,level,sensitivity,specificity,accuracy.
std::string cv_report_csv(const CvReport& report);
/// JSON object for a single MetricsReport (used by the eval command too).
std::string metrics_report_json(const MetricsReport& report);

}  // namespace radseq
