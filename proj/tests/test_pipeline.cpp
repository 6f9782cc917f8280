// Slow end-to-end learning checks on the calibration cohort: the full
// pipeline must clearly beat a linear model on raw pixels, which caps how
// much of the class signal is trivially separable.

#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "radseq/augment.hpp"
#include "radseq/classifier.hpp"
#include "radseq/dataset.hpp"
#include "radseq/eval.hpp"
#include "radseq/sequencer.hpp"

using namespace radseq;

namespace {

// Logistic regression on raw pixels, the independent linear baseline.
struct LogisticModel {
    std::vector<double> w;
    double b = 0.0;
};

LogisticModel train_logistic(const PatchArchive& train, std::size_t epochs, double lr,
                             double l2, std::uint64_t seed) {
    const std::size_t d = static_cast<std::size_t>(train.patch_size) * train.patch_size;
    LogisticModel m;
    m.w.assign(d, 0.0);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(train.patches.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng() % i]);
        }
        for (std::size_t i : order) {
            const LesionPatch& p = train.patches[i];
            double z = m.b;
            for (std::size_t k = 0; k < d; ++k) {
                z += m.w[k] * p.pixels[k];
            }
            const double pred = 1.0 / (1.0 + std::exp(-z));
            const double err = pred - (p.label == Label::malignant ? 1.0 : 0.0);
            for (std::size_t k = 0; k < d; ++k) {
                m.w[k] -= lr * (err * p.pixels[k] + l2 * m.w[k]);
            }
            m.b -= lr * err;
        }
    }
    return m;
}

double logistic_accuracy(const LogisticModel& m, const PatchArchive& test) {
    const std::size_t d = static_cast<std::size_t>(test.patch_size) * test.patch_size;
    std::size_t correct = 0;
    for (const LesionPatch& p : test.patches) {
        double z = m.b;
        for (std::size_t k = 0; k < d; ++k) {
            z += m.w[k] * p.pixels[k];
        }
        const Label pred = z > 0.0 ? Label::malignant : Label::benign;
        correct += pred == p.label ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(test.patches.size());
}

}  // namespace

TEST_CASE("full pipeline beats the raw-pixel logistic baseline on a held-out split") {
    const PatchArchive cohort = synthesize_cohort(1, 28, 69, 5, 18);
    const SplitSpec split = stratified_patient_split(cohort, {0.8, 0.1, 0.1}, 2024);
    const PatchArchive train = select_partition(cohort, split, 0);
    const PatchArchive val = select_partition(cohort, split, 1);
    const PatchArchive test = select_partition(cohort, split, 2);

    const PatchArchive train_aug = augment_archive(train, AugmentPolicy{});

    // linear baseline on the same augmented training data
    const LogisticModel logistic = train_logistic(train_aug, 30, 0.05, 1e-4, 7);
    const double logistic_acc = logistic_accuracy(logistic, test);
    MESSAGE("logistic test accuracy: ", logistic_acc);
    CHECK(logistic_acc < 0.80);

    SequencerConfig config;  // stock defaults: 60 epochs, lr 0.001, batch 100
    config.seed = 1;
    const auto [model, log] = discover(train_aug, val, config);
    REQUIRE(log.epochs.size() == config.hyperparams.epochs);
    MESSAGE("final val accuracy: ", log.epochs.back().val_accuracy);
    CHECK(log.epochs.back().val_accuracy >= 0.90);

    const DecisionTree tree = fit_tree(extract_sequences(model, train_aug), TreeParams{});
    std::size_t correct = 0;
    for (const RadiomicSequence& s : extract_sequences(model, test)) {
        correct += predict_tree(tree, s.features).label == s.label ? 1 : 0;
    }
    const double pipeline_acc =
        static_cast<double>(correct) / static_cast<double>(test.patches.size());
    MESSAGE("pipeline test accuracy: ", pipeline_acc);
    CHECK(pipeline_acc > 0.90);
    CHECK(pipeline_acc > logistic_acc);
}
