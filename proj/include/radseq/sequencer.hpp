#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "radseq/dataset.hpp"
#include "radseq/tensor.hpp"

namespace radseq {

struct SequencerHyperparams {
    double learning_rate = 0.001;
    std::size_t epochs = 60;
    std::size_t batch_size = 100;
    double momentum = 0.9;
    double weight_decay = 0.0005;
};

/// Architecture and discovery settings. With the defaults, three 3x3 valid
/// convolutions interleaved with two 2x2 pools take an 18x18 patch through
/// spatial sizes 16 -> 8 -> 6 -> 3 -> 1, so the third layer's 500 maps flatten
/// directly into the 500-feature radiomic sequence.
struct SequencerConfig {
    std::size_t input_size = 18;
    std::array<std::size_t, 3> conv_channels{20, 50, 500};
    static constexpr std::size_t kernel_size = 3;
    std::size_t head_classes = 2;
    std::uint64_t seed = 0;
    SequencerHyperparams hyperparams;
    // Tap point for extracted sequences; the discovery head always consumes
    // the post-ReLU activation either way.
    bool sequence_before_relu = false;
};

/// Spatial sizes after each layer: conv1, pool1, conv2, pool2, conv3.
/// Throws ConfigError naming the first layer whose geometry does not close.
std::array<std::size_t, 5> layer_spatial_sizes(const SequencerConfig& config);

/// Length of the extracted sequence (conv_channels[2] with the defaults).
std::size_t sequence_length(const SequencerConfig& config);

/// The sequencer's weights plus the discovery-time classification head.
struct SequencerModel {
    SequencerConfig config;
    std::uint32_t trained_epochs = 0;
    Tensor conv1_w;
    std::vector<double> conv1_b;
    Tensor conv2_w;
    std::vector<double> conv2_b;
    Tensor conv3_w;
    std::vector<double> conv3_b;
    Tensor head_w;
    std::vector<double> head_b;

    bool operator==(const SequencerModel&) const = default;
};

inline bool operator==(const SequencerConfig& a, const SequencerConfig& b) {
    return a.input_size == b.input_size && a.conv_channels == b.conv_channels &&
           a.head_classes == b.head_classes && a.seed == b.seed &&
           a.hyperparams.learning_rate == b.hyperparams.learning_rate &&
           a.hyperparams.epochs == b.hyperparams.epochs &&
           a.hyperparams.batch_size == b.hyperparams.batch_size &&
           a.hyperparams.momentum == b.hyperparams.momentum &&
           a.hyperparams.weight_decay == b.hyperparams.weight_decay &&
           a.sequence_before_relu == b.sequence_before_relu;
}

/// The 500-feature vector emitted per patch, with its lineage.
struct RadiomicSequence {
    std::vector<double> features;
    std::string patient_id;
    std::string lesion_id;
    std::uint16_t rotation_deg = 0;
    std::uint8_t annotator_id = 0;
    Label label = Label::benign;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;  // NaN when the validation set is empty
    double seconds = 0.0;
};

struct TrainingLog {
    std::vector<EpochStats> epochs;
};

/// CSV with header `epoch,train_loss,train_acc,val_acc,seconds`.
std::string training_log_csv(const TrainingLog& log);

/// Glorot-uniform weights ([-b,b] with b = sqrt(6/(fan_in+fan_out))), zero
/// biases; deterministic in config.seed.
SequencerModel init_model(const SequencerConfig& config);

struct ForwardResult {
    Tensor sequences;  // [n, sequence_length, 1, 1]
    Tensor logits;     // [n, head_classes, 1, 1]
};

/// conv1 -> ReLU -> pool -> conv2 -> ReLU -> pool -> conv3 -> ReLU, flattened
/// into the radiomic sequence, then the fully-connected head.
ForwardResult forward(const SequencerModel& model, const Tensor& batch);

/// Supervised sequencer discovery: config.epochs epochs of mini-batch SGD with
/// softmax cross-entropy, per-epoch shuffling seeded from (config.seed, epoch),
/// final-epoch weights returned. Fully deterministic in (data, config).
std::pair<SequencerModel, TrainingLog> discover(const PatchArchive& train,
                                                const PatchArchive& val,
                                                const SequencerConfig& config);

std::vector<RadiomicSequence> extract_sequences(const SequencerModel& model,
                                                const PatchArchive& archive);

/// Model file: magic "RSEQMDL1", u32 version, config block, then parameter
/// tensors in fixed order, little-endian float64.
std::string serialize_model(const SequencerModel& model);
void save_model(const SequencerModel& model, const std::filesystem::path& path);
SequencerModel load_model(const std::filesystem::path& path);

/// Batch tensor [count, 1, P, P] for patches[first .. first+count).
Tensor batch_from_patches(const PatchArchive& archive, std::size_t first,
                          std::size_t count);

}  // namespace radseq
