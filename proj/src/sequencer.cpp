#include "radseq/sequencer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "binio.hpp"
#include "radseq/util.hpp"

namespace radseq {

namespace {

constexpr char kModelMagic[8] = {'R', 'S', 'E', 'Q', 'M', 'D', 'L', '1'};
constexpr std::uint32_t kModelVersion = 1;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Flatten [n,c,h,w] to [n, c*h*w, 1, 1]; the row-major buffer is reused as is.
Tensor flatten(Tensor t) {
    const std::size_t d = t.c * t.h * t.w;
    t.c = d;
    t.h = 1;
    t.w = 1;
    return t;
}

Tensor reshape_like(Tensor t, const Tensor& shape) {
    t.n = shape.n;
    t.c = shape.c;
    t.h = shape.h;
    t.w = shape.w;
    return t;
}

}  // namespace

std::array<std::size_t, 5> layer_spatial_sizes(const SequencerConfig& config) {
    const std::size_t k = SequencerConfig::kernel_size;
    std::array<std::size_t, 5> sizes{};
    std::size_t s = config.input_size;

    const auto conv = [&](const char* layer) {
        if (s < k) {
            throw ConfigError(std::string(layer) + ": spatial size " + std::to_string(s) +
                              " is smaller than the " + std::to_string(k) + "x" +
                              std::to_string(k) + " kernel");
        }
        s = s - k + 1;
    };
    const auto pool = [&](const char* layer) {
        if (s == 0 || s % 2 != 0) {
            throw ConfigError(std::string(layer) + ": spatial size " + std::to_string(s) +
                              " is not a positive even number");
        }
        s = s / 2;
    };

    conv("conv1");
    sizes[0] = s;
    pool("pool1");
    sizes[1] = s;
    conv("conv2");
    sizes[2] = s;
    pool("pool2");
    sizes[3] = s;
    conv("conv3");
    sizes[4] = s;
    if (s < 1) {
        throw ConfigError("conv3: output spatial size is zero");
    }
    return sizes;
}

std::size_t sequence_length(const SequencerConfig& config) {
    const auto sizes = layer_spatial_sizes(config);
    return config.conv_channels[2] * sizes[4] * sizes[4];
}

SequencerModel init_model(const SequencerConfig& config) {
    layer_spatial_sizes(config);  // geometry must close
    if (config.head_classes < 2) {
        throw ConfigError("head: head_classes must be >= 2");
    }

    const std::size_t k = SequencerConfig::kernel_size;
    SequencerModel m;
    m.config = config;

    std::mt19937_64 rng(config.seed);
    const auto fill_glorot = [&rng](Tensor& t, std::size_t fan_in, std::size_t fan_out) {
        const double b = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-b, b);
        for (double& v : t.data) {
            v = dist(rng);
        }
    };

    const std::size_t c1 = config.conv_channels[0];
    const std::size_t c2 = config.conv_channels[1];
    const std::size_t c3 = config.conv_channels[2];

    // Conv fans are channel counts. With 3x3 kernels this makes the draw
    // near variance-preserving through the channel-expanding stack
    // (Var(z)/Var(x) = k^2 * 2*c_in/(c_in+c_out)), which the k^2-scaled
    // convention is not: it attenuates activations roughly 30x by layer 3
    // and stalls discovery at the class prior for any reachable input scale.
    m.conv1_w = Tensor(c1, 1, k, k);
    fill_glorot(m.conv1_w, 1, c1);
    m.conv1_b.assign(c1, 0.0);

    m.conv2_w = Tensor(c2, c1, k, k);
    fill_glorot(m.conv2_w, c1, c2);
    m.conv2_b.assign(c2, 0.0);

    m.conv3_w = Tensor(c3, c2, k, k);
    fill_glorot(m.conv3_w, c2, c3);
    m.conv3_b.assign(c3, 0.0);

    const std::size_t d_in = sequence_length(config);
    m.head_w = Tensor(config.head_classes, d_in, 1, 1);
    fill_glorot(m.head_w, d_in, config.head_classes);
    m.head_b.assign(config.head_classes, 0.0);

    return m;
}

namespace {

// Activations kept for the backward pass.
struct ForwardCache {
    Tensor z1, a1;
    PoolResult p1;
    Tensor z2, a2;
    PoolResult p2;
    Tensor z3, a3;
    Tensor sequence;  // flattened a3 (or z3 when tapping before the ReLU)
    Tensor logits;
};

ForwardCache forward_cached(const SequencerModel& m, const Tensor& batch) {
    if (batch.c != 1 || batch.h != m.config.input_size || batch.w != m.config.input_size) {
        throw DimensionError("forward: batch shape [" + std::to_string(batch.n) + "," +
                             std::to_string(batch.c) + "," + std::to_string(batch.h) + "," +
                             std::to_string(batch.w) + "] does not match input [n,1," +
                             std::to_string(m.config.input_size) + "," +
                             std::to_string(m.config.input_size) + "]");
    }
    ForwardCache f;
    f.z1 = conv2d_forward(batch, m.conv1_w, m.conv1_b);
    f.a1 = relu_forward(f.z1);
    f.p1 = maxpool2x2_forward(f.a1);
    f.z2 = conv2d_forward(f.p1.output, m.conv2_w, m.conv2_b);
    f.a2 = relu_forward(f.z2);
    f.p2 = maxpool2x2_forward(f.a2);
    f.z3 = conv2d_forward(f.p2.output, m.conv3_w, m.conv3_b);
    f.a3 = relu_forward(f.z3);
    f.sequence = flatten(m.config.sequence_before_relu ? f.z3 : f.a3);
    f.logits = fc_forward(flatten(f.a3), m.head_w, m.head_b);
    return f;
}

struct BatchGrads {
    LayerGrads conv1, conv2, conv3, head;
};

BatchGrads backward_cached(const SequencerModel& m, const Tensor& batch,
                           const ForwardCache& f, const Tensor& grad_logits) {
    BatchGrads g;
    g.head = fc_backward(flatten(f.a3), m.head_w, grad_logits);
    const Tensor ga3 = reshape_like(std::move(g.head.grad_input), f.a3);
    const Tensor gz3 = relu_backward(f.z3, ga3);
    g.conv3 = conv2d_backward(f.p2.output, m.conv3_w, gz3);
    const Tensor ga2 = maxpool2x2_backward(f.p2.indices, g.conv3.grad_input);
    const Tensor gz2 = relu_backward(f.z2, ga2);
    g.conv2 = conv2d_backward(f.p1.output, m.conv2_w, gz2);
    const Tensor ga1 = maxpool2x2_backward(f.p1.indices, g.conv2.grad_input);
    const Tensor gz1 = relu_backward(f.z1, ga1);
    g.conv1 = conv2d_backward(batch, m.conv1_w, gz1);
    return g;
}

std::size_t count_correct(const Tensor& logits, std::span<const int> labels) {
    const std::size_t k = logits.c * logits.h * logits.w;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < logits.n; ++i) {
        const double* z = logits.data.data() + i * k;
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j) {
            if (z[j] > z[best]) {
                best = j;
            }
        }
        if (best == static_cast<std::size_t>(labels[i])) {
            ++correct;
        }
    }
    return correct;
}

double evaluate_accuracy(const SequencerModel& m, const PatchArchive& archive,
                         std::size_t batch_size) {
    if (archive.patches.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::size_t correct = 0;
    for (std::size_t first = 0; first < archive.patches.size(); first += batch_size) {
        const std::size_t count = std::min(batch_size, archive.patches.size() - first);
        const Tensor x = batch_from_patches(archive, first, count);
        std::vector<int> labels(count);
        for (std::size_t i = 0; i < count; ++i) {
            labels[i] = static_cast<int>(archive.patches[first + i].label);
        }
        const ForwardResult r = forward(m, x);
        correct += count_correct(r.logits, labels);
    }
    return static_cast<double>(correct) / static_cast<double>(archive.patches.size());
}

}  // namespace

ForwardResult forward(const SequencerModel& model, const Tensor& batch) {
    ForwardCache f = forward_cached(model, batch);
    return ForwardResult{std::move(f.sequence), std::move(f.logits)};
}

Tensor batch_from_patches(const PatchArchive& archive, std::size_t first,
                          std::size_t count) {
    const std::size_t p = archive.patch_size;
    Tensor x(count, 1, p, p);
    for (std::size_t i = 0; i < count; ++i) {
        const std::vector<double>& px = archive.patches[first + i].pixels;
        std::copy(px.begin(), px.end(), x.data.begin() + i * p * p);
    }
    return x;
}

std::pair<SequencerModel, TrainingLog> discover(const PatchArchive& train,
                                                const PatchArchive& val,
                                                const SequencerConfig& config) {
    if (train.patches.empty()) {
        throw TrainingError("training archive is empty");
    }
    if (!val.patches.empty() && val.patch_size != train.patch_size) {
        throw DimensionError("validation patch_size " + std::to_string(val.patch_size) +
                             " does not match training patch_size " +
                             std::to_string(train.patch_size));
    }
    if (train.patch_size != config.input_size) {
        throw DimensionError("archive patch_size " + std::to_string(train.patch_size) +
                             " does not match config input_size " +
                             std::to_string(config.input_size));
    }
    bool has_benign = false, has_malignant = false;
    for (const LesionPatch& p : train.patches) {
        (p.label == Label::benign ? has_benign : has_malignant) = true;
    }
    if (!has_benign || !has_malignant) {
        throw TrainingError("training set contains a single class");
    }

    SequencerModel model = init_model(config);
    TrainingLog log;
    if (config.hyperparams.epochs == 0) {
        return {std::move(model), std::move(log)};
    }

    SgdHyperparams hp{config.hyperparams.learning_rate, config.hyperparams.momentum,
                      config.hyperparams.weight_decay};
    SgdOptimizer opt(hp, {model.conv1_w.size(), model.conv1_b.size(),
                          model.conv2_w.size(), model.conv2_b.size(),
                          model.conv3_w.size(), model.conv3_b.size(),
                          model.head_w.size(), model.head_b.size()});

    const std::size_t n_train = train.patches.size();
    const std::size_t batch_size = std::max<std::size_t>(1, config.hyperparams.batch_size);
    std::vector<std::size_t> order(n_train);

    for (std::size_t epoch = 0; epoch < config.hyperparams.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();

        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(derive_seed(config.seed, 17, epoch));
        seeded_shuffle(order, rng);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        std::size_t batch_index = 0;
        for (std::size_t first = 0; first < n_train; first += batch_size, ++batch_index) {
            const std::size_t count = std::min(batch_size, n_train - first);
            Tensor x(count, 1, train.patch_size, train.patch_size);
            std::vector<int> labels(count);
            const std::size_t px = static_cast<std::size_t>(train.patch_size) * train.patch_size;
            for (std::size_t i = 0; i < count; ++i) {
                const LesionPatch& p = train.patches[order[first + i]];
                std::copy(p.pixels.begin(), p.pixels.end(), x.data.begin() + i * px);
                labels[i] = static_cast<int>(p.label);
            }

            const ForwardCache f = forward_cached(model, x);
            const SoftmaxLossResult sm = softmax_cross_entropy(f.logits, labels);
            if (!std::isfinite(sm.loss)) {
                throw TrainingError("loss diverged at epoch " + std::to_string(epoch) +
                                    " batch " + std::to_string(batch_index));
            }
            loss_sum += sm.loss * static_cast<double>(count);
            correct += count_correct(f.logits, labels);

            const BatchGrads g = backward_cached(model, x, f, sm.grad_logits);
            opt.step(0, model.conv1_w.data, g.conv1.grad_weights.data);
            opt.step(1, model.conv1_b, g.conv1.grad_bias);
            opt.step(2, model.conv2_w.data, g.conv2.grad_weights.data);
            opt.step(3, model.conv2_b, g.conv2.grad_bias);
            opt.step(4, model.conv3_w.data, g.conv3.grad_weights.data);
            opt.step(5, model.conv3_b, g.conv3.grad_bias);
            opt.step(6, model.head_w.data, g.head.grad_weights.data);
            opt.step(7, model.head_b, g.head.grad_bias);
        }

        model.trained_epochs = static_cast<std::uint32_t>(epoch + 1);

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(n_train);
        stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(n_train);
        stats.val_accuracy = evaluate_accuracy(model, val, batch_size);
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.epochs.push_back(stats);
    }

    return {std::move(model), std::move(log)};
}

std::vector<RadiomicSequence> extract_sequences(const SequencerModel& model,
                                                const PatchArchive& archive) {
    if (archive.patch_size != model.config.input_size) {
        throw DimensionError("archive patch_size " + std::to_string(archive.patch_size) +
                             " does not match model input_size " +
                             std::to_string(model.config.input_size));
    }
    std::vector<RadiomicSequence> out;
    out.reserve(archive.patches.size());
    const std::size_t d = sequence_length(model.config);
    const std::size_t batch_size = 256;

    for (std::size_t first = 0; first < archive.patches.size(); first += batch_size) {
        const std::size_t count = std::min(batch_size, archive.patches.size() - first);
        const Tensor x = batch_from_patches(archive, first, count);
        const ForwardResult r = forward(model, x);
        for (std::size_t i = 0; i < count; ++i) {
            const LesionPatch& p = archive.patches[first + i];
            RadiomicSequence s;
            s.features.assign(r.sequences.data.begin() + static_cast<std::ptrdiff_t>(i * d),
                              r.sequences.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
            s.patient_id = p.patient_id;
            s.lesion_id = p.lesion_id;
            s.rotation_deg = p.rotation_deg;
            s.annotator_id = p.annotator_id;
            s.label = p.label;
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::string training_log_csv(const TrainingLog& log) {
    std::string out = "epoch,train_loss,train_acc,val_acc,seconds\n";
    for (const EpochStats& e : log.epochs) {
        out += std::to_string(e.epoch);
        out += ',';
        out += fmt_double(e.train_loss);
        out += ',';
        out += fmt_double(e.train_accuracy);
        out += ',';
        out += std::isnan(e.val_accuracy) ? "nan" : fmt_double(e.val_accuracy);
        out += ',';
        out += fmt_double(e.seconds);
        out += '\n';
    }
    return out;
}

namespace {

void write_tensor(binio::Writer& wr, const Tensor& t) {
    for (double v : t.data) {
        wr.f64(v);
    }
}

void write_vector(binio::Writer& wr, const std::vector<double>& v) {
    for (double x : v) {
        wr.f64(x);
    }
}

void read_tensor(binio::Reader& rd, Tensor& t) {
    for (double& v : t.data) {
        v = rd.f64();
    }
}

void read_vector(binio::Reader& rd, std::vector<double>& v) {
    for (double& x : v) {
        x = rd.f64();
    }
}

}  // namespace

std::string serialize_model(const SequencerModel& model) {
    binio::Writer wr;
    wr.bytes(kModelMagic, sizeof(kModelMagic));
    wr.u32(kModelVersion);
    wr.u32(static_cast<std::uint32_t>(model.config.input_size));
    for (std::size_t ch : model.config.conv_channels) {
        wr.u32(static_cast<std::uint32_t>(ch));
    }
    wr.u32(static_cast<std::uint32_t>(model.config.head_classes));
    wr.u64(model.config.seed);
    wr.f64(model.config.hyperparams.learning_rate);
    wr.u32(static_cast<std::uint32_t>(model.config.hyperparams.epochs));
    wr.u32(static_cast<std::uint32_t>(model.config.hyperparams.batch_size));
    wr.f64(model.config.hyperparams.momentum);
    wr.f64(model.config.hyperparams.weight_decay);
    wr.u8(model.config.sequence_before_relu ? 1 : 0);
    wr.u32(model.trained_epochs);

    write_tensor(wr, model.conv1_w);
    write_vector(wr, model.conv1_b);
    write_tensor(wr, model.conv2_w);
    write_vector(wr, model.conv2_b);
    write_tensor(wr, model.conv3_w);
    write_vector(wr, model.conv3_b);
    write_tensor(wr, model.head_w);
    write_vector(wr, model.head_b);
    return wr.take();
}

void save_model(const SequencerModel& model, const std::filesystem::path& path) {
    binio::atomic_write(path, serialize_model(model));
}

SequencerModel load_model(const std::filesystem::path& path) {
    const std::string blob = binio::read_file(path);
    binio::Reader rd(blob, "model " + path.string());

    if (blob.size() < sizeof(kModelMagic) ||
        std::memcmp(blob.data(), kModelMagic, sizeof(kModelMagic)) != 0) {
        rd.fail_at("bad magic", 0);
    }
    rd.str(sizeof(kModelMagic));
    const std::uint64_t version_at = rd.offset();
    const std::uint32_t version = rd.u32();
    if (version != kModelVersion) {
        rd.fail_at("unsupported version " + std::to_string(version), version_at);
    }

    SequencerConfig config;
    config.input_size = rd.u32();
    for (std::size_t& ch : config.conv_channels) {
        ch = rd.u32();
    }
    config.head_classes = rd.u32();
    config.seed = rd.u64();
    config.hyperparams.learning_rate = rd.f64();
    config.hyperparams.epochs = rd.u32();
    config.hyperparams.batch_size = rd.u32();
    config.hyperparams.momentum = rd.f64();
    config.hyperparams.weight_decay = rd.f64();
    config.sequence_before_relu = rd.u8() != 0;
    const std::uint32_t trained_epochs = rd.u32();

    SequencerModel model;
    try {
        model = init_model(config);
    } catch (const ConfigError& e) {
        rd.fail(std::string("invalid config block: ") + e.what());
    }
    model.trained_epochs = trained_epochs;

    read_tensor(rd, model.conv1_w);
    read_vector(rd, model.conv1_b);
    read_tensor(rd, model.conv2_w);
    read_vector(rd, model.conv2_b);
    read_tensor(rd, model.conv3_w);
    read_vector(rd, model.conv3_b);
    read_tensor(rd, model.head_w);
    read_vector(rd, model.head_b);
    rd.require_end();
    return model;
}

}  // namespace radseq
