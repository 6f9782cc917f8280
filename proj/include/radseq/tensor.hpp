#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "radseq/errors.hpp"

namespace radseq {

/// Dense rank-4 array (batch, channel, row, col), row-major float64.
struct Tensor {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_)
        : n(n_), c(c_), h(h_), w(w_), data(n_ * c_ * h_ * w_, 0.0) {}
    Tensor(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_,
           std::vector<double> values);

    std::size_t size() const { return n * c * h * w; }

    double& at(std::size_t i, std::size_t j, std::size_t y, std::size_t x) {
        return data[((i * c + j) * h + y) * w + x];
    }
    const double& at(std::size_t i, std::size_t j, std::size_t y, std::size_t x) const {
        return data[((i * c + j) * h + y) * w + x];
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    bool operator==(const Tensor&) const = default;
};

/// Gradients of one layer: with respect to its input, weights, and bias.
struct LayerGrads {
    Tensor grad_input;
    Tensor grad_weights;
    std::vector<double> grad_bias;
};

/// Winning input position per pooled output element, plus the input geometry
/// needed to route gradients back through the pooling layer.
struct PoolIndexMap {
    std::size_t in_n = 0, in_c = 0, in_h = 0, in_w = 0;
    std::vector<std::size_t> argmax;  // flat index into the pooled input, one per output element
};

struct PoolResult {
    Tensor output;
    PoolIndexMap indices;
};

struct SoftmaxLossResult {
    double loss = 0.0;    // mean over batch items
    Tensor grad_logits;   // same shape as the logits
};

/// Valid (no padding), stride-1 cross-correlation.
/// input [n, c_in, h, w], weights [c_out, c_in, kh, kw], bias [c_out]
/// -> output [n, c_out, h-kh+1, w-kw+1].
Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      std::span<const double> bias);

/// Gradients of conv2d_forward for a given upstream grad_output.
LayerGrads conv2d_backward(const Tensor& input, const Tensor& weights,
                           const Tensor& grad_output);

/// Non-overlapping 2x2 max pooling, stride 2. Requires even h and w.
/// Ties go to the first element in row-major scan order within the window.
PoolResult maxpool2x2_forward(const Tensor& input);

/// Routes each grad_output element to its recorded argmax position.
Tensor maxpool2x2_backward(const PoolIndexMap& indices, const Tensor& grad_output);

Tensor relu_forward(const Tensor& input);

/// Gradient passes where input > 0; the subgradient at exactly 0 is 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

/// Affine map out = flatten(input) * weights^T + bias.
/// input is flattened to [n, c*h*w]; weights [d_out, d_in, 1, 1], bias [d_out]
/// -> output [n, d_out, 1, 1].
Tensor fc_forward(const Tensor& input, const Tensor& weights,
                  std::span<const double> bias);

LayerGrads fc_backward(const Tensor& input, const Tensor& weights,
                       const Tensor& grad_output);

/// Mean softmax cross-entropy over the batch, computed with max-subtraction.
/// logits [n, k, 1, 1] (k = c*h*w), labels are class indices in [0, k).
SoftmaxLossResult softmax_cross_entropy(const Tensor& logits,
                                        std::span<const int> labels);

struct SgdHyperparams {
    double learning_rate = 0.001;
    double momentum = 0.9;
    double weight_decay = 0.0005;
};

/// Momentum SGD with L2 weight decay, one zero-initialized velocity buffer
/// per registered parameter. The update is
///   g <- grad + weight_decay * param
///   v <- momentum * v - learning_rate * g
///   param <- param + v
/// Weight decay applies to every parameter, biases included.
class SgdOptimizer {
public:
    SgdOptimizer(SgdHyperparams hp, std::vector<std::size_t> param_sizes);

    void step(std::size_t slot, std::span<double> param, std::span<const double> grad);

    const SgdHyperparams& hyperparams() const { return hp_; }
    std::span<const double> velocity(std::size_t slot) const { return velocity_[slot]; }

private:
    SgdHyperparams hp_;
    std::vector<std::vector<double>> velocity_;
};

}  // namespace radseq
