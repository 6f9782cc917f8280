#include "radseq/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace radseq {

namespace {

std::string shape_str(const Tensor& t) {
    return "[" + std::to_string(t.n) + "," + std::to_string(t.c) + "," +
           std::to_string(t.h) + "," + std::to_string(t.w) + "]";
}

}  // namespace

Tensor::Tensor(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_,
               std::vector<double> values)
    : n(n_), c(c_), h(h_), w(w_), data(std::move(values)) {
    if (data.size() != n * c * h * w) {
        throw DimensionError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(*this));
    }
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      std::span<const double> bias) {
    if (input.c != weights.c) {
        throw DimensionError("conv2d: input channel axis c=" + std::to_string(input.c) +
                             " does not match weights c_in=" + std::to_string(weights.c));
    }
    if (input.h < weights.h) {
        throw DimensionError("conv2d: input axis h=" + std::to_string(input.h) +
                             " smaller than kernel h=" + std::to_string(weights.h));
    }
    if (input.w < weights.w) {
        throw DimensionError("conv2d: input axis w=" + std::to_string(input.w) +
                             " smaller than kernel w=" + std::to_string(weights.w));
    }
    if (bias.size() != weights.n) {
        throw DimensionError("conv2d: bias length " + std::to_string(bias.size()) +
                             " does not match output channel axis c_out=" +
                             std::to_string(weights.n));
    }

    const std::size_t kh = weights.h, kw = weights.w;
    const std::size_t ho = input.h - kh + 1, wo = input.w - kw + 1;
    Tensor out(input.n, weights.n, ho, wo);

    // Kernel footprint == input plane: each output is one contiguous dot
    // product (the flattened (ci,ky,kx) order matches the nested loops).
    if (ho == 1 && wo == 1) {
        const std::size_t d = input.c * input.h * input.w;
        for (std::size_t i = 0; i < input.n; ++i) {
            const double* ip = input.data.data() + i * d;
            for (std::size_t co = 0; co < weights.n; ++co) {
                const double* wp = weights.data.data() + co * d;
                double acc = bias[co];
                for (std::size_t k = 0; k < d; ++k) {
                    acc += ip[k] * wp[k];
                }
                out.data[i * weights.n + co] = acc;
            }
        }
        return out;
    }

    for (std::size_t i = 0; i < input.n; ++i) {
        for (std::size_t co = 0; co < weights.n; ++co) {
            double* op = &out.at(i, co, 0, 0);
            std::fill(op, op + ho * wo, bias[co]);
            for (std::size_t ci = 0; ci < input.c; ++ci) {
                const double* ip = &input.at(i, ci, 0, 0);
                const double* wp = &weights.at(co, ci, 0, 0);
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const double wv = wp[ky * kw + kx];
                        for (std::size_t y = 0; y < ho; ++y) {
                            const double* irow = ip + (y + ky) * input.w + kx;
                            double* orow = op + y * wo;
                            for (std::size_t x = 0; x < wo; ++x) {
                                orow[x] += wv * irow[x];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

LayerGrads conv2d_backward(const Tensor& input, const Tensor& weights,
                           const Tensor& grad_output) {
    if (input.c != weights.c) {
        throw DimensionError("conv2d backward: input channel axis c=" +
                             std::to_string(input.c) + " does not match weights c_in=" +
                             std::to_string(weights.c));
    }
    const std::size_t kh = weights.h, kw = weights.w;
    const std::size_t ho = input.h - kh + 1, wo = input.w - kw + 1;
    if (grad_output.n != input.n || grad_output.c != weights.n ||
        grad_output.h != ho || grad_output.w != wo) {
        throw DimensionError("conv2d backward: grad_output shape " + shape_str(grad_output) +
                             " does not match forward output [" + std::to_string(input.n) +
                             "," + std::to_string(weights.n) + "," + std::to_string(ho) +
                             "," + std::to_string(wo) + "]");
    }

    LayerGrads g;
    g.grad_input = Tensor(input.n, input.c, input.h, input.w);
    g.grad_weights = Tensor(weights.n, weights.c, weights.h, weights.w);
    g.grad_bias.assign(weights.n, 0.0);

    if (ho == 1 && wo == 1) {
        const std::size_t d = input.c * input.h * input.w;
        for (std::size_t i = 0; i < input.n; ++i) {
            const double* ip = input.data.data() + i * d;
            double* gip = g.grad_input.data.data() + i * d;
            const double* gp = grad_output.data.data() + i * weights.n;
            for (std::size_t co = 0; co < weights.n; ++co) {
                const double go = gp[co];
                g.grad_bias[co] += go;
                const double* wp = weights.data.data() + co * d;
                double* gwp = g.grad_weights.data.data() + co * d;
                for (std::size_t k = 0; k < d; ++k) {
                    gwp[k] += go * ip[k];
                    gip[k] += go * wp[k];
                }
            }
        }
        return g;
    }

    for (std::size_t i = 0; i < input.n; ++i) {
        for (std::size_t co = 0; co < weights.n; ++co) {
            const double* gp = &grad_output.at(i, co, 0, 0);
            double acc = 0.0;
            for (std::size_t k = 0; k < ho * wo; ++k) {
                acc += gp[k];
            }
            g.grad_bias[co] += acc;

            for (std::size_t ci = 0; ci < input.c; ++ci) {
                const double* ip = &input.at(i, ci, 0, 0);
                double* gip = &g.grad_input.at(i, ci, 0, 0);
                const double* wp = &weights.at(co, ci, 0, 0);
                double* gwp = &g.grad_weights.at(co, ci, 0, 0);
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const double wv = wp[ky * kw + kx];
                        double wacc = 0.0;
                        for (std::size_t y = 0; y < ho; ++y) {
                            const double* irow = ip + (y + ky) * input.w + kx;
                            double* girow = gip + (y + ky) * input.w + kx;
                            const double* grow = gp + y * wo;
                            for (std::size_t x = 0; x < wo; ++x) {
                                wacc += irow[x] * grow[x];
                                girow[x] += wv * grow[x];
                            }
                        }
                        gwp[ky * kw + kx] += wacc;
                    }
                }
            }
        }
    }
    return g;
}

PoolResult maxpool2x2_forward(const Tensor& input) {
    if (input.h % 2 != 0) {
        throw DimensionError("maxpool2x2: axis h=" + std::to_string(input.h) + " is odd");
    }
    if (input.w % 2 != 0) {
        throw DimensionError("maxpool2x2: axis w=" + std::to_string(input.w) + " is odd");
    }

    PoolResult r;
    const std::size_t ho = input.h / 2, wo = input.w / 2;
    r.output = Tensor(input.n, input.c, ho, wo);
    r.indices = PoolIndexMap{input.n, input.c, input.h, input.w, {}};
    r.indices.argmax.resize(r.output.size());

    std::size_t out_pos = 0;
    for (std::size_t i = 0; i < input.n; ++i) {
        for (std::size_t j = 0; j < input.c; ++j) {
            const std::size_t plane = (i * input.c + j) * input.h * input.w;
            for (std::size_t y = 0; y < ho; ++y) {
                for (std::size_t x = 0; x < wo; ++x) {
                    // Strict > keeps the first element of the window on ties.
                    std::size_t best = plane + (2 * y) * input.w + 2 * x;
                    double best_v = input.data[best];
                    const std::size_t cand[3] = {best + 1, best + input.w, best + input.w + 1};
                    for (std::size_t k = 0; k < 3; ++k) {
                        if (input.data[cand[k]] > best_v) {
                            best = cand[k];
                            best_v = input.data[cand[k]];
                        }
                    }
                    r.output.data[out_pos] = best_v;
                    r.indices.argmax[out_pos] = best;
                    ++out_pos;
                }
            }
        }
    }
    return r;
}

Tensor maxpool2x2_backward(const PoolIndexMap& indices, const Tensor& grad_output) {
    const std::size_t ho = indices.in_h / 2, wo = indices.in_w / 2;
    if (grad_output.n != indices.in_n || grad_output.c != indices.in_c ||
        grad_output.h != ho || grad_output.w != wo) {
        throw DimensionError("maxpool2x2 backward: grad_output shape " +
                             shape_str(grad_output) + " does not match pooled output [" +
                             std::to_string(indices.in_n) + "," + std::to_string(indices.in_c) +
                             "," + std::to_string(ho) + "," + std::to_string(wo) + "]");
    }
    if (indices.argmax.size() != grad_output.size()) {
        throw DimensionError("maxpool2x2 backward: argmax map has " +
                             std::to_string(indices.argmax.size()) + " entries, expected " +
                             std::to_string(grad_output.size()));
    }

    Tensor grad_input(indices.in_n, indices.in_c, indices.in_h, indices.in_w);
    for (std::size_t k = 0; k < grad_output.size(); ++k) {
        grad_input.data[indices.argmax[k]] += grad_output.data[k];
    }
    return grad_input;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.data) {
        v = v > 0.0 ? v : 0.0;
    }
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
    if (!input.same_shape(grad_output)) {
        throw DimensionError("relu backward: grad_output shape " + shape_str(grad_output) +
                             " does not match input shape " + shape_str(input));
    }
    Tensor grad_input(input.n, input.c, input.h, input.w);
    for (std::size_t k = 0; k < input.size(); ++k) {
        grad_input.data[k] = input.data[k] > 0.0 ? grad_output.data[k] : 0.0;
    }
    return grad_input;
}

Tensor fc_forward(const Tensor& input, const Tensor& weights,
                  std::span<const double> bias) {
    const std::size_t d_in = input.c * input.h * input.w;
    const std::size_t w_in = weights.c * weights.h * weights.w;
    if (w_in != d_in) {
        throw DimensionError("fc: flattened input width " + std::to_string(d_in) +
                             " does not match weights d_in=" + std::to_string(w_in));
    }
    if (bias.size() != weights.n) {
        throw DimensionError("fc: bias length " + std::to_string(bias.size()) +
                             " does not match d_out=" + std::to_string(weights.n));
    }

    const std::size_t d_out = weights.n;
    Tensor out(input.n, d_out, 1, 1);
    for (std::size_t i = 0; i < input.n; ++i) {
        const double* xr = input.data.data() + i * d_in;
        for (std::size_t o = 0; o < d_out; ++o) {
            const double* wr = weights.data.data() + o * d_in;
            double acc = bias[o];
            for (std::size_t k = 0; k < d_in; ++k) {
                acc += xr[k] * wr[k];
            }
            out.data[i * d_out + o] = acc;
        }
    }
    return out;
}

LayerGrads fc_backward(const Tensor& input, const Tensor& weights,
                       const Tensor& grad_output) {
    const std::size_t d_in = input.c * input.h * input.w;
    const std::size_t w_in = weights.c * weights.h * weights.w;
    if (w_in != d_in) {
        throw DimensionError("fc backward: flattened input width " + std::to_string(d_in) +
                             " does not match weights d_in=" + std::to_string(w_in));
    }
    const std::size_t d_out = weights.n;
    if (grad_output.n != input.n || grad_output.c * grad_output.h * grad_output.w != d_out) {
        throw DimensionError("fc backward: grad_output shape " + shape_str(grad_output) +
                             " does not match output [" + std::to_string(input.n) + "," +
                             std::to_string(d_out) + ",1,1]");
    }

    LayerGrads g;
    g.grad_input = Tensor(input.n, input.c, input.h, input.w);
    g.grad_weights = Tensor(weights.n, weights.c, weights.h, weights.w);
    g.grad_bias.assign(d_out, 0.0);

    for (std::size_t i = 0; i < input.n; ++i) {
        const double* xr = input.data.data() + i * d_in;
        const double* gr = grad_output.data.data() + i * d_out;
        double* gxr = g.grad_input.data.data() + i * d_in;
        for (std::size_t o = 0; o < d_out; ++o) {
            const double go = gr[o];
            const double* wr = weights.data.data() + o * d_in;
            double* gwr = g.grad_weights.data.data() + o * d_in;
            g.grad_bias[o] += go;
            for (std::size_t k = 0; k < d_in; ++k) {
                gxr[k] += go * wr[k];
                gwr[k] += go * xr[k];
            }
        }
    }
    return g;
}

SoftmaxLossResult softmax_cross_entropy(const Tensor& logits,
                                        std::span<const int> labels) {
    const std::size_t k = logits.c * logits.h * logits.w;
    if (labels.size() != logits.n) {
        throw DimensionError("softmax: labels length " + std::to_string(labels.size()) +
                             " does not match batch axis n=" + std::to_string(logits.n));
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
            throw LabelError("label " + std::to_string(labels[i]) + " out of range [0," +
                                 std::to_string(k) + ") at item " + std::to_string(i),
                             i);
        }
    }

    SoftmaxLossResult r;
    r.grad_logits = Tensor(logits.n, logits.c, logits.h, logits.w);
    const double inv_n = 1.0 / static_cast<double>(logits.n);

    double total = 0.0;
    for (std::size_t i = 0; i < logits.n; ++i) {
        const double* z = logits.data.data() + i * k;
        double* g = r.grad_logits.data.data() + i * k;

        double m = z[0];
        for (std::size_t j = 1; j < k; ++j) {
            m = std::max(m, z[j]);
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            denom += std::exp(z[j] - m);
        }
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        total += -(z[y] - m - std::log(denom));

        for (std::size_t j = 0; j < k; ++j) {
            const double p = std::exp(z[j] - m) / denom;
            g[j] = (p - (j == y ? 1.0 : 0.0)) * inv_n;
        }
    }
    r.loss = total * inv_n;
    return r;
}

SgdOptimizer::SgdOptimizer(SgdHyperparams hp, std::vector<std::size_t> param_sizes)
    : hp_(hp) {
    if (!(hp_.learning_rate > 0.0)) {
        throw ArgumentError("sgd: learning_rate must be > 0");
    }
    if (hp_.momentum < 0.0 || hp_.weight_decay < 0.0) {
        throw ArgumentError("sgd: momentum and weight_decay must be non-negative");
    }
    velocity_.reserve(param_sizes.size());
    for (std::size_t s : param_sizes) {
        velocity_.emplace_back(s, 0.0);
    }
}

void SgdOptimizer::step(std::size_t slot, std::span<double> param,
                        std::span<const double> grad) {
    if (slot >= velocity_.size()) {
        throw ArgumentError("sgd: parameter slot " + std::to_string(slot) + " out of range");
    }
    std::vector<double>& v = velocity_[slot];
    if (param.size() != v.size() || grad.size() != v.size()) {
        throw DimensionError("sgd: slot " + std::to_string(slot) + " expects " +
                             std::to_string(v.size()) + " values, got param " +
                             std::to_string(param.size()) + " / grad " +
                             std::to_string(grad.size()));
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double g = grad[i] + hp_.weight_decay * param[i];
        v[i] = hp_.momentum * v[i] - hp_.learning_rate * g;
        param[i] += v[i];
    }
}

}  // namespace radseq
