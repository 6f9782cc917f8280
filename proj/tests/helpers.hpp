#pragma once

// Test-side oracles and utilities. Everything here recomputes expected values
// from first principles (direct-sum loops, central finite differences) and
// must stay independent of the library's layer implementations.

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "radseq/tensor.hpp"

namespace testutil {

inline double rel_err(double a, double b) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-8});
    return std::fabs(a - b) / scale;
}

inline radseq::Tensor random_tensor(std::mt19937_64& rng, std::size_t n, std::size_t c,
                                    std::size_t h, std::size_t w, double lo = -1.0,
                                    double hi = 1.0) {
    radseq::Tensor t(n, c, h, w);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data) {
        v = dist(rng);
    }
    return t;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n,
                                         double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& x : v) {
        x = dist(rng);
    }
    return v;
}

// --- brute-force forward oracles -------------------------------------------

// out[n,o,y,x] = bias[o] + sum_{i,dy,dx} input[n,i,y+dy,x+dx] * weights[o,i,dy,dx]
inline radseq::Tensor brute_conv2d(const radseq::Tensor& in, const radseq::Tensor& w,
                                   const std::vector<double>& bias) {
    const std::size_t ho = in.h - w.h + 1, wo = in.w - w.w + 1;
    radseq::Tensor out(in.n, w.n, ho, wo);
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t o = 0; o < w.n; ++o)
            for (std::size_t y = 0; y < ho; ++y)
                for (std::size_t x = 0; x < wo; ++x) {
                    double acc = bias[o];
                    for (std::size_t i = 0; i < in.c; ++i)
                        for (std::size_t dy = 0; dy < w.h; ++dy)
                            for (std::size_t dx = 0; dx < w.w; ++dx)
                                acc += in.at(n, i, y + dy, x + dx) * w.at(o, i, dy, dx);
                    out.at(n, o, y, x) = acc;
                }
    return out;
}

inline radseq::Tensor brute_maxpool2x2(const radseq::Tensor& in) {
    radseq::Tensor out(in.n, in.c, in.h / 2, in.w / 2);
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t c = 0; c < in.c; ++c)
            for (std::size_t y = 0; y < in.h / 2; ++y)
                for (std::size_t x = 0; x < in.w / 2; ++x) {
                    double m = in.at(n, c, 2 * y, 2 * x);
                    m = std::max(m, in.at(n, c, 2 * y, 2 * x + 1));
                    m = std::max(m, in.at(n, c, 2 * y + 1, 2 * x));
                    m = std::max(m, in.at(n, c, 2 * y + 1, 2 * x + 1));
                    out.at(n, c, y, x) = m;
                }
    return out;
}

// out[n,o] = bias[o] + sum_k input[n,k] * weights[o,k] over the flattened input
inline radseq::Tensor brute_fc(const radseq::Tensor& in, const radseq::Tensor& w,
                               const std::vector<double>& bias) {
    const std::size_t d_in = in.c * in.h * in.w;
    radseq::Tensor out(in.n, w.n, 1, 1);
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t o = 0; o < w.n; ++o) {
            double acc = bias[o];
            for (std::size_t k = 0; k < d_in; ++k)
                acc += in.data[n * d_in + k] * w.data[o * d_in + k];
            out.at(n, o, 0, 0) = acc;
        }
    return out;
}

// --- finite differences ------------------------------------------------------

// Central finite difference of `loss` with respect to the value at `value`.
inline double central_diff(double* value, const std::function<double()>& loss,
                           double step = 1e-6) {
    const double orig = *value;
    *value = orig + step;
    const double up = loss();
    *value = orig - step;
    const double down = loss();
    *value = orig;
    return (up - down) / (2.0 * step);
}

inline double dot(const radseq::Tensor& a, const radseq::Tensor& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        acc += a.data[i] * b.data[i];
    }
    return acc;
}

// --- misc --------------------------------------------------------------------

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("radseq_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path file(const std::string& name) const { return path / name; }
};

}  // namespace testutil
