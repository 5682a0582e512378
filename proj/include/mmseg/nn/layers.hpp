// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Layers with explicit forward/backward. Each layer caches what its backward
// needs from the most recent forward, so a forward must be followed by at
// most one backward before the next forward on the same instance.
// Parameter gradients accumulate into Param::grad only when the parameter is
// trainable; frozen parameters never see a write.

#pragma once

#include "mmseg/kernels/conv3d.hpp"
#include "mmseg/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mmseg::nn {

template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = true;

    Param() = default;
    Param(std::string n, Shape s) : name(std::move(n)), value(s), grad(s) {}
};

template <typename T>
using ParamList = std::vector<Param<T>*>;

/// Seeded initializers; the seed is derived from (model seed, parameter name)
/// so initialization does not depend on construction order.
template <typename T>
void init_normal(Param<T>& p, std::uint64_t model_seed, double stddev);
template <typename T>
void init_constant(Param<T>& p, T v);

template <typename T>
class Conv3d {
public:
    Conv3d() = default;
    Conv3d(std::string name, std::int64_t cin, std::int64_t cout, std::int64_t k);

    Tensor<T> forward(const Tensor<T>& x);
    /// Returns the input gradient when need_input_grad, else an empty tensor.
    Tensor<T> backward(const Tensor<T>& grad_out, bool need_input_grad = true);
    void collect(ParamList<T>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
    void init(std::uint64_t seed);

    Param<T> weight, bias;
    std::int64_t cin = 0, cout = 0, k = 1;

private:
    Tensor<T> input_;
};

/// Transposed convolution with kernel 2, stride 2.
template <typename T>
class UpConv {
public:
    UpConv() = default;
    UpConv(std::string name, std::int64_t cin, std::int64_t cout);

    Tensor<T> forward(const Tensor<T>& x);
    Tensor<T> backward(const Tensor<T>& grad_out);
    void collect(ParamList<T>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
    void init(std::uint64_t seed);

    Param<T> weight, bias;
    std::int64_t cin = 0, cout = 0;

private:
    Tensor<T> input_;
};

template <typename T>
class GroupNorm {
public:
    GroupNorm() = default;
    GroupNorm(std::string name, std::int64_t channels, std::int64_t groups, double eps = 1e-5);

    Tensor<T> forward(const Tensor<T>& x);
    Tensor<T> backward(const Tensor<T>& grad_out);
    void collect(ParamList<T>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
    void init();

    Param<T> gamma, beta;
    std::int64_t channels = 0, groups = 1;
    double eps = 1e-5;

private:
    Tensor<T> xhat_;
    std::vector<T> inv_std_;
};

template <typename T>
class LeakyReLU {
public:
    explicit LeakyReLU(T slope = T(0.01)) : slope_(slope) {}
    Tensor<T> forward(const Tensor<T>& x);
    Tensor<T> backward(const Tensor<T>& grad_out);

private:
    T slope_;
    Tensor<T> input_;
};

/// 2x2x2 average pooling (stateless).
template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x);
template <typename T>
Tensor<T> avg_pool2_backward(const Tensor<T>& grad_out);

/// Channel concatenation of two [C, D, H, W] tensors and its split.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
void split_channels(const Tensor<T>& g, std::int64_t ca, Tensor<T>& ga, Tensor<T>& gb);

/// conv3 → GN → LeakyReLU → conv3 → GN → LeakyReLU
template <typename T>
class ConvBlock {
public:
    ConvBlock() = default;
    ConvBlock(const std::string& name, std::int64_t cin, std::int64_t cout, std::int64_t groups);

    Tensor<T> forward(const Tensor<T>& x);
    Tensor<T> backward(const Tensor<T>& grad_out, bool need_input_grad = true);
    void collect(ParamList<T>& out);
    void init(std::uint64_t seed);

private:
    Conv3d<T> conv1_, conv2_;
    GroupNorm<T> norm1_, norm2_;
    LeakyReLU<T> act1_, act2_;
};

/// Dense layer y = W x + b over flat vectors; W is [out, in].
template <typename T>
class Linear {
public:
    Linear() = default;
    Linear(std::string name, std::int64_t in, std::int64_t out);

    std::vector<T> forward(const std::vector<T>& x);
    std::vector<T> backward(const std::vector<T>& grad_out);
    void collect(ParamList<T>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
    void init(std::uint64_t seed);

    Param<T> weight, bias;
    std::int64_t in = 0, out = 0;

private:
    std::vector<T> input_;
};

template <typename T>
std::vector<T> leaky_relu(const std::vector<T>& x, T slope = T(0.01));
template <typename T>
std::vector<T> leaky_relu_backward(const std::vector<T>& x, const std::vector<T>& g, T slope = T(0.01));

}  // namespace mmseg::nn
