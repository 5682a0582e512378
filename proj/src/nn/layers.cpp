// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/nn/layers.hpp"

#include "mmseg/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace mmseg::nn {

using kernels::default_exec;
using i64 = std::int64_t;

template <typename T>
void init_normal(Param<T>& p, std::uint64_t model_seed, double stddev) {
    Rng rng(derive_seed(model_seed, p.name));
    for (i64 i = 0; i < p.value.numel(); ++i) p.value[i] = static_cast<T>(stddev * rng.normal());
}

template <typename T>
void init_constant(Param<T>& p, T v) {
    p.value.fill(v);
}

// ---------------------------------------------------------------------------

template <typename T>
Conv3d<T>::Conv3d(std::string name, i64 cin_, i64 cout_, i64 k_)
    : weight(name + ".weight", {cout_, cin_, k_, k_, k_}), bias(name + ".bias", {cout_}), cin(cin_), cout(cout_),
      k(k_) {
    if (k % 2 == 0) throw std::invalid_argument("Conv3d kernel size must be odd");
}

template <typename T>
void Conv3d<T>::init(std::uint64_t seed) {
    // He-normal for LeakyReLU fan-in.
    init_normal(weight, seed, std::sqrt(2.0 / static_cast<double>(cin * k * k * k)));
    init_constant(bias, T{0});
}

template <typename T>
Tensor<T> Conv3d<T>::forward(const Tensor<T>& x) {
    if (x.rank() != 4 || x.dim(0) != cin)
        throw std::invalid_argument(weight.name + ": expected " + std::to_string(cin) + " input channels, got " +
                                    shape_str(x.shape()));
    const auto e = x.extent();
    input_ = x;
    Tensor<T> out({cout, e.d, e.h, e.w});
    kernels::conv3d_forward(x.data(), weight.value.data(), bias.value.data(), out.data(),
                            {cin, cout, e.d, e.h, e.w, k}, default_exec());
    return out;
}

template <typename T>
Tensor<T> Conv3d<T>::backward(const Tensor<T>& grad_out, bool need_input_grad) {
    const auto e = input_.extent();
    const kernels::ConvGeom g{cin, cout, e.d, e.h, e.w, k};
    if (weight.trainable)
        kernels::conv3d_backward_weight(grad_out.data(), input_.data(), weight.grad.data(), bias.grad.data(), g,
                                        default_exec());
    if (!need_input_grad) return {};
    Tensor<T> gin(input_.shape());
    kernels::conv3d_backward_input(grad_out.data(), weight.value.data(), gin.data(), g, default_exec());
    return gin;
}

// ---------------------------------------------------------------------------

template <typename T>
UpConv<T>::UpConv(std::string name, i64 cin_, i64 cout_)
    : weight(name + ".weight", {cin_, cout_, 2, 2, 2}), bias(name + ".bias", {cout_}), cin(cin_), cout(cout_) {}

template <typename T>
void UpConv<T>::init(std::uint64_t seed) {
    init_normal(weight, seed, std::sqrt(2.0 / static_cast<double>(cin)));
    init_constant(bias, T{0});
}

template <typename T>
Tensor<T> UpConv<T>::forward(const Tensor<T>& x) {
    const auto e = x.extent();
    input_ = x;
    Tensor<T> out({cout, 2 * e.d, 2 * e.h, 2 * e.w});
    kernels::convt2_forward(x.data(), weight.value.data(), bias.value.data(), out.data(), {cin, cout, e.d, e.h, e.w},
                            default_exec());
    return out;
}

template <typename T>
Tensor<T> UpConv<T>::backward(const Tensor<T>& grad_out) {
    const auto e = input_.extent();
    const kernels::UpGeom g{cin, cout, e.d, e.h, e.w};
    if (weight.trainable)
        kernels::convt2_backward_weight(grad_out.data(), input_.data(), weight.grad.data(), bias.grad.data(), g,
                                        default_exec());
    Tensor<T> gin(input_.shape());
    kernels::convt2_backward_input(grad_out.data(), weight.value.data(), gin.data(), g, default_exec());
    return gin;
}

// ---------------------------------------------------------------------------

template <typename T>
GroupNorm<T>::GroupNorm(std::string name, i64 channels_, i64 groups_, double eps_)
    : gamma(name + ".gamma", {channels_}), beta(name + ".beta", {channels_}), channels(channels_), groups(groups_),
      eps(eps_) {
    if (groups <= 0 || channels % groups != 0)
        throw std::invalid_argument(name + ": channels " + std::to_string(channels) + " not divisible by groups " +
                                    std::to_string(groups));
}

template <typename T>
void GroupNorm<T>::init() {
    init_constant(gamma, T{1});
    init_constant(beta, T{0});
}

template <typename T>
Tensor<T> GroupNorm<T>::forward(const Tensor<T>& x) {
    const i64 vox = x.numel() / channels, cpg = channels / groups, n = cpg * vox;
    xhat_ = Tensor<T>(x.shape());
    inv_std_.assign(static_cast<std::size_t>(groups), T{0});
    Tensor<T> out(x.shape());
#pragma omp parallel for schedule(static)
    for (i64 g = 0; g < groups; ++g) {
        const T* src = x.data() + g * n;
        double mean = 0.0;
        for (i64 i = 0; i < n; ++i) mean += src[i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (i64 i = 0; i < n; ++i) {
            const double d = src[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const T inv = static_cast<T>(1.0 / std::sqrt(var + eps));
        inv_std_[static_cast<std::size_t>(g)] = inv;
        const T m = static_cast<T>(mean);
        for (i64 c = g * cpg; c < (g + 1) * cpg; ++c) {
            const T ga = gamma.value[c], be = beta.value[c];
            const T* s = x.data() + c * vox;
            T* xh = xhat_.data() + c * vox;
            T* o = out.data() + c * vox;
            for (i64 i = 0; i < vox; ++i) {
                xh[i] = (s[i] - m) * inv;
                o[i] = ga * xh[i] + be;
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> GroupNorm<T>::backward(const Tensor<T>& grad_out) {
    const i64 vox = xhat_.numel() / channels, cpg = channels / groups, n = cpg * vox;
    Tensor<T> gin(xhat_.shape());
#pragma omp parallel for schedule(static)
    for (i64 g = 0; g < groups; ++g) {
        // dxhat = dy * gamma;  dx = inv/N * (N dxhat - sum(dxhat) - xhat * sum(dxhat * xhat))
        double sum_dxh = 0.0, sum_dxh_xh = 0.0;
        for (i64 c = g * cpg; c < (g + 1) * cpg; ++c) {
            const T ga = gamma.value[c];
            const T* dy = grad_out.data() + c * vox;
            const T* xh = xhat_.data() + c * vox;
            double dg = 0.0, db = 0.0;
            for (i64 i = 0; i < vox; ++i) {
                const double d = static_cast<double>(dy[i]) * ga;
                sum_dxh += d;
                sum_dxh_xh += d * xh[i];
                dg += static_cast<double>(dy[i]) * xh[i];
                db += dy[i];
            }
            if (gamma.trainable) {
                gamma.grad[c] += static_cast<T>(dg);
                beta.grad[c] += static_cast<T>(db);
            }
        }
        const double inv = inv_std_[static_cast<std::size_t>(g)];
        const double nn = static_cast<double>(n);
        for (i64 c = g * cpg; c < (g + 1) * cpg; ++c) {
            const T ga = gamma.value[c];
            const T* dy = grad_out.data() + c * vox;
            const T* xh = xhat_.data() + c * vox;
            T* dx = gin.data() + c * vox;
            for (i64 i = 0; i < vox; ++i) {
                const double d = static_cast<double>(dy[i]) * ga;
                dx[i] = static_cast<T>(inv / nn * (nn * d - sum_dxh - xh[i] * sum_dxh_xh));
            }
        }
    }
    return gin;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> LeakyReLU<T>::forward(const Tensor<T>& x) {
    input_ = x;
    Tensor<T> out(x.shape());
    const i64 n = x.numel();
    const T* s = x.data();
    T* o = out.data();
#pragma omp parallel for simd schedule(static)
    for (i64 i = 0; i < n; ++i) o[i] = s[i] > T{0} ? s[i] : slope_ * s[i];
    return out;
}

template <typename T>
Tensor<T> LeakyReLU<T>::backward(const Tensor<T>& grad_out) {
    Tensor<T> gin(grad_out.shape());
    const i64 n = gin.numel();
    const T* s = input_.data();
    const T* g = grad_out.data();
    T* o = gin.data();
#pragma omp parallel for simd schedule(static)
    for (i64 i = 0; i < n; ++i) o[i] = s[i] > T{0} ? g[i] : slope_ * g[i];
    return gin;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
    const auto e = x.extent();
    if (e.d % 2 || e.h % 2 || e.w % 2) throw std::invalid_argument("avg_pool2 requires even extents");
    const i64 c = x.channels(), od = e.d / 2, oh = e.h / 2, ow = e.w / 2;
    Tensor<T> out({c, od, oh, ow});
#pragma omp parallel for schedule(static)
    for (i64 ch = 0; ch < c; ++ch)
        for (i64 z = 0; z < od; ++z)
            for (i64 y = 0; y < oh; ++y)
                for (i64 xx = 0; xx < ow; ++xx) {
                    T s{0};
                    for (i64 a = 0; a < 2; ++a)
                        for (i64 b = 0; b < 2; ++b)
                            for (i64 cc = 0; cc < 2; ++cc) s += x.at(ch, 2 * z + a, 2 * y + b, 2 * xx + cc);
                    out.at(ch, z, y, xx) = s * T(0.125);
                }
    return out;
}

template <typename T>
Tensor<T> avg_pool2_backward(const Tensor<T>& g) {
    const auto e = g.extent();
    const i64 c = g.channels();
    Tensor<T> out({c, 2 * e.d, 2 * e.h, 2 * e.w});
#pragma omp parallel for schedule(static)
    for (i64 ch = 0; ch < c; ++ch)
        for (i64 z = 0; z < 2 * e.d; ++z)
            for (i64 y = 0; y < 2 * e.h; ++y)
                for (i64 xx = 0; xx < 2 * e.w; ++xx) out.at(ch, z, y, xx) = g.at(ch, z / 2, y / 2, xx / 2) * T(0.125);
    return out;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.extent() != b.extent()) throw std::invalid_argument("concat_channels: extent mismatch");
    const auto e = a.extent();
    Tensor<T> out({a.channels() + b.channels(), e.d, e.h, e.w});
    std::copy(a.data(), a.data() + a.numel(), out.data());
    std::copy(b.data(), b.data() + b.numel(), out.data() + a.numel());
    return out;
}

template <typename T>
void split_channels(const Tensor<T>& g, i64 ca, Tensor<T>& ga, Tensor<T>& gb) {
    const auto e = g.extent();
    const i64 vox = e.voxels();
    ga = Tensor<T>({ca, e.d, e.h, e.w});
    gb = Tensor<T>({g.channels() - ca, e.d, e.h, e.w});
    std::copy(g.data(), g.data() + ca * vox, ga.data());
    std::copy(g.data() + ca * vox, g.data() + g.numel(), gb.data());
}

// ---------------------------------------------------------------------------

template <typename T>
ConvBlock<T>::ConvBlock(const std::string& name, i64 cin, i64 cout, i64 groups)
    : conv1_(name + ".conv1", cin, cout, 3), conv2_(name + ".conv2", cout, cout, 3),
      norm1_(name + ".norm1", cout, groups), norm2_(name + ".norm2", cout, groups) {}

template <typename T>
Tensor<T> ConvBlock<T>::forward(const Tensor<T>& x) {
    auto h = act1_.forward(norm1_.forward(conv1_.forward(x)));
    return act2_.forward(norm2_.forward(conv2_.forward(h)));
}

template <typename T>
Tensor<T> ConvBlock<T>::backward(const Tensor<T>& g, bool need_input_grad) {
    auto h = conv2_.backward(norm2_.backward(act2_.backward(g)));
    return conv1_.backward(norm1_.backward(act1_.backward(h)), need_input_grad);
}

template <typename T>
void ConvBlock<T>::collect(ParamList<T>& out) {
    conv1_.collect(out);
    norm1_.collect(out);
    conv2_.collect(out);
    norm2_.collect(out);
}

template <typename T>
void ConvBlock<T>::init(std::uint64_t seed) {
    conv1_.init(seed);
    conv2_.init(seed);
    norm1_.init();
    norm2_.init();
}

// ---------------------------------------------------------------------------

template <typename T>
Linear<T>::Linear(std::string name, i64 in_, i64 out_)
    : weight(name + ".weight", {out_, in_}), bias(name + ".bias", {out_}), in(in_), out(out_) {}

template <typename T>
void Linear<T>::init(std::uint64_t seed) {
    init_normal(weight, seed, std::sqrt(2.0 / static_cast<double>(in)));
    init_constant(bias, T{0});
}

template <typename T>
std::vector<T> Linear<T>::forward(const std::vector<T>& x) {
    if (static_cast<i64>(x.size()) != in)
        throw std::invalid_argument(weight.name + ": expected input length " + std::to_string(in) + ", got " +
                                    std::to_string(x.size()));
    input_ = x;
    std::vector<T> y(static_cast<std::size_t>(out));
    for (i64 o = 0; o < out; ++o) {
        T s = bias.value[o];
        const T* w = weight.value.data() + o * in;
        for (i64 i = 0; i < in; ++i) s += w[i] * x[static_cast<std::size_t>(i)];
        y[static_cast<std::size_t>(o)] = s;
    }
    return y;
}

template <typename T>
std::vector<T> Linear<T>::backward(const std::vector<T>& g) {
    std::vector<T> gin(static_cast<std::size_t>(in), T{0});
    for (i64 o = 0; o < out; ++o) {
        const T go = g[static_cast<std::size_t>(o)];
        const T* w = weight.value.data() + o * in;
        for (i64 i = 0; i < in; ++i) gin[static_cast<std::size_t>(i)] += w[i] * go;
        if (weight.trainable) {
            T* gw = weight.grad.data() + o * in;
            for (i64 i = 0; i < in; ++i) gw[i] += go * input_[static_cast<std::size_t>(i)];
            bias.grad[o] += go;
        }
    }
    return gin;
}

template <typename T>
std::vector<T> leaky_relu(const std::vector<T>& x, T slope) {
    std::vector<T> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : slope * x[i];
    return y;
}

template <typename T>
std::vector<T> leaky_relu_backward(const std::vector<T>& x, const std::vector<T>& g, T slope) {
    std::vector<T> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? g[i] : slope * g[i];
    return y;
}

#define MMSEG_INSTANTIATE(T)                                                                     \
    template void init_normal<T>(Param<T>&, std::uint64_t, double);                            \
    template void init_constant<T>(Param<T>&, T);                                              \
    template class Conv3d<T>;                                                                  \
    template class UpConv<T>;                                                                  \
    template class GroupNorm<T>;                                                               \
    template class LeakyReLU<T>;                                                               \
    template class ConvBlock<T>;                                                               \
    template class Linear<T>;                                                                  \
    template Tensor<T> avg_pool2<T>(const Tensor<T>&);                                         \
    template Tensor<T> avg_pool2_backward<T>(const Tensor<T>&);                                \
    template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);                 \
    template void split_channels<T>(const Tensor<T>&, i64, Tensor<T>&, Tensor<T>&);            \
    template std::vector<T> leaky_relu<T>(const std::vector<T>&, T);                           \
    template std::vector<T> leaky_relu_backward<T>(const std::vector<T>&, const std::vector<T>&, T);

MMSEG_INSTANTIATE(float)
MMSEG_INSTANTIATE(double)
#undef MMSEG_INSTANTIATE

}  // namespace mmseg::nn
