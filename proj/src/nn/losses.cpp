// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/nn/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace mmseg::nn {

using i64 = std::int64_t;

namespace {
template <typename T>
T sig(T z) {
    return z >= T{0} ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}
}  // namespace

template <typename T>
Tensor<T> region_targets(const RegionMasks& y) {
    Tensor<T> out(y.regions.shape());
    for (i64 i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(y.regions[i]);
    return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& logits) {
    Tensor<T> p(logits.shape());
    for (i64 i = 0; i < p.numel(); ++i) p[i] = sig(logits[i]);
    return p;
}

template <typename T>
LossGrad<T> dice_loss(const Tensor<T>& logits, const Tensor<T>& targets) {
    if (logits.shape() != targets.shape())
        throw std::invalid_argument("dice_loss shape mismatch " + shape_str(logits.shape()) + " vs " +
                                    shape_str(targets.shape()));
    const i64 regions = logits.channels(), vox = logits.numel() / regions;
    LossGrad<T> out;
    out.grad = Tensor<T>(logits.shape());
    const auto p = sigmoid(logits);
    for (i64 r = 0; r < regions; ++r) {
        const T* pr = p.channel(r);
        const T* gr = targets.channel(r);
        double inter = 0.0, sp = 0.0, sg = 0.0;
        for (i64 i = 0; i < vox; ++i) {
            inter += static_cast<double>(pr[i]) * gr[i];
            sp += pr[i];
            sg += gr[i];
        }
        const double num = 2.0 * inter + kDiceEps, den = sp + sg + kDiceEps;
        out.value += 1.0 - num / den;
        // d/dp_i [1 − num/den] = −(2 g_i den − num) / den²
        T* gout = out.grad.channel(r);
        const double scale = 1.0 / static_cast<double>(regions);
        for (i64 i = 0; i < vox; ++i) {
            const double dp = -(2.0 * gr[i] * den - num) / (den * den);
            gout[i] = static_cast<T>(scale * dp * pr[i] * (1.0 - pr[i]));
        }
    }
    out.value /= static_cast<double>(regions);
    return out;
}

template <typename T>
LossGrad<T> bce_loss(const Tensor<T>& logits, const Tensor<T>& targets) {
    if (logits.shape() != targets.shape()) throw std::invalid_argument("bce_loss shape mismatch");
    const i64 n = logits.numel();
    LossGrad<T> out;
    out.grad = Tensor<T>(logits.shape());
    double s = 0.0;
    const double inv = 1.0 / static_cast<double>(n);
    for (i64 i = 0; i < n; ++i) {
        const double z = logits[i], g = targets[i];
        s += std::max(z, 0.0) - z * g + std::log1p(std::exp(-std::abs(z)));
        out.grad[i] = static_cast<T>((sig(z) - g) * inv);
    }
    out.value = s * inv;
    return out;
}

template <typename T>
LossGrad<T> rec_loss(const Tensor<T>& xhat, const Tensor<T>& x, const ModalityCode& code) {
    if (xhat.shape() != x.shape())
        throw std::invalid_argument("rec_loss shape mismatch " + shape_str(xhat.shape()) + " vs " +
                                    shape_str(x.shape()));
    if (code.size() != x.channels()) throw std::invalid_argument("rec_loss: code length does not match channels");
    const int avail = code.available_count();
    if (avail == 0) throw std::invalid_argument("rec_loss: no available modality to supervise");
    const i64 vox = x.numel() / x.channels();
    LossGrad<T> out;
    out.grad = Tensor<T>(x.shape());
    const double scale = 1.0 / (static_cast<double>(vox) * avail);
    for (int c = 0; c < code.size(); ++c) {
        if (!code[c]) continue;
        const T* a = xhat.channel(c);
        const T* b = x.channel(c);
        T* g = out.grad.channel(c);
        double s = 0.0;
        for (i64 i = 0; i < vox; ++i) {
            const double d = static_cast<double>(a[i]) - b[i];
            s += d * d;
            g[i] = static_cast<T>(2.0 * d * scale);
        }
        out.value += s / static_cast<double>(vox);
    }
    out.value /= avail;
    return out;
}

template <typename T>
KdResult<T> kd_loss(const std::vector<Tensor<T>>& teacher, const std::vector<Tensor<T>>& student, double margin,
                    const std::vector<int>& layers) {
    if (margin < 0) throw std::invalid_argument("kd margin must be >= 0");
    KdResult<T> out;
    out.grad_teacher.resize(teacher.size());
    out.grad_student.resize(student.size());
    for (int l : layers) {
        if (l < 0 || static_cast<std::size_t>(l) >= teacher.size() || static_cast<std::size_t>(l) >= student.size())
            throw std::invalid_argument("kd layer " + std::to_string(l) + " out of range");
        const auto& ft = teacher[static_cast<std::size_t>(l)];
        const auto& fs = student[static_cast<std::size_t>(l)];
        if (ft.shape() != fs.shape())
            throw std::invalid_argument("kd layer " + std::to_string(l) + " shape mismatch: teacher " +
                                        shape_str(ft.shape()) + " vs student " + shape_str(fs.shape()));
        const i64 n = ft.numel();
        Tensor<T> gt(ft.shape()), gs(fs.shape());
        double s = 0.0;
        const double inv = 1.0 / static_cast<double>(n);
        for (i64 i = 0; i < n; ++i) {
            const double d = static_cast<double>(ft[i]) - fs[i];
            const double excess = std::abs(d) - margin;
            if (excess <= 0.0) continue;
            s += excess * excess;
            // d/dft = 2 excess sign(d) / n ; d/dfs = −that
            const double gv = 2.0 * excess * (d > 0 ? 1.0 : -1.0) * inv;
            gt[i] = static_cast<T>(gv);
            gs[i] = static_cast<T>(-gv);
        }
        out.value += s * inv;
        out.grad_teacher[static_cast<std::size_t>(l)] = std::move(gt);
        out.grad_student[static_cast<std::size_t>(l)] = std::move(gs);
    }
    return out;
}

#define MMSEG_INSTANTIATE(T)                                                                               \
    template Tensor<T> region_targets<T>(const RegionMasks&);                                            \
    template Tensor<T> sigmoid<T>(const Tensor<T>&);                                                     \
    template LossGrad<T> dice_loss<T>(const Tensor<T>&, const Tensor<T>&);                               \
    template LossGrad<T> bce_loss<T>(const Tensor<T>&, const Tensor<T>&);                                \
    template LossGrad<T> rec_loss<T>(const Tensor<T>&, const Tensor<T>&, const ModalityCode&);           \
    template KdResult<T> kd_loss<T>(const std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&, double, \
                                    const std::vector<int>&);

MMSEG_INSTANTIATE(float)
MMSEG_INSTANTIATE(double)
#undef MMSEG_INSTANTIATE

}  // namespace mmseg::nn
