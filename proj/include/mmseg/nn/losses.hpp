// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Loss functions with analytic gradients. Each returns the scalar value and
// the gradient w.r.t. its differentiable input(s).

#pragma once

#include "mmseg/modality.hpp"
#include "mmseg/tensor.hpp"

#include <vector>

namespace mmseg::nn {

inline constexpr double kDiceEps = 1e-5;

template <typename T>
struct LossGrad {
    double value = 0.0;
    Tensor<T> grad;
};

/// Region targets as a T tensor [3, D, H, W] of {0,1}.
template <typename T>
Tensor<T> region_targets(const RegionMasks& y);

/// mean_r [ 1 − (2 Σ p g + ε) / (Σ p + Σ g + ε) ],  p = sigmoid(logits)
template <typename T>
LossGrad<T> dice_loss(const Tensor<T>& logits, const Tensor<T>& targets);

/// Mean binary cross-entropy with logits over all region voxels.
template <typename T>
LossGrad<T> bce_loss(const Tensor<T>& logits, const Tensor<T>& targets);

/// Mean over available channels of the per-channel voxel-mean squared error.
/// Missing channels contribute neither value nor gradient.
template <typename T>
LossGrad<T> rec_loss(const Tensor<T>& xhat, const Tensor<T>& x, const ModalityCode& code);

/// Margin-aware feature distillation summed over selected tap layers:
///   Σ_l mean( max(0, |f_t − f_s| − margin)^2 )
/// grad_student / grad_teacher are filled for the selected layers only.
template <typename T>
struct KdResult {
    double value = 0.0;
    std::vector<Tensor<T>> grad_teacher;
    std::vector<Tensor<T>> grad_student;
};

template <typename T>
KdResult<T> kd_loss(const std::vector<Tensor<T>>& teacher_taps, const std::vector<Tensor<T>>& student_taps,
                    double margin, const std::vector<int>& layers);

/// task + α·data + β·kd
inline double total_loss(double task, double data, double kd, double alpha, double beta) {
    return task + alpha * data + beta * kd;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& logits);

}  // namespace mmseg::nn
