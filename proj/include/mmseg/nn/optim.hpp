// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mmseg/nn/layers.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace mmseg::nn {

struct OptimConfig {
    double lr = 3e-4;
    double weight_decay = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Cosine decay from lr0 to 0 over total_steps.
inline double cosine_lr(double lr0, long step, long total_steps) {
    if (total_steps <= 0) return lr0;
    const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
    return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * t));
}

/// Adam with coupled L2 weight decay (grad += wd · w). Only trainable
/// parameters are updated; moments are kept per parameter index, so the
/// parameter list must be stable across steps.
template <typename T>
class Adam {
public:
    Adam(ParamList<T> params, OptimConfig cfg);

    void step(double lr);
    void zero_grad();
    long steps() const { return t_; }

private:
    ParamList<T> params_;
    OptimConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

}  // namespace mmseg::nn
