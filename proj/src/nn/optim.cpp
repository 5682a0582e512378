// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/nn/optim.hpp"

namespace mmseg::nn {

template <typename T>
Adam<T>::Adam(ParamList<T> params, OptimConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
        m_.emplace_back(static_cast<std::size_t>(p->value.numel()), 0.0);
        v_.emplace_back(static_cast<std::size_t>(p->value.numel()), 0.0);
    }
}

template <typename T>
void Adam<T>::zero_grad() {
    for (auto* p : params_) p->grad.zero();
}

template <typename T>
void Adam<T>::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto* p = params_[k];
        if (!p->trainable) continue;
        auto& m = m_[k];
        auto& v = v_[k];
        const std::int64_t n = p->value.numel();
        for (std::int64_t i = 0; i < n; ++i) {
            const double g = static_cast<double>(p->grad[i]) + cfg_.weight_decay * p->value[i];
            auto& mi = m[static_cast<std::size_t>(i)];
            auto& vi = v[static_cast<std::size_t>(i)];
            mi = cfg_.beta1 * mi + (1.0 - cfg_.beta1) * g;
            vi = cfg_.beta2 * vi + (1.0 - cfg_.beta2) * g * g;
            const double upd = lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps);
            p->value[i] = static_cast<T>(p->value[i] - upd);
        }
    }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace mmseg::nn
