// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "oracles.hpp"

#include "mmseg/nn/layers.hpp"

#include <functional>
#include <string>

namespace oracle {

struct GradCheck {
    double max_rel = 0.0;
    int checked = 0;
    std::string worst;
};

// Compares p->grad (already filled by one backward) against central
// differences of loss() on `per_param` random coordinates of every parameter.
// Pairs where both sides are below `floor` in magnitude count as agreeing.
inline GradCheck check_params(const mmseg::nn::ParamList<double>& params, const std::function<double()>& loss,
                              mmseg::Rng& rng, int per_param, double floor = 1e-8) {
    GradCheck r;
    for (auto* p : params) {
        const auto n = p->value.numel();
        const int k = static_cast<int>(std::min<std::int64_t>(per_param, n));
        for (auto i : rng.sample_without_replacement(n, k)) {
            const double analytic = p->grad[i];
            const double numeric = central_diff(p->value[i], loss);
            ++r.checked;
            if (std::abs(analytic) < floor && std::abs(numeric) < floor) continue;
            const double e = rel_err(analytic, numeric);
            if (e > r.max_rel) {
                r.max_rel = e;
                r.worst = p->name + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic) + " numeric " +
                          std::to_string(numeric);
            }
        }
    }
    return r;
}

}  // namespace oracle
