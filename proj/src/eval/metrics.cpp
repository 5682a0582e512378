// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/eval/metrics.hpp"

#include "mmseg/kernels/distance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmseg::eval {

using i64 = std::int64_t;

double dsc(const std::uint8_t* pred, const std::uint8_t* gt, i64 n) {
    i64 p = 0, g = 0, both = 0;
    for (i64 i = 0; i < n; ++i) {
        const bool a = pred[i] != 0, b = gt[i] != 0;
        p += a;
        g += b;
        both += a && b;
    }
    if (p + g == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

std::vector<std::uint8_t> boundary(const std::uint8_t* mask, Extent3 e) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(e.voxels()), 0);
    auto inside = [&](i64 z, i64 y, i64 x) {
        if (z < 0 || y < 0 || x < 0 || z >= e.d || y >= e.h || x >= e.w) return false;
        return mask[(z * e.h + y) * e.w + x] != 0;
    };
    for (i64 z = 0; z < e.d; ++z)
        for (i64 y = 0; y < e.h; ++y)
            for (i64 x = 0; x < e.w; ++x) {
                const i64 i = (z * e.h + y) * e.w + x;
                if (!mask[i]) continue;
                if (!inside(z - 1, y, x) || !inside(z + 1, y, x) || !inside(z, y - 1, x) || !inside(z, y + 1, x) ||
                    !inside(z, y, x - 1) || !inside(z, y, x + 1))
                    out[static_cast<std::size_t>(i)] = 1;
            }
    return out;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile of an empty set");
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
    const double a = values[lo];
    if (hi == lo) return a;
    const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
    return a + (pos - static_cast<double>(lo)) * (b - a);
}

double volume_diagonal(Extent3 e, const std::array<double, 3>& s) {
    const double a = static_cast<double>(e.d) * s[0], b = static_cast<double>(e.h) * s[1],
                 c = static_cast<double>(e.w) * s[2];
    return std::sqrt(a * a + b * b + c * c);
}

double hd95(const std::uint8_t* pred, const std::uint8_t* gt, Extent3 e, const std::array<double, 3>& spacing,
            const Hd95Options& opt) {
    const i64 n = e.voxels();
    const bool pe = std::none_of(pred, pred + n, [](auto v) { return v != 0; });
    const bool ge = std::none_of(gt, gt + n, [](auto v) { return v != 0; });
    if (pe && ge) return 0.0;
    if (pe || ge) return opt.one_empty.value_or(volume_diagonal(e, spacing));

    const auto bp = boundary(pred, e), bg = boundary(gt, e);
    const auto dp = kernels::squared_edt(bp.data(), e, spacing, opt.exec);
    const auto dg = kernels::squared_edt(bg.data(), e, spacing, opt.exec);
    std::vector<double> pooled;
    for (i64 i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (bp[k]) pooled.push_back(std::sqrt(dg[k]));
        if (bg[k]) pooled.push_back(std::sqrt(dp[k]));
    }
    return percentile(std::move(pooled), 95.0);
}

}  // namespace mmseg::eval
