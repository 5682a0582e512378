// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference implementations used by the unit and acceptance
// tests. Written straight from the definitions, with no shared code paths.

#pragma once

#include "mmseg/modality.hpp"
#include "mmseg/nn/network.hpp"
#include "mmseg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace oracle {

using mmseg::Extent3;
using mmseg::Tensor;

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double rec(const Tensor<double>& xhat, const Tensor<double>& x, const mmseg::ModalityCode& code) {
    const auto e = x.extent();
    double total = 0;
    int used = 0;
    for (int c = 0; c < code.size(); ++c) {
        if (!code[c]) continue;
        double s = 0;
        for (int z = 0; z < e.d; ++z)
            for (int y = 0; y < e.h; ++y)
                for (int w = 0; w < e.w; ++w) s += std::pow(xhat.at(c, z, y, w) - x.at(c, z, y, w), 2);
        total += s / static_cast<double>(e.voxels());
        ++used;
    }
    return total / used;
}

inline double dice(const Tensor<double>& logits, const Tensor<double>& g) {
    const double eps = 1e-5;
    const auto e = logits.extent();
    double sum = 0;
    for (int r = 0; r < logits.channels(); ++r) {
        double inter = 0, a = 0, b = 0;
        for (int z = 0; z < e.d; ++z)
            for (int y = 0; y < e.h; ++y)
                for (int w = 0; w < e.w; ++w) {
                    const double p = sigmoid(logits.at(r, z, y, w));
                    inter += p * g.at(r, z, y, w);
                    a += p;
                    b += g.at(r, z, y, w);
                }
        sum += 1.0 - (2 * inter + eps) / (a + b + eps);
    }
    return sum / static_cast<double>(logits.channels());
}

inline double bce(const Tensor<double>& logits, const Tensor<double>& g) {
    double s = 0;
    for (std::int64_t i = 0; i < logits.numel(); ++i) {
        const double p = sigmoid(logits[i]);
        s -= g[i] * std::log(p) + (1 - g[i]) * std::log(1 - p);
    }
    return s / static_cast<double>(logits.numel());
}

inline double kd(const std::vector<Tensor<double>>& ft, const std::vector<Tensor<double>>& fs, double m) {
    double total = 0;
    for (std::size_t l = 0; l < ft.size(); ++l) {
        double s = 0;
        for (std::int64_t i = 0; i < ft[l].numel(); ++i) {
            const double v = std::max(0.0, std::abs(ft[l][i] - fs[l][i]) - m);
            s += v * v;
        }
        total += s / static_cast<double>(ft[l].numel());
    }
    return total;
}

inline double dsc(const std::vector<std::uint8_t>& p, const std::vector<std::uint8_t>& g) {
    double inter = 0, a = 0, b = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        inter += p[i] && g[i];
        a += p[i] != 0;
        b += g[i] != 0;
    }
    if (a + b == 0) return 1.0;
    return 2 * inter / (a + b);
}

struct Pt {
    int z, y, x;
};

// Surface voxels: set voxels with at least one 6-neighbour outside the set
// or outside the grid.
inline std::vector<Pt> surface(const std::vector<std::uint8_t>& m, Extent3 e) {
    std::vector<Pt> out;
    auto at = [&](int z, int y, int x) -> bool {
        if (z < 0 || y < 0 || x < 0 || z >= e.d || y >= e.h || x >= e.w) return false;
        return m[static_cast<std::size_t>((z * e.h + y) * e.w + x)] != 0;
    };
    for (int z = 0; z < e.d; ++z)
        for (int y = 0; y < e.h; ++y)
            for (int x = 0; x < e.w; ++x) {
                if (!at(z, y, x)) continue;
                if (!at(z - 1, y, x) || !at(z + 1, y, x) || !at(z, y - 1, x) || !at(z, y + 1, x) ||
                    !at(z, y, x - 1) || !at(z, y, x + 1))
                    out.push_back({z, y, x});
            }
    return out;
}

inline double percentile_linear(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Symmetric 95th-percentile surface distance by exhaustive pairwise search.
inline double hd95(const std::vector<std::uint8_t>& p, const std::vector<std::uint8_t>& g, Extent3 e,
                   std::array<double, 3> sp) {
    const auto a = surface(p, e), b = surface(g, e);
    if (a.empty() && b.empty()) return 0.0;
    if (a.empty() || b.empty())
        return std::sqrt(std::pow(e.d * sp[0], 2) + std::pow(e.h * sp[1], 2) + std::pow(e.w * sp[2], 2));
    auto nearest = [&](const Pt& u, const std::vector<Pt>& set) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& v : set)
            best = std::min(best, std::sqrt(std::pow((u.z - v.z) * sp[0], 2) + std::pow((u.y - v.y) * sp[1], 2) +
                                            std::pow((u.x - v.x) * sp[2], 2)));
        return best;
    };
    std::vector<double> d;
    for (const auto& u : a) d.push_back(nearest(u, b));
    for (const auto& u : b) d.push_back(nearest(u, a));
    return percentile_linear(d, 95);
}

// Direct 3x3x3 "same" convolution.
inline void conv3d(const std::vector<double>& in, const std::vector<double>& w, const std::vector<double>& b,
                   std::vector<double>& out, int cin, int cout, Extent3 e) {
    out.assign(static_cast<std::size_t>(cout * e.voxels()), 0.0);
    for (int o = 0; o < cout; ++o)
        for (int z = 0; z < e.d; ++z)
            for (int y = 0; y < e.h; ++y)
                for (int x = 0; x < e.w; ++x) {
                    double s = b[static_cast<std::size_t>(o)];
                    for (int c = 0; c < cin; ++c)
                        for (int dz = -1; dz <= 1; ++dz)
                            for (int dy = -1; dy <= 1; ++dy)
                                for (int dx = -1; dx <= 1; ++dx) {
                                    const int zz = z + dz, yy = y + dy, xx = x + dx;
                                    if (zz < 0 || yy < 0 || xx < 0 || zz >= e.d || yy >= e.h || xx >= e.w) continue;
                                    s += w[static_cast<std::size_t>((((o * cin + c) * 3 + dz + 1) * 3 + dy + 1) * 3 + dx + 1)] *
                                         in[static_cast<std::size_t>(((c * e.d + zz) * e.h + yy) * e.w + xx)];
                                }
                    out[static_cast<std::size_t>(((o * e.d + z) * e.h + y) * e.w + x)] = s;
                }
}

// Exact squared distance to the nearest seed, by exhaustive search.
inline std::vector<double> squared_distance(const std::vector<std::uint8_t>& seeds, Extent3 e,
                                            std::array<double, 3> sp) {
    std::vector<double> out(static_cast<std::size_t>(e.voxels()), std::numeric_limits<double>::infinity());
    for (int z = 0; z < e.d; ++z)
        for (int y = 0; y < e.h; ++y)
            for (int x = 0; x < e.w; ++x) {
                auto& o = out[static_cast<std::size_t>((z * e.h + y) * e.w + x)];
                for (int a = 0; a < e.d; ++a)
                    for (int b = 0; b < e.h; ++b)
                        for (int c = 0; c < e.w; ++c)
                            if (seeds[static_cast<std::size_t>((a * e.h + b) * e.w + c)])
                                o = std::min(o, std::pow((z - a) * sp[0], 2) + std::pow((y - b) * sp[1], 2) +
                                                    std::pow((x - c) * sp[2], 2));
            }
    return out;
}

inline Tensor<double> random_tensor(mmseg::Shape s, mmseg::Rng& rng, double lo = -1, double hi = 1) {
    Tensor<double> t(std::move(s));
    for (auto& v : t.storage()) v = rng.uniform(lo, hi);
    return t;
}

inline Tensor<double> random_binary(mmseg::Shape s, mmseg::Rng& rng, double p = 0.3) {
    Tensor<double> t(std::move(s));
    for (auto& v : t.storage()) v = rng.bernoulli(p) ? 1.0 : 0.0;
    return t;
}

inline std::vector<std::uint8_t> random_mask(std::int64_t n, mmseg::Rng& rng, double p) {
    std::vector<std::uint8_t> m(static_cast<std::size_t>(n));
    for (auto& v : m) v = rng.bernoulli(p) ? 1 : 0;
    return m;
}

// Central-difference derivative of f along one scalar.
template <typename F>
double central_diff(double& v, F&& f, double h = 1e-5) {
    const double keep = v;
    v = keep + h;
    const double up = f();
    v = keep - h;
    const double down = f();
    v = keep;
    return (up - down) / (2 * h);
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

}  // namespace oracle
