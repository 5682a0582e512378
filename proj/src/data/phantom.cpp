// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/data/phantom.hpp"

#include "mmseg/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mmseg::data {

namespace {

using i64 = std::int64_t;

// Tissue classes: 0 brain, 1 edema (label 2), 2 necrotic core (label 1), 3 enhancing (label 4).
struct Contrast {
    std::array<double, 4> tissue;
    double gamma;
};

// FLAIR, T1, T1c, T2. The enhancing rim is brightest in T1c.
constexpr std::array<Contrast, 4> kCanonical{{
    {{0.40, 0.90, 0.60, 0.70}, 1.0},
    {{0.60, 0.42, 0.28, 0.48}, 0.8},
    {{0.58, 0.45, 0.32, 1.00}, 1.2},
    {{0.38, 0.85, 0.80, 0.62}, 0.9},
}};

Contrast contrast_for(int m, std::uint64_t seed) {
    if (m < 4) return kCanonical[static_cast<std::size_t>(m)];
    Rng rng(derive_seed(seed, "contrast" + std::to_string(m)));
    Contrast c{};
    for (auto& t : c.tissue) t = rng.uniform(0.25, 1.0);
    c.gamma = rng.uniform(0.7, 1.3);
    return c;
}

struct Ellipsoid {
    double cz, cy, cx, rz, ry, rx;

    double q(double z, double y, double x) const {
        const double a = (z - cz) / rz, b = (y - cy) / ry, c = (x - cx) / rx;
        return a * a + b * b + c * c;
    }
};

}  // namespace

Phantom generate_phantom(std::uint64_t seed, Extent3 shape, int modalities) {
    for (i64 dim : {shape.d, shape.h, shape.w})
        if (dim < 16 || dim % 8 != 0)
            throw std::invalid_argument("phantom extents must be >= 16 and divisible by 8, got " +
                                        std::to_string(dim));
    if (modalities < 2) throw std::invalid_argument("phantom needs at least 2 modalities");

    Rng rng(derive_seed(seed, "phantom"));
    const double D = static_cast<double>(shape.d), H = static_cast<double>(shape.h), W = static_cast<double>(shape.w);

    const Ellipsoid brain{D / 2 + rng.uniform(-2, 2), H / 2 + rng.uniform(-2, 2), W / 2 + rng.uniform(-2, 2),
                          D * rng.uniform(0.38, 0.44), H * rng.uniform(0.38, 0.44), W * rng.uniform(0.38, 0.44)};
    Ellipsoid wt{};
    wt.rz = D * rng.uniform(0.14, 0.22);
    wt.ry = H * rng.uniform(0.14, 0.22);
    wt.rx = W * rng.uniform(0.14, 0.22);
    // Keep WT inside the brain: centre offset bounded by (brain radius − WT radius).
    wt.cz = brain.cz + rng.uniform(-1, 1) * std::max(0.0, brain.rz - wt.rz - 1) * 0.5;
    wt.cy = brain.cy + rng.uniform(-1, 1) * std::max(0.0, brain.ry - wt.ry - 1) * 0.5;
    wt.cx = brain.cx + rng.uniform(-1, 1) * std::max(0.0, brain.rx - wt.rx - 1) * 0.5;
    const double tc_scale = rng.uniform(0.45, 0.65);
    Ellipsoid tc{wt.cz + rng.uniform(-0.15, 0.15) * wt.rz, wt.cy + rng.uniform(-0.15, 0.15) * wt.ry,
                 wt.cx + rng.uniform(-0.15, 0.15) * wt.rx, wt.rz * tc_scale, wt.ry * tc_scale, wt.rx * tc_scale};
    const double et_inner = std::pow(1.0 - rng.uniform(0.35, 0.45), 2.0);  // q threshold of the necrotic interior

    // Low-frequency texture: sum of three random plane waves.
    std::array<std::array<double, 4>, 3> waves{};
    for (auto& w : waves) {
        w[0] = rng.uniform(0.5, 2.0) * 2 * std::numbers::pi / D;
        w[1] = rng.uniform(0.5, 2.0) * 2 * std::numbers::pi / H;
        w[2] = rng.uniform(0.5, 2.0) * 2 * std::numbers::pi / W;
        w[3] = rng.uniform(0, 2 * std::numbers::pi);
    }

    const i64 vox = shape.voxels();
    Tensor<std::uint8_t> labels({1, shape.d, shape.h, shape.w});
    std::vector<std::int8_t> tissue(static_cast<std::size_t>(vox), -1);
    std::vector<double> texture(static_cast<std::size_t>(vox), 0.0);
    for (i64 z = 0; z < shape.d; ++z)
        for (i64 y = 0; y < shape.h; ++y)
            for (i64 x = 0; x < shape.w; ++x) {
                const i64 i = (z * shape.h + y) * shape.w + x;
                const double pz = z + 0.5, py = y + 0.5, px = x + 0.5;
                double t = 0;
                for (const auto& w : waves) t += std::sin(w[0] * pz + w[1] * py + w[2] * px + w[3]);
                texture[static_cast<std::size_t>(i)] = t / 3.0;
                if (brain.q(pz, py, px) > 1.0) continue;
                std::int8_t cls = 0;
                std::uint8_t lab = 0;
                const double qt = tc.q(pz, py, px);
                if (qt <= 1.0) {
                    if (qt <= et_inner) {
                        cls = 2;
                        lab = 1;
                    } else {
                        cls = 3;
                        lab = 4;
                    }
                } else if (wt.q(pz, py, px) <= 1.0) {
                    cls = 1;
                    lab = 2;
                }
                tissue[static_cast<std::size_t>(i)] = cls;
                labels[i] = lab;
            }

    Phantom out;
    out.volume.voxels = Tensor<float>({modalities, shape.d, shape.h, shape.w});
    out.volume.subject_id = "phantom-" + std::to_string(seed);
    for (int m = 0; m < modalities; ++m) {
        const auto c = contrast_for(m, seed);
        Rng noise(derive_seed(seed, "noise" + std::to_string(m)));
        float* dst = out.volume.voxels.channel(m);
        for (i64 i = 0; i < vox; ++i) {
            const double n = noise.normal();  // drawn for every voxel so streams stay aligned
            const int cls = tissue[static_cast<std::size_t>(i)];
            if (cls < 0) continue;
            // Monotone transform of the shared texture, then tissue contrast.
            const double tex01 = 0.5 * (texture[static_cast<std::size_t>(i)] + 1.0);
            const double shaded = std::pow(tex01, c.gamma);
            const double v = c.tissue[static_cast<std::size_t>(cls)] * (0.85 + 0.15 * shaded) + 0.03 * n;
            dst[i] = static_cast<float>(std::clamp(v, 0.01, 1.2));
        }
    }
    out.masks = masks_from_labels(labels);
    return out;
}

}  // namespace mmseg::data
