// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic brain-tumor phantoms for desk-scale training and tests.
//
// Recipe v1 (frozen; acceptance thresholds depend on it):
//   - brain: ellipsoid with radii 0.38–0.44 of each extent, centred ±2 voxels
//   - WT: ellipsoid, radii 0.14–0.22 of each extent, fully inside the brain
//   - TC: concentric-ish ellipsoid, radii 0.45–0.65 of WT's
//   - ET: shell of TC (outer 35–45% of TC radius), labels 4; the TC interior is label 1
//   - shared anatomy: smooth low-frequency texture in [−1, 1]
//   - per modality: tissue intensity table, monotone gamma transform of the
//     texture, additive Gaussian noise σ = 0.03; outside the brain is 0

#pragma once

#include "mmseg/modality.hpp"

#include <cstdint>

namespace mmseg::data {

inline constexpr int kPhantomRecipeVersion = 1;

struct Phantom {
    MultimodalVolume volume;
    RegionMasks masks;
};

/// Each spatial dim must be >= 16 and divisible by 8.
Phantom generate_phantom(std::uint64_t seed, Extent3 shape, int modalities);

}  // namespace mmseg::data
