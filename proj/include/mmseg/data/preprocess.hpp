// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Crop, per-channel min-max scaling and train-time augmentation.
// Missing (all-zero) channels are left untouched by every step.

#pragma once

#include "mmseg/modality.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace mmseg::data {

struct AugmentConfig {
    double shift = 0.1;  // intensity shift drawn from [-shift, shift]
    double scale_lo = 0.9, scale_hi = 1.1;
    double flip_p = 0.5;
};

/// Every random decision for one preprocess call, so the same plan can be
/// replayed on the label masks.
struct PreprocessPlan {
    Extent3 offset{};
    Extent3 crop{};
    bool train = false;
    std::array<bool, 3> flip{false, false, false};  // (D, H, W)
    std::vector<double> shift, scale;                // per channel
};

PreprocessPlan make_plan(Extent3 volume, Extent3 crop, int channels, bool train, std::uint64_t seed,
                         const AugmentConfig& aug = {});

MultimodalVolume preprocess(const MultimodalVolume& v, Extent3 crop, bool train, std::uint64_t seed,
                            const AugmentConfig& aug = {});

struct Preprocessed {
    MultimodalVolume volume;
    RegionMasks masks;
};

/// Same as above, applying the identical crop and flips to the masks.
Preprocessed preprocess(const MultimodalVolume& v, const RegionMasks& y, Extent3 crop, bool train,
                        std::uint64_t seed, const AugmentConfig& aug = {});

MultimodalVolume apply_plan(const MultimodalVolume& v, const PreprocessPlan& plan);
RegionMasks apply_plan(const RegionMasks& y, const PreprocessPlan& plan);

/// Per-channel min-max to [0, 1]; min == max maps to 0.
void minmax_scale(Tensor<float>& voxels);

}  // namespace mmseg::data
