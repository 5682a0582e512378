// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Input corruption operators.
//   MASK(x)  = modality dropout followed by patch-wise masking (pretraining)
//   MDrop(x) = modality dropout only (fine-tuning)

#pragma once

#include "mmseg/modality.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace mmseg {

/// Distribution over the number k of additional modalities to drop.
/// Empty weights means uniform over {0, ..., available − 1}; otherwise
/// weights[k] for k ≥ available fold onto k = available − 1.
struct DropCountDist {
    std::vector<double> weights;

    static DropCountDist uniform() { return {}; }
    static DropCountDist fixed(int k);
    int sample(int available, std::uint64_t seed) const;
};

ModalityCode modality_dropout(const ModalityCode& code, std::uint64_t seed,
                              const DropCountDist& dist = DropCountDist::uniform());

struct MaskSpec {
    std::vector<int> dropped_modalities;
    Extent3 patch{4, 4, 4};
    std::vector<std::array<std::int64_t, 3>> masked_patches;  // patch-grid (z, y, x)
    double mask_ratio = 0.5;
    std::uint64_t seed = 0;
};

/// Draw dropped modalities (via modality_dropout on code) and
/// floor(ratio · patches) distinct patches, shared across channels.
MaskSpec make_mask_spec(const ModalityCode& code, Extent3 volume, Extent3 patch, double mask_ratio,
                        std::uint64_t seed, const DropCountDist& dist = DropCountDist::uniform());

/// Errors when the volume is not tiled exactly by the patch.
template <typename T>
void apply_mask_inplace(Tensor<T>& voxels, const MaskSpec& spec);

MultimodalVolume apply_mask(const MultimodalVolume& v, const MaskSpec& spec);

/// MDrop: zero the channels dropped by modality_dropout; returns the new code.
ModalityCode mdrop(MultimodalVolume& v, const ModalityCode& code, std::uint64_t seed,
                   const DropCountDist& dist = DropCountDist::uniform());

nlohmann::json mask_spec_to_json(const MaskSpec& s);
MaskSpec mask_spec_from_json(const nlohmann::json& j);

}  // namespace mmseg
