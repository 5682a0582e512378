// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/masking.hpp"

#include "mmseg/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmseg {

using i64 = std::int64_t;

DropCountDist DropCountDist::fixed(int k) {
    DropCountDist d;
    d.weights.assign(static_cast<std::size_t>(k) + 1, 0.0);
    d.weights.back() = 1.0;
    return d;
}

int DropCountDist::sample(int available, std::uint64_t seed) const {
    Rng rng(seed);
    if (available <= 1) return 0;
    if (weights.empty()) return static_cast<int>(rng.below(static_cast<std::uint64_t>(available)));
    // Mass beyond the feasible range folds onto the maximal drop.
    std::vector<double> w(static_cast<std::size_t>(available), 0.0);
    for (std::size_t k = 0; k < weights.size(); ++k)
        w[std::min(k, w.size() - 1)] += std::max(0.0, weights[k]);
    double total = 0;
    for (double x : w) total += x;
    if (total <= 0) return 0;
    double u = rng.uniform() * total;
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (u < w[k]) return static_cast<int>(k);
        u -= w[k];
    }
    return available - 1;
}

ModalityCode modality_dropout(const ModalityCode& code, std::uint64_t seed, const DropCountDist& dist) {
    const auto avail = code.available();
    if (avail.empty()) throw std::invalid_argument("modality_dropout: code has no available modality");
    const int k = dist.sample(static_cast<int>(avail.size()), derive_seed(seed, "drop-count"));
    ModalityCode out = code;
    if (k == 0) return out;
    Rng rng(derive_seed(seed, "drop-which"));
    for (auto i : rng.sample_without_replacement(static_cast<i64>(avail.size()), k))
        out.set(avail[static_cast<std::size_t>(i)], false);
    return out;
}

MaskSpec make_mask_spec(const ModalityCode& code, Extent3 volume, Extent3 patch, double mask_ratio,
                        std::uint64_t seed, const DropCountDist& dist) {
    if (mask_ratio < 0 || mask_ratio > 1) throw std::invalid_argument("mask_ratio must be in [0, 1]");
    if (patch.d <= 0 || patch.h <= 0 || patch.w <= 0 || volume.d % patch.d || volume.h % patch.h ||
        volume.w % patch.w)
        throw std::invalid_argument("volume extent is not divisible by the patch size");
    MaskSpec s;
    s.patch = patch;
    s.mask_ratio = mask_ratio;
    s.seed = seed;
    const auto kept = modality_dropout(code, derive_seed(seed, "mask-drop"), dist);
    for (int i = 0; i < code.size(); ++i)
        if (code[i] && !kept[i]) s.dropped_modalities.push_back(i);

    const i64 gd = volume.d / patch.d, gh = volume.h / patch.h, gw = volume.w / patch.w;
    const i64 total = gd * gh * gw;
    const auto n = static_cast<i64>(std::floor(mask_ratio * static_cast<double>(total)));
    Rng rng(derive_seed(seed, "mask-patches"));
    for (auto p : rng.sample_without_replacement(total, n)) s.masked_patches.push_back({p / (gh * gw), (p / gw) % gh, p % gw});
    return s;
}

template <typename T>
void apply_mask_inplace(Tensor<T>& voxels, const MaskSpec& spec) {
    const auto e = voxels.extent();
    const auto& p = spec.patch;
    if (p.d <= 0 || p.h <= 0 || p.w <= 0 || e.d % p.d || e.h % p.h || e.w % p.w)
        throw std::invalid_argument("volume extent " + shape_str(voxels.shape()) + " is not divisible by patch [" +
                                    std::to_string(p.d) + "," + std::to_string(p.h) + "," + std::to_string(p.w) + "]");
    const i64 n = e.voxels();
    for (int m : spec.dropped_modalities) {
        if (m < 0 || m >= voxels.channels()) throw std::out_of_range("dropped modality index out of range");
        std::fill(voxels.channel(m), voxels.channel(m) + n, T{0});
    }
    for (i64 c = 0; c < voxels.channels(); ++c)
        for (const auto& g : spec.masked_patches)
            for (i64 z = g[0] * p.d; z < (g[0] + 1) * p.d; ++z)
                for (i64 y = g[1] * p.h; y < (g[1] + 1) * p.h; ++y) {
                    T* row = &voxels.at(c, z, y, g[2] * p.w);
                    std::fill(row, row + p.w, T{0});
                }
}

MultimodalVolume apply_mask(const MultimodalVolume& v, const MaskSpec& spec) {
    MultimodalVolume out = v;
    apply_mask_inplace(out.voxels, spec);
    return out;
}

ModalityCode mdrop(MultimodalVolume& v, const ModalityCode& code, std::uint64_t seed, const DropCountDist& dist) {
    auto kept = modality_dropout(code, seed, dist);
    v.apply_code(kept);
    return kept;
}

nlohmann::json mask_spec_to_json(const MaskSpec& s) {
    nlohmann::json j;
    j["dropped_modalities"] = s.dropped_modalities;
    j["patch_size"] = {s.patch.d, s.patch.h, s.patch.w};
    j["masked_patches"] = s.masked_patches;
    j["mask_ratio"] = s.mask_ratio;
    j["seed"] = s.seed;
    return j;
}

MaskSpec mask_spec_from_json(const nlohmann::json& j) {
    MaskSpec s;
    s.dropped_modalities = j.at("dropped_modalities").get<std::vector<int>>();
    const auto p = j.at("patch_size").get<std::array<i64, 3>>();
    s.patch = {p[0], p[1], p[2]};
    s.masked_patches = j.at("masked_patches").get<std::vector<std::array<i64, 3>>>();
    s.mask_ratio = j.at("mask_ratio").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

template void apply_mask_inplace<float>(Tensor<float>&, const MaskSpec&);
template void apply_mask_inplace<double>(Tensor<double>&, const MaskSpec&);

}  // namespace mmseg
