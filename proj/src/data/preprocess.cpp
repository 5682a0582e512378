// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/data/preprocess.hpp"

#include "mmseg/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace mmseg::data {

namespace {

using i64 = std::int64_t;

template <typename V>
Tensor<V> crop_flip(const Tensor<V>& src, const PreprocessPlan& p) {
    const auto e = src.extent();
    const i64 c = src.channels();
    Tensor<V> out({c, p.crop.d, p.crop.h, p.crop.w});
    for (i64 ch = 0; ch < c; ++ch)
        for (i64 z = 0; z < p.crop.d; ++z) {
            const i64 sz = p.offset.d + (p.flip[0] ? p.crop.d - 1 - z : z);
            for (i64 y = 0; y < p.crop.h; ++y) {
                const i64 sy = p.offset.h + (p.flip[1] ? p.crop.h - 1 - y : y);
                const V* row = src.data() + ((ch * e.d + sz) * e.h + sy) * e.w + p.offset.w;
                V* dst = &out.at(ch, z, y, 0);
                if (p.flip[2])
                    for (i64 x = 0; x < p.crop.w; ++x) dst[x] = row[p.crop.w - 1 - x];
                else
                    std::copy(row, row + p.crop.w, dst);
            }
        }
    return out;
}

}  // namespace

PreprocessPlan make_plan(Extent3 volume, Extent3 crop, int channels, bool train, std::uint64_t seed,
                         const AugmentConfig& aug) {
    if (crop.d > volume.d || crop.h > volume.h || crop.w > volume.w || crop.d <= 0 || crop.h <= 0 || crop.w <= 0)
        throw std::invalid_argument("crop [" + std::to_string(crop.d) + "," + std::to_string(crop.h) + "," +
                                    std::to_string(crop.w) + "] exceeds volume [" + std::to_string(volume.d) + "," +
                                    std::to_string(volume.h) + "," + std::to_string(volume.w) + "]");
    PreprocessPlan p;
    p.crop = crop;
    p.train = train;
    p.shift.assign(static_cast<std::size_t>(channels), 0.0);
    p.scale.assign(static_cast<std::size_t>(channels), 1.0);
    if (!train) {
        p.offset = {(volume.d - crop.d) / 2, (volume.h - crop.h) / 2, (volume.w - crop.w) / 2};
        return p;
    }
    Rng rng(derive_seed(seed, "preprocess"));
    p.offset = {rng.between(0, volume.d - crop.d), rng.between(0, volume.h - crop.h),
                rng.between(0, volume.w - crop.w)};
    for (int c = 0; c < channels; ++c) {
        p.shift[static_cast<std::size_t>(c)] = rng.uniform(-aug.shift, aug.shift);
        p.scale[static_cast<std::size_t>(c)] = rng.uniform(aug.scale_lo, aug.scale_hi);
    }
    for (auto& f : p.flip) f = rng.bernoulli(aug.flip_p);
    return p;
}

void minmax_scale(Tensor<float>& voxels) {
    const i64 n = voxels.numel() / voxels.channels();
    for (i64 c = 0; c < voxels.channels(); ++c) {
        float* v = voxels.channel(c);
        const auto [lo, hi] = std::minmax_element(v, v + n);
        const float mn = *lo, mx = *hi;
        if (mx == mn) {
            std::fill(v, v + n, 0.0f);
            continue;
        }
        const float inv = 1.0f / (mx - mn);
        for (i64 i = 0; i < n; ++i) v[i] = (v[i] - mn) * inv;
    }
}

MultimodalVolume apply_plan(const MultimodalVolume& v, const PreprocessPlan& plan) {
    MultimodalVolume out;
    out.spacing = v.spacing;
    out.subject_id = v.subject_id;
    out.voxels = crop_flip(v.voxels, plan);

    const i64 n = plan.crop.voxels();
    for (int c = 0; c < v.modalities(); ++c) {
        if (v.channel_is_zero(c)) continue;
        float* ch = out.voxels.channel(c);
        const auto [lo, hi] = std::minmax_element(ch, ch + n);
        const float mn = *lo, mx = *hi;
        if (mx == mn) {
            std::fill(ch, ch + n, 0.0f);
            continue;
        }
        const float inv = 1.0f / (mx - mn);
        for (i64 i = 0; i < n; ++i) ch[i] = (ch[i] - mn) * inv;
        if (!plan.train) continue;
        // Intensity augmentation on foreground only, so background stays 0.
        const auto s = static_cast<float>(plan.scale[static_cast<std::size_t>(c)]);
        const auto t = static_cast<float>(plan.shift[static_cast<std::size_t>(c)]);
        for (i64 i = 0; i < n; ++i)
            if (ch[i] != 0.0f) ch[i] = std::clamp(ch[i] * s + t, 0.0f, 1.0f);
    }
    return out;
}

RegionMasks apply_plan(const RegionMasks& y, const PreprocessPlan& plan) {
    RegionMasks out;
    out.regions = crop_flip(y.regions, plan);
    if (y.labels) out.labels = crop_flip(*y.labels, plan);
    return out;
}

MultimodalVolume preprocess(const MultimodalVolume& v, Extent3 crop, bool train, std::uint64_t seed,
                            const AugmentConfig& aug) {
    return apply_plan(v, make_plan(v.extent(), crop, v.modalities(), train, seed, aug));
}

Preprocessed preprocess(const MultimodalVolume& v, const RegionMasks& y, Extent3 crop, bool train,
                        std::uint64_t seed, const AugmentConfig& aug) {
    if (y.extent() != v.extent()) throw std::invalid_argument("preprocess: mask extent differs from volume");
    const auto plan = make_plan(v.extent(), crop, v.modalities(), train, seed, aug);
    return {apply_plan(v, plan), apply_plan(y, plan)};
}

}  // namespace mmseg::data
