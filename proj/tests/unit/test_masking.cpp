// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "mmseg/masking.hpp"
#include "mmseg/rng.hpp"

#include <nlohmann/json.hpp>

#include <set>

using namespace mmseg;

TEST_CASE("mask spec: patch count, distinct patches, dropped subset of available") {
    const auto code = ModalityCode::parse("1011");
    const auto s = make_mask_spec(code, {16, 16, 16}, {4, 4, 4}, 0.5, 42);
    CHECK(s.masked_patches.size() == 32);
    std::set<std::array<std::int64_t, 3>> uniq(s.masked_patches.begin(), s.masked_patches.end());
    CHECK(uniq.size() == s.masked_patches.size());
    for (int m : s.dropped_modalities) CHECK(code[m]);
    CHECK(static_cast<int>(s.dropped_modalities.size()) < code.available_count());
    CHECK(make_mask_spec(code, {16, 16, 16}, {4, 4, 4}, 0.3, 1).masked_patches.size() == 19);  // floor(0.3 * 64)
}

TEST_CASE("mask spec: deterministic and JSON round trip") {
    const auto code = ModalityCode::all(4);
    const auto a = make_mask_spec(code, {8, 8, 8}, {2, 2, 2}, 0.25, 7);
    const auto b = make_mask_spec(code, {8, 8, 8}, {2, 2, 2}, 0.25, 7);
    CHECK(a.masked_patches == b.masked_patches);
    CHECK(a.dropped_modalities == b.dropped_modalities);
    const auto c = mask_spec_from_json(mask_spec_to_json(a));
    CHECK(c.masked_patches == a.masked_patches);
    CHECK(c.dropped_modalities == a.dropped_modalities);
    CHECK(c.patch == a.patch);
    CHECK(c.seed == a.seed);
}

TEST_CASE("apply_mask: exact zero count") {
    Rng rng(3);
    Tensor<float> v({4, 8, 8, 8});
    for (auto& x : v.storage()) x = static_cast<float>(rng.uniform(0.5, 1.0));
    MaskSpec s;
    s.patch = {2, 4, 8};
    s.dropped_modalities = {1};
    s.masked_patches = {{0, 0, 0}, {3, 1, 0}};
    apply_mask_inplace(v, s);
    std::int64_t zeros = 0;
    for (auto x : v.storage()) zeros += x == 0.0f;
    CHECK(zeros == 512 + 3 * 2 * 64);
}

TEST_CASE("apply_mask: indivisible volume and bad ratio are errors") {
    Tensor<float> v({4, 6, 8, 8});
    MaskSpec s;
    s.patch = {4, 4, 4};
    CHECK_THROWS(apply_mask_inplace(v, s));
    CHECK_THROWS(make_mask_spec(ModalityCode::all(4), {6, 8, 8}, {4, 4, 4}, 0.5, 0));
    CHECK_THROWS(make_mask_spec(ModalityCode::all(4), {8, 8, 8}, {4, 4, 4}, 1.5, 0));
}

TEST_CASE("modality dropout: keeps at least one, uniform k, never revives") {
    const auto code = ModalityCode::parse("0111");
    std::array<int, 3> hist{};
    for (std::uint64_t s = 0; s < 6000; ++s) {
        const auto k = modality_dropout(code, s);
        CHECK(k.available_count() >= 1);
        CHECK_FALSE(k[0]);
        ++hist[static_cast<std::size_t>(3 - k.available_count())];
    }
    for (int h : hist) CHECK(std::abs(h / 6000.0 - 1.0 / 3) < 0.03);
    CHECK(modality_dropout(ModalityCode::parse("0100"), 5) == ModalityCode::parse("0100"));
    CHECK_THROWS(modality_dropout(ModalityCode::parse("0000"), 1));
}

TEST_CASE("drop count: fixed and folded weights") {
    CHECK(DropCountDist::fixed(2).sample(4, 1) == 2);
    CHECK(DropCountDist::fixed(3).sample(2, 1) == 1);  // folds onto available - 1
    DropCountDist d;
    d.weights = {0, 0, 0, 0, 1};
    for (std::uint64_t s = 0; s < 20; ++s) CHECK(d.sample(3, s) == 2);
}

TEST_CASE("mdrop zeroes exactly the dropped channels") {
    MultimodalVolume v;
    v.voxels = Tensor<float>({4, 2, 2, 2}, 1.0f);
    const auto kept = mdrop(v, ModalityCode::all(4), 11, DropCountDist::fixed(2));
    CHECK(kept.available_count() == 2);
    for (int c = 0; c < 4; ++c) CHECK(v.channel_is_zero(c) == !kept[c]);
    CHECK(v.observed_code() == kept);
}
