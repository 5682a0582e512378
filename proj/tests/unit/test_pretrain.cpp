// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "../common/oracles.hpp"

#include "mmseg/data/phantom.hpp"
#include "mmseg/nn/losses.hpp"
#include "mmseg/train/pretrain.hpp"

#include <fstream>
#include <set>

using namespace mmseg;

namespace {

std::vector<train::Sample> samples(int n, double fm, std::uint64_t seed) {
    std::vector<train::Subject> subj;
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
        auto p = data::generate_phantom(derive_seed(seed, static_cast<std::uint64_t>(i)), {16, 16, 16}, 4);
        p.volume.subject_id = "p" + std::to_string(i);
        ids.push_back(p.volume.subject_id);
        subj.push_back({std::move(p.volume), std::move(p.masks)});
    }
    return train::make_samples(subj, data::build_split(ids, fm, seed, 4));
}

train::PretrainConfig small_cfg() {
    train::PretrainConfig c;
    c.crop = {16, 16, 16};
    c.epochs_a = c.epochs_b = c.epochs_c = 2;
    return c;
}

}  // namespace

TEST_CASE("samples: split codes applied, missing channels zero") {
    const auto s = samples(8, 0.25, 1);
    int full = 0;
    for (const auto& x : s) {
        full += x.code.full();
        CHECK(x.volume.observed_code() == x.code);
    }
    CHECK(full == 2);
    const auto p = train::prepare(s.back(), {16, 16, 16}, true, 3);
    for (int c = 0; c < 4; ++c)
        if (!s.back().code[c]) CHECK(std::all_of(p.x.channel(c), p.x.channel(c) + 4096, [](float v) { return v == 0; }));
    CHECK(p.targets.shape() == Shape{3, 16, 16, 16});
}

TEST_CASE("epoch order is a seeded permutation") {
    const auto a = train::epoch_order(10, 5, 0), b = train::epoch_order(10, 5, 0), c = train::epoch_order(10, 5, 1);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 10);
}

TEST_CASE("non-finite losses abort with context") {
    CHECK_NOTHROW(train::check_finite(1.0, "a", 0, "s"));
    try {
        train::check_finite(std::nan(""), "stage c", 3, "sub-7");
        FAIL("expected a throw");
    } catch (const std::runtime_error& e) {
        const std::string m = e.what();
        CHECK(m.find("stage c") != std::string::npos);
        CHECK(m.find("epoch 3") != std::string::npos);
        CHECK(m.find("sub-7") != std::string::npos);
    }
}

TEST_CASE("da_loss: composition, lambda zero, frozen guidance") {
    Rng rng(2);
    const auto b = nn::BackboneConfig::micro();
    nn::ReconstructionNet<double> theta(b, 1);
    nn::SegmentationNet<double> f(b, 2);
    f.set_trainable(false);
    const auto code = ModalityCode::parse("1110");
    auto x = oracle::random_tensor({4, 8, 8, 8}, rng, 0, 1);
    std::fill(x.channel(3), x.channel(3) + 512, 0.0);
    const auto y = oracle::random_binary({3, 8, 8, 8}, rng);
    const auto spec = make_mask_spec(code, {8, 8, 8}, {4, 4, 4}, 0.5, 3);
    const auto l0 = train::da_loss(theta, f, x, code, y, spec, 0.0, false);
    CHECK(l0.total == l0.rec);
    const auto l = train::da_loss(theta, f, x, code, y, spec, 0.1, true);
    CHECK(l.total == doctest::Approx(l.rec + 0.1 * l.seg).epsilon(1e-12));
    CHECK_FALSE(f.any_grad_nonzero());
    CHECK(theta.any_grad_nonzero());
    CHECK_THROWS_AS(train::da_loss(theta, f, x, code, y, spec, -1.0, false), std::invalid_argument);
    f.set_trainable(true);
    CHECK_THROWS_AS(train::da_loss(theta, f, x, code, y, spec, 0.1, true), std::logic_error);
}

TEST_CASE("stages A, B, C: losses recorded, f frozen, CSV written") {
    const auto data = samples(4, 0.25, 7);
    const auto cfg = small_cfg();
    const auto dir = std::filesystem::temp_directory_path() / "mmseg-unit-pretrain";
    std::filesystem::remove_all(dir);
    std::vector<train::EpochLoss> ca, cb, cc;
    train::StageHooks hooks;
    hooks.loss_csv = dir / "a.csv";
    auto theta0 = train::train_mae_stage_a(data, nn::BackboneConfig::toy(), cfg, 1, &ca, hooks);
    CHECK(ca.size() == 2);
    CHECK(ca.back().rec < ca.front().rec);
    auto f = train::train_guidance_model(data, theta0, cfg, 2, &cb);
    CHECK(cb.size() == 2);
    CHECK_FALSE(f.parameters().front()->trainable);
    const auto fsum = f.checksum();
    auto theta = train::train_mae_stage_c(data, theta0, f, cfg, 3, &cc);
    CHECK(f.checksum() == fsum);
    CHECK(cc.size() == 2);
    CHECK(cc.back().seg > 0);
    CHECK(theta.checksum() != theta0.checksum());
    std::ifstream is(dir / "a.csv");
    std::string header;
    std::getline(is, header);
    CHECK(header == "stage,epoch,rec,seg,total");
    CHECK_THROWS(train::train_mae_stage_a({}, nn::BackboneConfig::toy(), cfg, 1));
}

TEST_CASE("stage A is reproducible from its seed") {
    const auto data = samples(3, 0.5, 9);
    auto cfg = small_cfg();
    cfg.epochs_a = 1;
    auto a = train::train_mae_stage_a(data, nn::BackboneConfig::micro(), cfg, 4);
    auto b = train::train_mae_stage_a(data, nn::BackboneConfig::micro(), cfg, 4);
    CHECK(a.checksum() == b.checksum());
}
