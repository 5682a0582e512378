// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "../common/oracles.hpp"

#include "mmseg/data/phantom.hpp"
#include "mmseg/train/codistill.hpp"

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

hyper::HyperConfig binary() {
    hyper::HyperConfig h;
    h.indicator = hyper::Indicator::Binary;
    h.text_dim = 4;
    h.hidden = 16;
    return h;
}

}  // namespace

TEST_CASE("ablation presets and gradient-path rule") {
    const auto b = train::ablation_preset("tab4-b");
    CHECK_FALSE(b.mae_fill);
    CHECK_FALSE(b.data_refine);
    CHECK(b.hyper_teacher);
    const auto d = train::ablation_preset("tab4-d");
    CHECK(d.mae_fill);
    CHECK(d.data_refine);
    CHECK_FALSE(d.hyper_teacher);
    CHECK_THROWS(train::ablation_preset("tab4-a"));
    train::DistillConfig c;
    CHECK(train::recoverer_has_gradient_path(c));
    c.alpha = 0;
    CHECK(train::recoverer_has_gradient_path(c));
    c.kd_through_recoverer = false;
    CHECK_FALSE(train::recoverer_has_gradient_path(c));
    c.alpha = 1;
    c.mae_fill = false;
    CHECK_FALSE(train::recoverer_has_gradient_path(c));
}

TEST_CASE("recover_full keeps observed channels and fills the rest") {
    Rng rng(1);
    nn::ReconstructionNet<double> g(nn::BackboneConfig::micro(), 2);
    const auto x = oracle::random_tensor({4, 8, 8, 8}, rng, 0, 1);
    const auto code = ModalityCode::parse("0101");
    const auto r = train::recover_full(g, x, code);
    for (int c = 0; c < 4; ++c) {
        const auto& src = code[c] ? x : r.xhat;
        CHECK(std::equal(src.channel(c), src.channel(c) + 512, r.filled.channel(c)));
    }
}

TEST_CASE("distill losses: full code skips the fill; frozen teacher gets no gradient") {
    Rng rng(3);
    const auto b = nn::BackboneConfig::micro();
    hyper::HyperSegModel<double> s(b, binary(), 1), t(b, binary(), 2);
    t.set_trainable(false);
    nn::ReconstructionNet<double> g(b, 3);
    const auto x = oracle::random_tensor({4, 8, 8, 8}, rng, 0, 1);
    const auto y = oracle::random_binary({3, 8, 8, 8}, rng);
    train::DistillConfig cfg;
    const auto full = ModalityCode::all(4);
    train::DistillInputs<double> in{&x, full, ModalityCode::parse("1100"), &y, nullptr, nullptr};
    s.zero_grad();
    g.zero_grad();
    const auto l = train::distill_losses(s, g, t, in, cfg, true);
    CHECK(l.total == doctest::Approx(l.task + l.data + 0.1 * l.kd));
    CHECK_FALSE(g.any_grad_nonzero());
    CHECK_FALSE(t.any_grad_nonzero());
    CHECK(s.any_grad_nonzero());

    t.set_trainable(true);
    auto xm = x;
    std::fill(xm.channel(0), xm.channel(0) + 512, 0.0);
    train::DistillInputs<double> in2{&xm, ModalityCode::parse("0111"), ModalityCode::parse("0011"), &y, nullptr,
                                     nullptr};
    CHECK_THROWS_AS(train::distill_losses(s, g, t, in2, cfg, true), std::logic_error);
    cfg.alpha = -1;
    CHECK_THROWS_AS(train::distill_losses(s, g, t, in2, cfg, false), std::invalid_argument);
}

TEST_CASE("kd layer selection and margin") {
    Rng rng(4);
    const auto b = nn::BackboneConfig::micro();
    hyper::HyperSegModel<double> s(b, binary(), 1), t(b, binary(), 2);
    t.set_trainable(false);
    nn::ReconstructionNet<double> g(b, 3);
    const auto x = oracle::random_tensor({4, 8, 8, 8}, rng, 0, 1);
    const auto y = oracle::random_binary({3, 8, 8, 8}, rng);
    train::DistillConfig cfg;
    train::DistillInputs<double> in{&x, ModalityCode::all(4), ModalityCode::all(4), &y, nullptr, nullptr};
    const double all = train::distill_losses(s, g, t, in, cfg, false).kd;
    cfg.kd_layers = {0};
    const double first = train::distill_losses(s, g, t, in, cfg, false).kd;
    cfg.kd_layers = {1};
    const double second = train::distill_losses(s, g, t, in, cfg, false).kd;
    CHECK(all == doctest::Approx(first + second));
    cfg.kd_layers = {};
    cfg.kd_margin = 1e6;
    CHECK(train::distill_losses(s, g, t, in, cfg, false).kd == 0.0);
    cfg.kd_margin = 0;
    cfg.kd_layers = {5};
    CHECK_THROWS(train::distill_losses(s, g, t, in, cfg, false));
}

TEST_CASE("distillation run: teacher frozen, student and recoverer trained, recoverer idle without a path") {
    const auto data = samples(5, 0.2, 11);
    const auto b = nn::BackboneConfig::toy();
    nn::ReconstructionNet<float> theta(b, 1);
    auto h = binary();
    hyper::HyperSegModel<float> teacher(b, h, 2);
    teacher.set_trainable(false);
    const auto t0 = teacher.checksum();
    const hyper::PromptBank bank;
    train::DistillConfig cfg;
    cfg.crop = {16, 16, 16};
    cfg.epochs = 2;
    cfg.val_every = 1;
    train::DistillHooks hooks;
    hooks.validation = &data;
    hooks.val_opt.crop = cfg.crop;
    hooks.val_opt.with_hd95 = false;
    auto st = train::run_distill(data, theta, teacher, h, bank, cfg, 5, hooks);
    CHECK(st.step == 10);
    CHECK(teacher.checksum() == t0);

    cfg.mae_fill = false;
    auto st2 = train::make_state(theta, teacher, h, cfg, 6, 5);
    const auto g0 = st2.recoverer->checksum();
    for (int i = 0; i < 5; ++i) train::distill_step(st2, data[static_cast<std::size_t>(i)], bank, cfg, 100 + i);
    CHECK(st2.recoverer->checksum() == g0);
}

TEST_CASE("teacher built from the guidance model is a frozen copy without hyper-network") {
    nn::SegmentationNet<float> f(nn::BackboneConfig::micro(), 3);
    auto t = train::teacher_from_guidance(f, binary());
    CHECK_FALSE(t.has_hyper());
    CHECK(t.checksum() == f.checksum());
    CHECK_FALSE(t.parameters().front()->trainable);
}
