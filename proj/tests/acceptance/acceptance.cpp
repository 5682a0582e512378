// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include "../common/gradcheck.hpp"
#include "../common/oracles.hpp"

#include "mmseg/data/phantom.hpp"
#include "mmseg/eval/metrics.hpp"
#include "mmseg/hypernet/prompt.hpp"
#include "mmseg/masking.hpp"
#include "mmseg/nn/losses.hpp"
#include "mmseg/pipeline/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

using namespace mmseg;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
    bool ok = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

ModalityCode random_code(Rng& rng, int m) {
    for (;;) {
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(m));
        for (auto& b : bits) b = rng.bernoulli(0.5);
        ModalityCode c(bits);
        if (c.available_count() > 0) return c;
    }
}

// Independent masking: zero the dropped channels and every voxel of the
// masked patches.
Tensor<double> oracle_mask(const Tensor<double>& x, const MaskSpec& s) {
    auto out = x;
    const auto e = x.extent();
    for (int c = 0; c < x.channels(); ++c)
        for (int z = 0; z < e.d; ++z)
            for (int y = 0; y < e.h; ++y)
                for (int w = 0; w < e.w; ++w) {
                    bool hit = std::find(s.dropped_modalities.begin(), s.dropped_modalities.end(), c) !=
                               s.dropped_modalities.end();
                    for (const auto& p : s.masked_patches)
                        hit = hit || (z / s.patch.d == p[0] && y / s.patch.h == p[1] && w / s.patch.w == p[2]);
                    if (hit) out.at(c, z, y, w) = 0;
                }
    return out;
}

hyper::HyperConfig binary_hyper() {
    hyper::HyperConfig h;
    h.indicator = hyper::Indicator::Binary;
    h.text_dim = 4;
    h.hidden = 16;
    return h;
}

// Give the zero-initialised output layer of the hyper-network small random
// weights so gradients reach every hyper parameter.
template <typename T>
void perturb_hyper(hyper::HyperSegModel<T>& m, std::uint64_t seed) {
    Rng rng(seed);
    for (auto* p : m.parameters())
        if (p->name.rfind("hyper.fc3", 0) == 0)
            for (auto& v : p->value.storage()) v = static_cast<T>(rng.uniform(-0.05, 0.05));
}

// ---------------------------------------------------------------------------
Outcome criterion1() {
    Rng rng(101);
    double worst = 0;
    auto track = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
    const auto b = nn::BackboneConfig::micro();

    for (int i = 0; i < 100; ++i) {
        const auto code = random_code(rng, 4);
        const auto x = oracle::random_tensor({4, 4, 4, 4}, rng), xh = oracle::random_tensor({4, 4, 4, 4}, rng);
        track(nn::rec_loss(xh, x, code).value, oracle::rec(xh, x, code));
    }
    for (double margin : {0.0, 0.5})
        for (int i = 0; i < 100; ++i) {
            const int layers = 1 + static_cast<int>(rng.below(3));
            std::vector<Tensor<double>> ft, fs;
            for (int l = 0; l < layers; ++l) {
                ft.push_back(oracle::random_tensor({2 + l, 4, 4, 4}, rng));
                fs.push_back(oracle::random_tensor({2 + l, 4, 4, 4}, rng));
            }
            std::vector<int> all(static_cast<std::size_t>(layers));
            std::iota(all.begin(), all.end(), 0);
            track(nn::kd_loss(ft, fs, margin, all).value, oracle::kd(ft, fs, margin));
        }
    for (int i = 0; i < 100; ++i) {
        const auto z = oracle::random_tensor({3, 4, 4, 4}, rng, -3, 3);
        const auto g = oracle::random_binary({3, 4, 4, 4}, rng, rng.uniform(0, 0.6));
        track(nn::dice_loss(z, g).value, oracle::dice(z, g));
    }

    nn::ReconstructionNet<double> theta(b, 11);
    nn::SegmentationNet<double> f(b, 12);
    f.set_trainable(false);
    for (int i = 0; i < 100; ++i) {
        const auto code = random_code(rng, 4);
        auto x = oracle::random_tensor({4, 4, 4, 4}, rng, 0, 1);
        for (int c = 0; c < 4; ++c)
            if (!code[c]) std::fill(x.channel(c), x.channel(c) + 64, 0.0);
        const auto y = oracle::random_binary({3, 4, 4, 4}, rng);
        const auto spec = make_mask_spec(code, {4, 4, 4}, {2, 2, 2}, rng.uniform(0, 1), rng.next());
        const auto got = train::da_loss(theta, f, x, code, y, spec, 0.1, false);
        const auto xh = theta.forward(oracle_mask(x, spec));
        const auto logits = f.forward(xh).logits;
        track(got.total, oracle::rec(xh, x, code) + 0.1 * oracle::bce(logits, y));
    }

    const auto h = binary_hyper();
    hyper::HyperSegModel<double> student(b, h, 21), teacher(b, h, 22);
    perturb_hyper(student, 23);
    perturb_hyper(teacher, 24);
    nn::ReconstructionNet<double> g(b, 25);
    teacher.set_trainable(false);
    train::DistillConfig cfg;  // alpha 1, beta 0.1
    for (int i = 0; i < 100; ++i) {
        const auto code = random_code(rng, 4);
        auto kept = code;
        const auto avail = code.available();
        if (avail.size() > 1 && rng.bernoulli(0.5)) kept.set(avail[rng.below(avail.size())], false);
        auto x = oracle::random_tensor({4, 4, 4, 4}, rng, 0, 1);
        for (int c = 0; c < 4; ++c)
            if (!code[c]) std::fill(x.channel(c), x.channel(c) + 64, 0.0);
        const auto y = oracle::random_binary({3, 4, 4, 4}, rng);
        cfg.kd_margin = i % 2 ? 0.5 : 0.0;
        train::DistillInputs<double> in{&x, code, kept, &y, nullptr, nullptr};
        const auto got = train::distill_losses(student, g, teacher, in, cfg, false);

        auto xs = x;
        for (int c = 0; c < 4; ++c)
            if (!kept[c]) std::fill(xs.channel(c), xs.channel(c) + 64, 0.0);
        const auto so = student.forward(xs, kept, nullptr);
        auto xf = x;
        if (!code.full()) {
            const auto xh = g.forward(x);
            for (int c = 0; c < 4; ++c)
                if (!code[c]) std::copy(xh.channel(c), xh.channel(c) + 64, xf.channel(c));
        }
        const auto to = teacher.forward(xf, ModalityCode::all(4), nullptr);
        const double task = oracle::dice(so.logits, y), data = oracle::dice(to.logits, y);
        const double kd = oracle::kd(to.taps, so.taps, cfg.kd_margin);
        track(got.task, task);
        track(got.data, data);
        track(got.kd, kd);
        track(got.total, task + 1.0 * data + 0.1 * kd);
    }
    return {worst <= 1e-6, "max |impl - oracle| = " + fmt("%.3g", worst) + " over 700 cases"};
}

// ---------------------------------------------------------------------------
Outcome criterion2() {
    Rng rng(202);
    const auto b = nn::BackboneConfig::micro();
    double worst = 0;
    int checked = 0;
    std::string where;
    auto note = [&](const oracle::GradCheck& r, const char* what) {
        checked += r.checked;
        if (r.max_rel > worst) {
            worst = r.max_rel;
            where = std::string(what) + " " + r.worst;
        }
    };

    {
        nn::ReconstructionNet<double> theta(b, 31);
        nn::SegmentationNet<double> f(b, 32);
        f.set_trainable(false);
        const ModalityCode code = ModalityCode::parse("1101");
        auto x = oracle::random_tensor({4, 8, 8, 8}, rng, 0, 1);
        std::fill(x.channel(2), x.channel(2) + 512, 0.0);
        const auto y = oracle::random_binary({3, 8, 8, 8}, rng);
        const auto spec = make_mask_spec(code, {8, 8, 8}, {2, 2, 2}, 0.5, 33);
        theta.zero_grad();
        train::da_loss(theta, f, x, code, y, spec, 0.1, true);
        note(oracle::check_params(
                 theta.parameters(), [&] { return train::da_loss(theta, f, x, code, y, spec, 0.1, false).total; },
                 rng, 6),
             "da_loss");
    }
    {
        const auto h = binary_hyper();
        hyper::HyperSegModel<double> student(b, h, 41), teacher(b, h, 42);
        perturb_hyper(student, 43);
        perturb_hyper(teacher, 44);
        teacher.set_trainable(false);
        nn::ReconstructionNet<double> g(b, 45);
        train::DistillConfig cfg;
        const ModalityCode code = ModalityCode::parse("1010"), kept = ModalityCode::parse("0010");
        auto x = oracle::random_tensor({4, 8, 8, 8}, rng, 0, 1);
        for (int c : {1, 3}) std::fill(x.channel(c), x.channel(c) + 512, 0.0);
        const auto y = oracle::random_binary({3, 8, 8, 8}, rng);
        train::DistillInputs<double> in{&x, code, kept, &y, nullptr, nullptr};
        student.zero_grad();
        g.zero_grad();
        train::distill_losses(student, g, teacher, in, cfg, true);
        auto total = [&] { return train::distill_losses(student, g, teacher, in, cfg, false).total; };
        note(oracle::check_params(student.parameters(), total, rng, 4), "total_loss/theta_seg");
        note(oracle::check_params(g.parameters(), total, rng, 4), "total_loss/theta_g");
    }
    return {worst < 1e-3, "max rel err " + fmt("%.3g", worst) + " over " + std::to_string(checked) +
                              " coordinates" + (worst >= 1e-3 ? " (" + where + ")" : "")};
}

// ---------------------------------------------------------------------------
std::vector<train::Sample> phantom_samples(int n, Extent3 shape, double fm_ratio, std::uint64_t seed) {
    std::vector<train::Subject> subjects;
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
        auto p = data::generate_phantom(derive_seed(seed, static_cast<std::uint64_t>(i)), shape, 4);
        p.volume.subject_id = "s" + std::to_string(i);
        ids.push_back(p.volume.subject_id);
        subjects.push_back({std::move(p.volume), std::move(p.masks)});
    }
    return train::make_samples(subjects, data::build_split(ids, fm_ratio, seed, 4));
}

Outcome criterion3() {
    const Extent3 shape{16, 16, 16};
    const auto samples = phantom_samples(6, shape, 0.2, 303);
    const auto b = nn::BackboneConfig::toy();
    nn::ReconstructionNet<float> theta(b, 1);
    nn::SegmentationNet<float> f(b, 2);
    f.set_trainable(false);
    const auto f0 = f.checksum();

    train::PretrainConfig pc;
    pc.crop = shape;
    pc.epochs_c = 1;
    auto theta_c = train::train_mae_stage_c(samples, theta, f, pc, 304);

    auto h = binary_hyper();
    h.hidden = 32;
    hyper::HyperSegModel<float> teacher(b, h, 3);
    teacher.set_trainable(false);
    const auto t0 = teacher.checksum();
    const hyper::PromptBank bank;

    auto run = [&](const train::DistillConfig& cfg, std::uint64_t& s0, std::uint64_t& s1, std::uint64_t& g0,
                   std::uint64_t& g1) {
        auto st = train::make_state(theta_c, teacher, h, cfg, 305, 20);
        s0 = st.student->checksum();
        g0 = st.recoverer->checksum();
        for (int i = 0; i < 20; ++i)
            train::distill_step(st, samples[static_cast<std::size_t>(i) % samples.size()], bank, cfg,
                                derive_seed(306, static_cast<std::uint64_t>(i)));
        s1 = st.student->checksum();
        g1 = st.recoverer->checksum();
    };
    train::DistillConfig cfg;
    cfg.crop = shape;
    std::uint64_t s0, s1, g0, g1;
    run(cfg, s0, s1, g0, g1);
    const bool frozen = teacher.checksum() == t0 && f.checksum() == f0;
    const bool moved = s0 != s1 && g0 != g1;

    cfg.alpha = 0;
    cfg.beta = 0;
    std::uint64_t z0, z1, r0, r1;
    run(cfg, z0, z1, r0, r1);
    const bool g_still = r0 == r1 && teacher.checksum() == t0;

    std::string d = std::string("teacher/f constant: ") + (frozen ? "yes" : "NO") +
                    ", theta_seg/theta_g changed: " + (moved ? "yes" : "NO") +
                    ", theta_g constant at alpha=beta=0: " + (g_still ? "yes" : "NO");
    return {frozen && moved && g_still, d};
}

// ---------------------------------------------------------------------------
Outcome criterion4() {
    Rng rng(404);
    int exact = 0;
    const std::vector<Extent3> patches{{2, 2, 2}, {4, 4, 4}, {1, 2, 4}, {8, 4, 2}};
    for (int i = 0; i < 100; ++i) {
        const Extent3 vol{8, 16, 8};
        const auto patch = patches[rng.below(patches.size())];
        const auto code = random_code(rng, 4);
        Tensor<float> v({4, vol.d, vol.h, vol.w});
        for (int c = 0; c < 4; ++c)
            for (std::int64_t j = 0; j < vol.voxels(); ++j)
                v.channel(c)[j] = code[c] ? static_cast<float>(rng.uniform(0.1, 1.0)) : 0.0f;
        const auto spec = make_mask_spec(code, vol, patch, rng.uniform(0, 1), rng.next());
        apply_mask_inplace(v, spec);
        std::int64_t zeros = 0;
        for (auto x : v.storage()) zeros += x == 0.0f;
        std::int64_t expected = 0;
        for (int c = 0; c < 4; ++c) {
            const bool dropped = std::find(spec.dropped_modalities.begin(), spec.dropped_modalities.end(), c) !=
                                 spec.dropped_modalities.end();
            if (!code[c] || dropped)
                expected += vol.voxels();
            else
                expected += static_cast<std::int64_t>(spec.masked_patches.size()) * patch.voxels();
        }
        exact += zeros == expected;
    }
    double dev = 0;
    for (const char* s : {"1111", "1110"}) {
        const auto code = ModalityCode::parse(s);
        const int avail = code.available_count();
        std::vector<int> hist(static_cast<std::size_t>(avail), 0);
        for (std::uint64_t k = 0; k < 10000; ++k)
            ++hist[static_cast<std::size_t>(avail - modality_dropout(code, derive_seed(405, k)).available_count())];
        for (int h : hist) dev = std::max(dev, std::abs(h / 10000.0 - 1.0 / avail));
    }
    return {exact == 100 && dev <= 0.02, std::to_string(exact) + "/100 exact zero counts, max k-frequency deviation " +
                                             fmt("%.4f", dev)};
}

// ---------------------------------------------------------------------------
Outcome criterion5() {
    std::set<std::string> prompts;
    bool prefix = true;
    for (const auto& c : sweep_codes(4)) {
        const auto p = hyper::build_prompt(c);
        prefix = prefix && p.rfind("The input MRI modalities are", 0) == 0;
        prompts.insert(p);
    }
    const auto p1001 = hyper::build_prompt(ModalityCode::parse("1001"));
    const bool ft = p1001 == "The input MRI modalities are FLAIR and T2";

    const auto b = nn::BackboneConfig::toy();
    hyper::HyperConfig h;  // clip indicator, residual mode, zero-initialised output layer
    hyper::HyperSegModel<float> m(b, h, 505);
    hyper::StubEmbedder emb(h.text_dim, 7);
    const auto code = ModalityCode::parse("1011");
    const auto text = emb.embed(hyper::build_prompt(code));
    Rng rng(506);
    Tensor<float> x({4, 16, 16, 16});
    for (auto& v : x.storage()) v = static_cast<float>(rng.uniform());
    const auto with_hyper = m.forward(x, code, &text).logits;
    const auto plain = m.net().forward(x, nullptr).logits;
    const bool bitwise = with_hyper.shape() == plain.shape() &&
                         std::memcmp(with_hyper.data(), plain.data(), sizeof(float) * plain.numel()) == 0;

    return {prompts.size() == 15 && prefix && ft && bitwise,
            std::to_string(prompts.size()) + " distinct prompts, prefix " + (prefix ? "ok" : "BAD") + ", [1,0,0,1] -> '" +
                p1001 + "', zero-offset head " + (bitwise ? "bitwise equal" : "DIFFERS")};
}

// ---------------------------------------------------------------------------
Outcome criterion6() {
    Rng rng(606);
    const Extent3 e{8, 8, 8};
    double worst = 0;
    for (int i = 0; i < 50; ++i) {
        const auto p = oracle::random_mask(e.voxels(), rng, rng.uniform(0.05, 0.5));
        const auto g = oracle::random_mask(e.voxels(), rng, rng.uniform(0.05, 0.5));
        const std::array<double, 3> sp = i % 2 ? std::array<double, 3>{1, 1, 1}
                                               : std::array<double, 3>{rng.uniform(0.5, 2), rng.uniform(0.5, 2),
                                                                       rng.uniform(0.5, 2)};
        worst = std::max(worst, std::abs(eval::dsc(p.data(), g.data(), e.voxels()) - oracle::dsc(p, g)));
        worst = std::max(worst, std::abs(eval::hd95(p.data(), g.data(), e, sp) - oracle::hd95(p, g, e, sp)));
    }
    const std::array<double, 3> iso{1, 1, 1};
    std::vector<std::uint8_t> a(512, 0), b(512, 0);
    for (int z = 2; z < 6; ++z)
        for (int y = 2; y < 6; ++y)
            for (int x = 2; x < 6; ++x) a[static_cast<std::size_t>((z * 8 + y) * 8 + x)] = 1;
    const bool identical = eval::dsc(a.data(), a.data(), 512) == 1.0 && eval::hd95(a.data(), a.data(), e, iso) == 0.0;
    for (int z = 0; z < 2; ++z) b[static_cast<std::size_t>(z * 64)] = 1;
    const bool disjoint = eval::dsc(a.data(), b.data(), 512) == 0.0;
    std::vector<std::uint8_t> p1(512, 0), p2(512, 0);
    p1[(1 * 8 + 1) * 8 + 1] = 1;
    p2[(1 * 8 + 1) * 8 + 5] = 1;
    const bool two_point = eval::hd95(p1.data(), p2.data(), e, iso) == 4.0 && eval::dsc(p1.data(), p2.data(), 512) == 0.0;
    return {worst <= 1e-6 && identical && disjoint && two_point,
            "max |impl - oracle| = " + fmt("%.3g", worst) + " over 50 pairs; identical " + (identical ? "ok" : "FAIL") +
                ", disjoint " + (disjoint ? "ok" : "FAIL") + ", two-point " + (two_point ? "ok" : "FAIL")};
}

// ---------------------------------------------------------------------------
json read_json(const fs::path& p) {
    std::ifstream is(p);
    return json::parse(is);
}

Outcome criterion8(const fs::path& work) {
    const std::vector<std::string> names{"tab4-b", "tab4-c", "tab4-d", "tab4-e"};
    // Expected (mae_fill, alpha, hyper teacher)
    const std::map<std::string, std::tuple<bool, double, bool>> matrix{{"tab4-b", {false, 0.0, true}},
                                                                       {"tab4-c", {true, 0.0, true}},
                                                                       {"tab4-d", {true, 1.0, false}},
                                                                       {"tab4-e", {true, 1.0, true}}};
    const std::set<std::string> axes{"distill.mae_fill", "distill.alpha", "teacher.hyper"};
    std::map<std::string, json> resolved;
    bool ran = true, rows = true, values = true, diffs = true;
    std::string bad;
    for (const auto& n : names) {
        auto cfg = pipeline::toy_config();
        cfg.data.phantom = {4, 1, 1, {16, 16, 16}};
        cfg.pretrain.crop = {16, 16, 16};
        cfg.pretrain.epochs_a = cfg.pretrain.epochs_b = cfg.pretrain.epochs_c = 1;
        cfg.distill.teacher_epochs = 1;
        cfg.distill.epochs = 1;
        cfg.distill.crop = cfg.pretrain.crop;
        pipeline::apply_preset(cfg, n);
        cfg.output_dir = work / n;
        fs::remove_all(cfg.output_dir);
        try {
            const auto res = pipeline::run_pipeline(cfg);
            rows = rows && res.report.codes.size() == 15;
        } catch (const std::exception& ex) {
            ran = false;
            bad += n + ": " + ex.what() + "; ";
            continue;
        }
        auto j = read_json(cfg.output_dir / "config.resolved.json");
        j.erase("output_dir");
        resolved[n] = j;
        const auto [fill, alpha, hyp] = matrix.at(n);
        if (j["distill"]["mae_fill"] != fill || j["distill"]["alpha"].get<double>() != alpha ||
            j["teacher"]["hyper"] != hyp) {
            values = false;
            bad += n + " switches differ from the matrix; ";
        }
    }
    if (ran)
        for (std::size_t i = 0; i < names.size(); ++i)
            for (std::size_t k = i + 1; k < names.size(); ++k) {
                const auto d = pipeline::json_diff(resolved[names[i]], resolved[names[k]]);
                std::set<std::string> got(d.begin(), d.end());
                std::set<std::string> want;
                const auto& a = matrix.at(names[i]);
                const auto& b = matrix.at(names[k]);
                if (std::get<0>(a) != std::get<0>(b)) want.insert("distill.mae_fill");
                if (std::get<1>(a) != std::get<1>(b)) want.insert("distill.alpha");
                if (std::get<2>(a) != std::get<2>(b)) want.insert("teacher.hyper");
                if (got != want) {
                    diffs = false;
                    bad += names[i] + " vs " + names[k] + " differ in unexpected keys; ";
                }
            }
    const bool ok = ran && rows && values && diffs;
    return {ok, ok ? "4 presets ran (15-row reports); pairwise config diffs confined to and matching " +
                         std::to_string(axes.size()) + " switches"
                   : bad};
}

// ---------------------------------------------------------------------------
struct Toy {
    pipeline::PipelineResult first;
    double seconds = 0;
    fs::path dir;
    bool ok = false;
    std::string error;
};

Toy run_toy(const fs::path& work) {
    Toy t;
    auto cfg = pipeline::toy_config();
    cfg.deterministic = true;
    cfg.output_dir = work / "toy-1";
    fs::remove_all(cfg.output_dir);
    pipeline::set_deterministic(true);
    const auto t0 = Clock::now();
    try {
        t.first = pipeline::run_pipeline(cfg);
        t.ok = true;
    } catch (const std::exception& e) {
        t.error = e.what();
    }
    t.seconds = seconds_since(t0);
    t.dir = cfg.output_dir;
    return t;
}

Outcome criterion7(const Toy& t) {
    if (!t.ok) return {false, "pipeline failed: " + t.error};
    const auto& r = t.first.report;
    const double gain = r.grand_mean - t.first.untrained.grand_mean;
    const auto full = std::find(r.codes.begin(), r.codes.end(), ModalityCode::all(4)) - r.codes.begin();
    const double wt_full = r.scores[static_cast<std::size_t>(full)][0].dsc;
    const bool ok = r.codes.size() == 15 && gain >= 0.30 && wt_full >= 0.60 && t.seconds < 30 * 60;
    return {ok, "mean DSC " + fmt("%.4f", r.grand_mean) + " vs untrained " + fmt("%.4f", t.first.untrained.grand_mean) +
                    " (gain " + fmt("%.4f", gain) + "), full-modality WT " + fmt("%.4f", wt_full) + ", " +
                    fmt("%.0f", t.seconds) + " s"};
}

Outcome criterion9(const Toy& t, const fs::path& work) {
    if (!t.ok) return {false, "first run failed: " + t.error};
    auto cfg = pipeline::load_config(t.dir / "config.resolved.json");
    cfg.output_dir = work / "toy-2";
    fs::remove_all(cfg.output_dir);
    const auto t0 = Clock::now();
    const auto second = pipeline::run_pipeline(cfg);
    const double secs = seconds_since(t0);
    const bool same = second.report == t.first.report && second.untrained == t.first.untrained;
    const bool retrained = second.cached_stages.empty();
    const auto a = read_json(t.dir / "report.json"), b = read_json(cfg.output_dir / "report.json");
    const bool files = a == b;
    return {same && files && retrained && secs < 2 * t.seconds + 1,
            std::string("reports ") + (same && files ? "identical" : "DIFFER") + ", rerun trained " +
                std::to_string(second.trained_stages.size()) + " stages in " + fmt("%.0f", secs) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mmseg acceptance suite"};
    std::vector<int> only;
    std::string work = (fs::temp_directory_path() / "mmseg-acceptance").string();
    app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
    app.add_option("--workdir", work, "scratch directory for pipeline runs");
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(work);
    auto want = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

    int failed = 0;
    auto report = [&](int n, double budget, const std::function<Outcome()>& fn) {
        if (!want(n)) return;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = seconds_since(t0);
        if (budget > 0 && s >= budget) {
            o.ok = false;
            o.detail += "; over the " + fmt("%.0f", budget) + " s budget";
        }
        failed += !o.ok;
        std::printf("criterion %d: %s  %s  [%.1f s]\n", n, o.ok ? "PASS" : "FAIL", o.detail.c_str(), s);
        std::fflush(stdout);
    };

    report(1, 30, criterion1);
    report(2, 120, criterion2);
    report(3, 120, criterion3);
    report(4, 60, criterion4);
    report(5, 10, criterion5);
    report(6, 60, criterion6);
    Toy toy;
    if (want(7) || want(9)) toy = run_toy(work);
    report(7, 0, [&] { return criterion7(toy); });
    report(8, 60, [&] { return criterion8(work); });
    report(9, 0, [&] { return criterion9(toy, work); });
    return failed;
}
