// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/train/codistill.hpp"

#include "mmseg/masking.hpp"
#include "mmseg/nn/losses.hpp"
#include "mmseg/rng.hpp"

#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace mmseg::train {

using i64 = std::int64_t;

namespace {

template <typename T>
void zero_channels(Tensor<T>& x, const ModalityCode& code, bool keep_available) {
    const i64 n = x.numel() / x.channels();
    for (int c = 0; c < code.size(); ++c)
        if (code[c] != keep_available) std::fill(x.channel(c), x.channel(c) + n, T{0});
}

std::vector<int> all_layers(std::size_t n) {
    std::vector<int> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

template <typename T>
void scale_all(std::vector<Tensor<T>>& v, double s) {
    for (auto& t : v)
        if (!t.empty()) t *= static_cast<T>(s);
}

}  // namespace

AblationSwitches ablation_preset(const std::string& name) {
    if (name == "tab4-b") return {false, false, true};
    if (name == "tab4-c") return {true, false, true};
    if (name == "tab4-d") return {true, true, false};
    if (name == "tab4-e") return {true, true, true};
    throw std::invalid_argument("unknown preset '" + name + "' (tab4-b, tab4-c, tab4-d, tab4-e)");
}

template <typename T>
Recovered<T> recover_full(nn::ReconstructionNet<T>& g, const Tensor<T>& x, const ModalityCode& code) {
    Recovered<T> r;
    r.xhat = g.forward(x);
    r.filled = x;
    const i64 n = x.numel() / x.channels();
    for (int c = 0; c < code.size(); ++c)
        if (!code[c]) std::copy(r.xhat.channel(c), r.xhat.channel(c) + n, r.filled.channel(c));
    return r;
}

template <typename T>
DistillLosses distill_losses(hyper::HyperSegModel<T>& student, nn::ReconstructionNet<T>& recoverer,
                             hyper::HyperSegModel<T>& teacher, const DistillInputs<T>& in,
                             const DistillConfig& cfg, bool backward) {
    if (cfg.alpha < 0 || cfg.beta < 0) throw std::invalid_argument("alpha and beta must be >= 0");
    const auto& x = *in.x;
    const auto& y = *in.targets;

    Tensor<T> xs = x;
    zero_channels(xs, in.student_code, true);
    auto so = student.forward(xs, in.student_code, in.student_text);
    auto task = nn::dice_loss(so.logits, y);

    const bool fill = cfg.mae_fill && !in.code.full();
    Recovered<T> rec;
    if (fill) rec = recover_full(recoverer, x, in.code);
    const Tensor<T>& xf = fill ? rec.filled : x;
    auto to = teacher.forward(xf, ModalityCode::all(in.code.size()), in.teacher_text);
    auto data = nn::dice_loss(to.logits, y);

    const auto layers = cfg.kd_layers.empty() ? all_layers(so.taps.size()) : cfg.kd_layers;
    auto kd = nn::kd_loss(to.taps, so.taps, cfg.kd_margin, layers);

    DistillLosses out{task.value, data.value, kd.value, nn::total_loss(task.value, data.value, kd.value, cfg.alpha, cfg.beta)};
    if (!backward) return out;

    scale_all(kd.grad_student, cfg.beta);
    student.backward(task.grad, cfg.beta > 0 ? kd.grad_student : std::vector<Tensor<T>>{}, false);

    if (fill && recoverer_has_gradient_path(cfg)) {
        Tensor<T> glog;
        if (cfg.alpha > 0) {
            glog = std::move(data.grad);
            glog *= static_cast<T>(cfg.alpha);
        }
        std::vector<Tensor<T>> gtaps;
        if (cfg.beta > 0 && cfg.kd_through_recoverer) {
            gtaps = std::move(kd.grad_teacher);
            scale_all(gtaps, cfg.beta);
        }
        auto gx = teacher.backward(glog, gtaps, true);
        zero_channels(gx, in.code, false);  // only filled channels depend on θ_g
        recoverer.backward(gx, false);
    }
    if (teacher.any_grad_nonzero()) throw std::logic_error("co-distillation: gradient reached the frozen teacher");
    return out;
}

hyper::HyperSegModel<float> build_teacher(const std::vector<Sample>& data, nn::ReconstructionNet<float>& init,
                                          const hyper::HyperConfig& hcfg, const hyper::PromptBank& bank,
                                          const DistillConfig& cfg, std::uint64_t seed,
                                          std::vector<EpochLoss>* curve, const StageHooks& hooks) {
    if (data.empty()) throw std::invalid_argument("build_teacher: empty training set");
    hyper::HyperSegModel<float> t(init.config(), hcfg, derive_seed(seed, "init"));
    nn::copy_matching(init.trunk_parameters(), t.parameters());
    nn::Adam<float> opt(t.parameters(), cfg.optim);
    const long total = static_cast<long>(cfg.teacher_epochs) * static_cast<long>(data.size());
    CsvLog csv;
    if (hooks.loss_csv) csv = CsvLog(*hooks.loss_csv, "stage,epoch,rec,seg,total");
    for (int e = 0; e < cfg.teacher_epochs; ++e) {
        double acc = 0;
        const auto order = epoch_order(data.size(), derive_seed(seed, "order"), e);
        for (auto i : order) {
            const auto& s = data[i];
            const auto ss = derive_seed(derive_seed(seed, static_cast<std::uint64_t>(e)), i);
            auto p = prepare(s, cfg.crop, true, derive_seed(ss, "prep"), cfg.aug);
            const auto kept = modality_dropout(s.code, derive_seed(ss, "mdrop"));
            zero_channels(p.x, kept, true);
            const auto* text = hcfg.enabled && hcfg.indicator == hyper::Indicator::Clip ? &bank.get(kept) : nullptr;
            const auto out = t.forward(p.x, kept, text);
            const auto l = nn::dice_loss(out.logits, p.targets);
            check_finite(l.value, "teacher", e, s.id);
            opt.zero_grad();
            t.backward(l.grad, {}, false);
            opt.step(nn::cosine_lr(cfg.optim.lr, opt.steps(), total));
            acc += l.value;
        }
        acc /= static_cast<double>(data.size());
        if (curve) curve->push_back({e, 0, acc, acc});
        csv.row("teacher", e, 0, acc, acc);
        if (hooks.verbose) std::fprintf(stderr, "[teacher] epoch %d dice %.5f\n", e, acc);
    }
    t.set_trainable(false);
    t.zero_grad();
    return t;
}

hyper::HyperSegModel<float> teacher_from_guidance(nn::SegmentationNet<float>& f, const hyper::HyperConfig& hcfg) {
    auto h = hcfg;
    h.enabled = false;
    hyper::HyperSegModel<float> t(f.config(), h, 0);
    nn::copy_matching(f.parameters(), t.parameters());
    t.set_trainable(false);
    t.zero_grad();
    return t;
}

TrainState make_state(nn::ReconstructionNet<float>& theta, hyper::HyperSegModel<float>& teacher,
                      const hyper::HyperConfig& hcfg, const DistillConfig& cfg, std::uint64_t seed,
                      long total_steps) {
    TrainState st;
    st.student = std::make_unique<hyper::HyperSegModel<float>>(theta.config(), hcfg, derive_seed(seed, "student"));
    nn::copy_matching(theta.trunk_parameters(), st.student->parameters());
    st.recoverer = std::make_unique<nn::ReconstructionNet<float>>(theta.config(), derive_seed(seed, "recoverer"));
    nn::copy_matching(theta.parameters(), st.recoverer->parameters());
    st.teacher = &teacher;
    teacher.set_trainable(false);

    auto params = st.student->parameters();
    if (recoverer_has_gradient_path(cfg)) {
        for (auto* p : st.recoverer->parameters()) params.push_back(p);
    } else {
        // No gradient can reach θ_g; keep it out of the optimizer so weight decay leaves it untouched.
        st.recoverer->set_trainable(false);
    }
    st.opt = std::make_unique<nn::Adam<float>>(params, cfg.optim);
    st.total_steps = total_steps;
    return st;
}

DistillLosses distill_step(TrainState& st, const Sample& s, const hyper::PromptBank& bank, const DistillConfig& cfg,
                           std::uint64_t step_seed) {
    auto p = prepare(s, cfg.crop, true, derive_seed(step_seed, "prep"), cfg.aug);
    const auto kept = modality_dropout(s.code, derive_seed(step_seed, "mdrop"));
    const auto& hs = st.student->hyper_config();
    const auto& ht = st.teacher->hyper_config();
    const auto full = ModalityCode::all(s.code.size());

    DistillInputs<float> in;
    in.x = &p.x;
    in.code = s.code;
    in.student_code = kept;
    in.targets = &p.targets;
    in.student_text = hs.enabled && hs.indicator == hyper::Indicator::Clip ? &bank.get(kept) : nullptr;
    in.teacher_text = ht.enabled && ht.indicator == hyper::Indicator::Clip ? &bank.get(full) : nullptr;

    st.opt->zero_grad();
    const auto l = distill_losses(*st.student, *st.recoverer, *st.teacher, in, cfg, true);
    check_finite(l.total, "distill", static_cast<int>(st.step), s.id);
    st.opt->step(nn::cosine_lr(cfg.optim.lr, st.step, st.total_steps));
    ++st.step;
    return l;
}

TrainState run_distill(const std::vector<Sample>& data, nn::ReconstructionNet<float>& theta,
                       hyper::HyperSegModel<float>& teacher, const hyper::HyperConfig& hcfg,
                       const hyper::PromptBank& bank, const DistillConfig& cfg, std::uint64_t seed,
                       const DistillHooks& hooks) {
    if (data.empty()) throw std::invalid_argument("distill: empty training set");
    const long total = static_cast<long>(cfg.epochs) * static_cast<long>(data.size());
    auto st = make_state(theta, teacher, hcfg, cfg, seed, total);
    CsvLog csv;
    if (hooks.loss_csv) csv = CsvLog(*hooks.loss_csv, "step,task,data,kd,total");

    const bool validate = hooks.validation && !hooks.validation->empty() && cfg.val_every > 0;
    double best = -1.0;
    int since_best = 0;
    std::vector<Tensor<float>> best_student, best_recoverer;
    auto snapshot = [](auto& model, std::vector<Tensor<float>>& dst) {
        dst.clear();
        for (auto* p : model.parameters()) dst.push_back(p->value);
    };
    auto restore = [](auto& model, const std::vector<Tensor<float>>& src) {
        auto ps = model.parameters();
        for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = src[i];
    };

    for (int e = 0; e < cfg.epochs; ++e) {
        const auto order = epoch_order(data.size(), derive_seed(seed, "order"), e);
        for (auto i : order) {
            const auto ss = derive_seed(derive_seed(seed, static_cast<std::uint64_t>(e)), i);
            const auto l = distill_step(st, data[i], bank, cfg, ss);
            csv.row(st.step, l.task, l.data, l.kd, l.total);
        }
        if (hooks.verbose) std::fprintf(stderr, "[distill] epoch %d done (%ld steps)\n", e, st.step);
        const bool last = e + 1 == cfg.epochs;
        if (!validate || ((e + 1) % cfg.val_every != 0 && !last)) continue;
        auto opt = hooks.val_opt;
        opt.with_hd95 = false;
        const double score = eval::evaluate_sweep(*st.student, *hooks.validation, bank, opt).grand_mean;
        if (hooks.verbose) std::fprintf(stderr, "[distill] epoch %d validation mean DSC %.4f\n", e, score);
        if (score > best) {
            best = score;
            since_best = 0;
            snapshot(*st.student, best_student);
            snapshot(*st.recoverer, best_recoverer);
        } else {
            since_best += cfg.val_every;
            if (since_best >= cfg.patience) break;
        }
    }
    if (!best_student.empty()) {
        restore(*st.student, best_student);
        restore(*st.recoverer, best_recoverer);
    }
    return st;
}

template Recovered<float> recover_full<float>(nn::ReconstructionNet<float>&, const Tensor<float>&, const ModalityCode&);
template Recovered<double> recover_full<double>(nn::ReconstructionNet<double>&, const Tensor<double>&,
                                                const ModalityCode&);
template DistillLosses distill_losses<float>(hyper::HyperSegModel<float>&, nn::ReconstructionNet<float>&,
                                             hyper::HyperSegModel<float>&, const DistillInputs<float>&,
                                             const DistillConfig&, bool);
template DistillLosses distill_losses<double>(hyper::HyperSegModel<double>&, nn::ReconstructionNet<double>&,
                                              hyper::HyperSegModel<double>&, const DistillInputs<double>&,
                                              const DistillConfig&, bool);

}  // namespace mmseg::train
