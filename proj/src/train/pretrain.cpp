// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/train/pretrain.hpp"

#include "mmseg/nn/losses.hpp"
#include "mmseg/rng.hpp"

#include <cstdio>
#include <stdexcept>

namespace mmseg::train {

using i64 = std::int64_t;

namespace {

template <typename T>
void zero_missing(Tensor<T>& x, const ModalityCode& code) {
    const i64 n = x.numel() / x.channels();
    for (int c = 0; c < code.size(); ++c)
        if (!code[c]) std::fill(x.channel(c), x.channel(c) + n, T{0});
}

struct Loop {
    std::uint64_t seed;
    const std::vector<Sample>& data;
    int epochs;
    const char* stage;
    const StageHooks& hooks;
    std::vector<EpochLoss>* curve;
    CsvLog csv;

    Loop(std::uint64_t s, const std::vector<Sample>& d, int e, const char* st, const StageHooks& h,
         std::vector<EpochLoss>* c)
        : seed(s), data(d), epochs(e), stage(st), hooks(h), curve(c) {
        if (data.empty()) throw std::invalid_argument(std::string("stage ") + stage + ": empty training set");
        if (hooks.loss_csv) csv = CsvLog(*hooks.loss_csv, "stage,epoch,rec,seg,total");
    }

    long total_steps() const { return static_cast<long>(epochs) * static_cast<long>(data.size()); }

    // step(sample, sample_seed, epoch) -> EpochLoss contribution
    template <typename Step>
    void run(Step&& step) {
        for (int e = 0; e < epochs; ++e) {
            EpochLoss acc{e, 0, 0, 0};
            const auto order = epoch_order(data.size(), derive_seed(seed, "order"), e);
            for (std::size_t k = 0; k < order.size(); ++k) {
                const auto& s = data[order[k]];
                const auto l = step(s, derive_seed(derive_seed(seed, static_cast<std::uint64_t>(e)), order[k]), e);
                check_finite(l.total, std::string("stage ") + stage, e, s.id);
                acc.rec += l.rec;
                acc.seg += l.seg;
                acc.total += l.total;
            }
            const double n = static_cast<double>(data.size());
            acc.rec /= n;
            acc.seg /= n;
            acc.total /= n;
            if (curve) curve->push_back(acc);
            csv.row(stage, e, acc.rec, acc.seg, acc.total);
            if (hooks.verbose)
                std::fprintf(stderr, "[stage %s] epoch %d rec %.5f seg %.5f total %.5f\n", stage, e, acc.rec, acc.seg,
                             acc.total);
        }
    }
};

}  // namespace

template <typename T>
DaLoss da_loss(nn::ReconstructionNet<T>& theta, nn::SegmentationNet<T>& f, const Tensor<T>& x,
               const ModalityCode& code, const Tensor<T>& targets, const MaskSpec& spec, double lambda,
               bool backward) {
    if (lambda < 0) throw std::invalid_argument("lambda_da must be >= 0");
    Tensor<T> input = x;
    apply_mask_inplace(input, spec);
    const auto xhat = theta.forward(input);
    auto rec = nn::rec_loss(xhat, x, code);
    const auto out = f.forward(xhat);
    auto seg = nn::bce_loss(out.logits, targets);
    DaLoss r{rec.value + lambda * seg.value, rec.value, seg.value};
    if (!backward) return r;
    Tensor<T> g = std::move(rec.grad);
    if (lambda > 0) {
        seg.grad *= static_cast<T>(lambda);
        g += f.backward(seg.grad, {}, true);
    }
    theta.backward(g, false);
    if (f.any_grad_nonzero()) throw std::logic_error("da_loss: gradient reached the frozen guidance model");
    return r;
}

nn::ReconstructionNet<float> train_mae_stage_a(const std::vector<Sample>& data, const nn::BackboneConfig& backbone,
                                               const PretrainConfig& cfg, std::uint64_t seed,
                                               std::vector<EpochLoss>* curve, const StageHooks& hooks) {
    nn::ReconstructionNet<float> theta(backbone, derive_seed(seed, "init"));
    nn::Adam<float> opt(theta.parameters(), cfg.optim);
    Loop loop(seed, data, cfg.epochs_a, "a", hooks, curve);
    loop.run([&](const Sample& s, std::uint64_t ss, int e) {
        auto p = prepare(s, cfg.crop, true, derive_seed(ss, "prep"), cfg.aug);
        const auto spec = make_mask_spec(s.code, p.x.extent(), cfg.patch, cfg.mask_ratio, derive_seed(ss, "mask"));
        auto input = p.x;
        apply_mask_inplace(input, spec);
        const auto xhat = theta.forward(input);
        const auto l = nn::rec_loss(xhat, p.x, s.code);
        check_finite(l.value, "stage a", e, s.id);
        opt.zero_grad();
        theta.backward(l.grad, false);
        opt.step(nn::cosine_lr(cfg.optim.lr, opt.steps(), loop.total_steps()));
        return EpochLoss{0, l.value, 0, l.value};
    });
    return theta;
}

nn::SegmentationNet<float> train_guidance_model(const std::vector<Sample>& data, nn::ReconstructionNet<float>& init,
                                                const PretrainConfig& cfg, std::uint64_t seed,
                                                std::vector<EpochLoss>* curve, const StageHooks& hooks) {
    nn::SegmentationNet<float> f(init.config(), derive_seed(seed, "init"));
    nn::copy_matching(init.trunk_parameters(), f.parameters());
    nn::Adam<float> opt(f.parameters(), cfg.optim);
    Loop loop(seed, data, cfg.epochs_b, "b", hooks, curve);
    loop.run([&](const Sample& s, std::uint64_t ss, int e) {
        auto p = prepare(s, cfg.crop, true, derive_seed(ss, "prep"), cfg.aug);
        const auto kept = modality_dropout(s.code, derive_seed(ss, "mdrop"));
        zero_missing(p.x, kept);
        const auto out = f.forward(p.x);
        const auto l = nn::dice_loss(out.logits, p.targets);
        check_finite(l.value, "stage b", e, s.id);
        opt.zero_grad();
        f.backward(l.grad, {}, false);
        opt.step(nn::cosine_lr(cfg.optim.lr, opt.steps(), loop.total_steps()));
        return EpochLoss{0, 0, l.value, l.value};
    });
    f.set_trainable(false);
    f.zero_grad();
    return f;
}

nn::ReconstructionNet<float> train_mae_stage_c(const std::vector<Sample>& data, nn::ReconstructionNet<float>& init,
                                               nn::SegmentationNet<float>& f, const PretrainConfig& cfg,
                                               std::uint64_t seed, std::vector<EpochLoss>* curve,
                                               const StageHooks& hooks) {
    nn::ReconstructionNet<float> theta(init.config(), derive_seed(seed, "init"));
    nn::copy_matching(init.parameters(), theta.parameters());
    f.set_trainable(false);
    f.zero_grad();
    nn::Adam<float> opt(theta.parameters(), cfg.optim);
    Loop loop(seed, data, cfg.epochs_c, "c", hooks, curve);
    loop.run([&](const Sample& s, std::uint64_t ss, int e) {
        auto p = prepare(s, cfg.crop, true, derive_seed(ss, "prep"), cfg.aug);
        const auto spec = make_mask_spec(s.code, p.x.extent(), cfg.patch, cfg.mask_ratio, derive_seed(ss, "mask"));
        opt.zero_grad();
        const auto l = da_loss(theta, f, p.x, s.code, p.targets, spec, cfg.lambda_da, true);
        check_finite(l.total, "stage c", e, s.id);
        opt.step(nn::cosine_lr(cfg.optim.lr, opt.steps(), loop.total_steps()));
        return EpochLoss{0, l.rec, l.seg, l.total};
    });
    return theta;
}

template DaLoss da_loss<float>(nn::ReconstructionNet<float>&, nn::SegmentationNet<float>&, const Tensor<float>&,
                               const ModalityCode&, const Tensor<float>&, const MaskSpec&, double, bool);
template DaLoss da_loss<double>(nn::ReconstructionNet<double>&, nn::SegmentationNet<double>&, const Tensor<double>&,
                                const ModalityCode&, const Tensor<double>&, const MaskSpec&, double, bool);

}  // namespace mmseg::train
