// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Data-model co-distillation.
//
//   student   φ_s  sees MDrop(x) and the post-drop code c′
//   recoverer θ_g  fills channels missing from the inherent code
//   teacher   φ_t  frozen, sees x̂_f with the all-ones code
//
//   L = L_task + α·L_data + β·L_KD
//   L_task = Dice(φ_s(MDrop(x), c′), y)
//   L_data = Dice(φ_t(x̂_f), y)                       (gradient into θ_g only)
//   L_KD   = Σ_l mean(max(0, |f_t,l − f_s,l| − m)²)

#pragma once

#include "mmseg/eval/report.hpp"
#include "mmseg/hypernet/embedder.hpp"
#include "mmseg/hypernet/hypernet.hpp"
#include "mmseg/nn/network.hpp"
#include "mmseg/nn/optim.hpp"
#include "mmseg/train/dataset.hpp"
#include "mmseg/train/pretrain.hpp"

#include <memory>
#include <optional>
#include <string>

namespace mmseg::train {

struct DistillConfig {
    double alpha = 1.0;
    double beta = 0.1;
    double kd_margin = 0.0;
    std::vector<int> kd_layers;  // tap indices; empty selects all
    bool kd_through_recoverer = true;
    bool mae_fill = true;
    bool hyper_teacher = true;
    bool teacher_reuse_guidance = false;
    int teacher_epochs = 30;
    int epochs = 20;
    int patience = 50;   // epochs without validation improvement
    int val_every = 5;   // 0 disables validation
    Extent3 crop{32, 32, 32};
    nn::OptimConfig optim;
    data::AugmentConfig aug;
};

/// The three switches varied by the Table-4 style ablation presets.
struct AblationSwitches {
    bool mae_fill;
    bool data_refine;
    bool hyper_teacher;
};
/// "tab4-b" | "tab4-c" | "tab4-d" | "tab4-e".
AblationSwitches ablation_preset(const std::string& name);

/// θ_g receives gradient only through filled channels of the teacher input.
inline bool recoverer_has_gradient_path(const DistillConfig& c) {
    return c.mae_fill && (c.alpha > 0 || (c.beta > 0 && c.kd_through_recoverer));
}

template <typename T>
struct Recovered {
    Tensor<T> xhat;    // recoverer output
    Tensor<T> filled;  // x̂_f
};

/// x̂_f[i] = x[i] where code[i] = 1, else x̂[i].
template <typename T>
Recovered<T> recover_full(nn::ReconstructionNet<T>& g, const Tensor<T>& x, const ModalityCode& code);

struct DistillLosses {
    double task = 0, data = 0, kd = 0, total = 0;
};

template <typename T>
struct DistillInputs {
    const Tensor<T>* x = nullptr;          // inherent availability applied
    ModalityCode code;                     // inherent availability
    ModalityCode student_code;             // after MDrop
    const Tensor<T>* targets = nullptr;
    const std::vector<float>* student_text = nullptr;
    const std::vector<float>* teacher_text = nullptr;
};

/// One sample's losses; with backward = true gradients accumulate into the
/// student and (when a path exists) the recoverer. A gradient on any teacher
/// parameter raises std::logic_error.
template <typename T>
DistillLosses distill_losses(hyper::HyperSegModel<T>& student, nn::ReconstructionNet<T>& recoverer,
                             hyper::HyperSegModel<T>& teacher, const DistillInputs<T>& in,
                             const DistillConfig& cfg, bool backward);

/// Teacher with (or without) a hyper-network, trained with MDrop + Dice and frozen.
hyper::HyperSegModel<float> build_teacher(const std::vector<Sample>& data, nn::ReconstructionNet<float>& init,
                                          const hyper::HyperConfig& hcfg, const hyper::PromptBank& bank,
                                          const DistillConfig& cfg, std::uint64_t seed,
                                          std::vector<EpochLoss>* curve = nullptr, const StageHooks& hooks = {});

/// Frozen teacher that reuses the guidance model f (no hyper-network).
hyper::HyperSegModel<float> teacher_from_guidance(nn::SegmentationNet<float>& f, const hyper::HyperConfig& hcfg);

/// Models live on the heap so the optimizer's parameter pointers survive moves.
struct TrainState {
    std::unique_ptr<hyper::HyperSegModel<float>> student;
    std::unique_ptr<nn::ReconstructionNet<float>> recoverer;
    hyper::HyperSegModel<float>* teacher = nullptr;
    std::unique_ptr<nn::Adam<float>> opt;
    long step = 0;
    long total_steps = 0;
};

/// Student initialised from the pretrained trunk; recoverer copied from θ.
TrainState make_state(nn::ReconstructionNet<float>& theta, hyper::HyperSegModel<float>& teacher,
                      const hyper::HyperConfig& hcfg, const DistillConfig& cfg, std::uint64_t seed,
                      long total_steps);

/// MDrop, recovery, teacher forward, loss, one optimizer step.
DistillLosses distill_step(TrainState& st, const Sample& s, const hyper::PromptBank& bank,
                           const DistillConfig& cfg, std::uint64_t step_seed);

struct DistillHooks {
    std::optional<std::filesystem::path> loss_csv;  // step,task,data,kd,total
    const std::vector<Sample>* validation = nullptr;
    eval::EvalOptions val_opt;
    bool verbose = false;
};

/// Full fine-tuning run; returns the state holding the best student.
TrainState run_distill(const std::vector<Sample>& data, nn::ReconstructionNet<float>& theta,
                       hyper::HyperSegModel<float>& teacher, const hyper::HyperConfig& hcfg,
                       const hyper::PromptBank& bank, const DistillConfig& cfg, std::uint64_t seed,
                       const DistillHooks& hooks = {});

}  // namespace mmseg::train
