// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pretraining stages.
//   A: masked reconstruction of available modalities from MASK(x)
//   B: guidance segmentation model f (modality dropout + Dice)
//   C: reconstruction + λ · BCE(f(x̂), y), f frozen

#pragma once

#include "mmseg/masking.hpp"
#include "mmseg/nn/network.hpp"
#include "mmseg/nn/optim.hpp"
#include "mmseg/train/dataset.hpp"

#include <filesystem>
#include <optional>

namespace mmseg::train {

struct PretrainConfig {
    double lambda_da = 0.1;
    int epochs_a = 15;
    int epochs_b = 30;
    int epochs_c = 10;
    Extent3 patch{4, 4, 4};
    double mask_ratio = 0.5;
    Extent3 crop{32, 32, 32};
    nn::OptimConfig optim;
    data::AugmentConfig aug;
};

struct DaLoss {
    double total = 0, rec = 0, seg = 0;
};

/// total = rec_loss(θ(MASK(x)), x, code) + λ · BCE(f(θ(MASK(x))), y).
/// With backward = true, gradients accumulate into θ only; a gradient on
/// any of f's parameters raises std::logic_error.
template <typename T>
DaLoss da_loss(nn::ReconstructionNet<T>& theta, nn::SegmentationNet<T>& f, const Tensor<T>& x,
               const ModalityCode& code, const Tensor<T>& targets, const MaskSpec& spec, double lambda,
               bool backward);

struct StageHooks {
    std::optional<std::filesystem::path> loss_csv;  // stage,epoch,rec,seg,total
    bool verbose = false;
};

struct EpochLoss {
    int epoch = 0;
    double rec = 0, seg = 0, total = 0;
};

nn::ReconstructionNet<float> train_mae_stage_a(const std::vector<Sample>& data, const nn::BackboneConfig& backbone,
                                               const PretrainConfig& cfg, std::uint64_t seed,
                                               std::vector<EpochLoss>* curve = nullptr,
                                               const StageHooks& hooks = {});

nn::SegmentationNet<float> train_guidance_model(const std::vector<Sample>& data, nn::ReconstructionNet<float>& init,
                                                const PretrainConfig& cfg, std::uint64_t seed,
                                                std::vector<EpochLoss>* curve = nullptr,
                                                const StageHooks& hooks = {});

nn::ReconstructionNet<float> train_mae_stage_c(const std::vector<Sample>& data, nn::ReconstructionNet<float>& init,
                                               nn::SegmentationNet<float>& f, const PretrainConfig& cfg,
                                               std::uint64_t seed, std::vector<EpochLoss>* curve = nullptr,
                                               const StageHooks& hooks = {});

}  // namespace mmseg::train
