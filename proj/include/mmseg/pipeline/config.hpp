// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration. JSON, schema version 1; unknown keys are errors.
// The resolved form (every default filled in, presets folded) is written
// next to the outputs and is sufficient to reproduce a run.
//
// Seeds: one global seed fans out to per-stage seeds with
//   derive_seed(seed, "<stage>") = splitmix64(seed ^ fnv1a("<stage>"))
// (see rng.hpp), for stages phantom, split, stage-a, stage-b, stage-c,
// teacher, distill, embedder.

#pragma once

#include "mmseg/data/split.hpp"
#include "mmseg/eval/report.hpp"
#include "mmseg/hypernet/embedder.hpp"
#include "mmseg/hypernet/hypernet.hpp"
#include "mmseg/nn/network.hpp"
#include "mmseg/train/codistill.hpp"
#include "mmseg/train/pretrain.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace mmseg::pipeline {

inline constexpr int kConfigVersion = 1;

struct PhantomSpec {
    int n_train = 40;
    int n_val = 4;
    int n_eval = 10;
    Extent3 shape{32, 32, 32};
};

struct DataConfig {
    std::string source = "phantom";  // phantom | manifest
    int modalities = 4;
    PhantomSpec phantom;
    std::filesystem::path train_manifest, val_manifest, eval_manifest;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "runs/default";
    bool deterministic = false;
    DataConfig data;
    double fm_ratio = 0.1;
    data::MissingRange missing{1, 3};
    std::string backbone_preset = "toy";
    nn::BackboneConfig backbone = nn::BackboneConfig::toy();
    train::PretrainConfig pretrain;
    train::DistillConfig distill;
    hyper::HyperConfig hyper;
    hyper::EmbedderConfig embedder;
    double eval_threshold = 0.5;
    std::optional<double> hd95_one_empty;

    eval::EvalOptions eval_options() const;
};

/// Parse and validate; throws std::invalid_argument naming the first bad key.
ExperimentConfig config_from_json(const nlohmann::json& j);
/// Fully resolved form.
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fold an ablation preset ("tab4-b" … "tab4-e") into the config.
void apply_preset(ExperimentConfig& c, const std::string& name);

/// Flattened "a.b.c" paths whose values differ between two JSON documents.
std::vector<std::string> json_diff(const nlohmann::json& a, const nlohmann::json& b);

/// Ready-made configurations.
ExperimentConfig toy_config();

}  // namespace mmseg::pipeline
