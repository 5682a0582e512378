// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Stage chain: data → split → A (MAE) → B (guidance f) → C (MAE + DA)
//              → teacher → distill → 15-scenario evaluation.
//
// Layout under output_dir:
//   config.resolved.json     snapshot sufficient to reproduce the run
//   split.json
//   stages/<name>/stage.json {stage, hash, key}
//   stages/<name>/config.json, params.bin, loss.csv
//   report.{json,csv,md}, report_untrained.json
//
// A stage whose stage.json hash matches is loaded instead of retrained; a
// mismatching hash aborts the run before any work is done.

#pragma once

#include "mmseg/eval/report.hpp"
#include "mmseg/pipeline/config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mmseg::pipeline {

struct Datasets {
    data::DatasetSplit split;
    std::vector<train::Sample> train, val, eval;
};

Datasets load_datasets(const ExperimentConfig& cfg);

/// Phantom subjects written as NIfTI (.nii.gz) plus manifest.json in dir.
std::filesystem::path make_fixtures(std::uint64_t seed, int n_subjects, Extent3 shape,
                                    const std::filesystem::path& dir, int modalities = 4);

// -- checkpoints --------------------------------------------------------------
enum class ModelKind { Mae, Guidance, HyperSeg };

void save_checkpoint(const std::filesystem::path& dir, ModelKind kind, const nn::ParamList<float>& params,
                     const nn::BackboneConfig& b, const hyper::HyperConfig* h, std::uint64_t seed);
nn::ReconstructionNet<float> load_mae(const std::filesystem::path& dir);
nn::SegmentationNet<float> load_guidance(const std::filesystem::path& dir);
hyper::HyperSegModel<float> load_hyperseg(const std::filesystem::path& dir);

struct PipelineOptions {
    bool verbose = false;
    std::string stop_after;  // a | b | c | teacher | distill; empty runs everything
};

struct PipelineResult {
    eval::EvalReport report;
    eval::EvalReport untrained;
    long training_steps = 0;  // optimizer steps performed by this invocation
    std::vector<std::string> cached_stages, trained_stages;
    bool evaluated = false;
    bool frozen_ok = true;  // teacher and guidance checksums unchanged across later stages
};

/// Bitwise-stable kernels and scheduling.
void set_deterministic(bool on);

PipelineResult run_pipeline(const ExperimentConfig& cfg, const PipelineOptions& opt = {});

/// Co-distillation alone, from an MAE checkpoint (the recoverer init) and a
/// teacher checkpoint; writes student/, recoverer/, loss.csv and reports.
PipelineResult distill_from(const ExperimentConfig& cfg, const std::filesystem::path& mae_dir,
                            const std::filesystem::path& teacher_dir, const PipelineOptions& opt = {});

/// Stage hashes for a config, in chain order (a, b, c, teacher, distill, eval).
std::vector<std::pair<std::string, std::string>> stage_hashes(const ExperimentConfig& cfg);

}  // namespace mmseg::pipeline
