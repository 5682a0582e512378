// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// In-memory training samples and small helpers shared by the training stages.

#pragma once

#include "mmseg/data/io.hpp"
#include "mmseg/data/preprocess.hpp"
#include "mmseg/data/split.hpp"
#include "mmseg/modality.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace mmseg::train {

/// One subject as seen by training: channels absent from code are zero.
struct Sample {
    std::string id;
    MultimodalVolume volume;
    RegionMasks masks;
    ModalityCode code;
};

using data::Subject;

/// Apply a split's availability codes to full subjects.
std::vector<Sample> make_samples(const std::vector<Subject>& subjects, const data::DatasetSplit& split);
/// Every subject with all modalities available (evaluation / validation).
std::vector<Sample> full_samples(const std::vector<Subject>& subjects);

/// Seed-deterministic visiting order for one epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

struct Prepared {
    Tensor<float> x;        // [M, D, H, W], missing channels zero
    Tensor<float> targets;  // [3, D, H, W]
    RegionMasks masks;
};

Prepared prepare(const Sample& s, Extent3 crop, bool train, std::uint64_t seed,
                 const data::AugmentConfig& aug = {});

/// Throws with stage/epoch/sample context on NaN or inf.
void check_finite(double v, const std::string& stage, int epoch, const std::string& sample_id);

/// Append-only CSV with a fixed header.
class CsvLog {
public:
    CsvLog() = default;
    CsvLog(const std::filesystem::path& path, const std::string& header);
    template <typename... Args>
    void row(const Args&... args) {
        if (!os_.is_open()) return;
        bool first = true;
        ((os_ << (first ? "" : ",") << args, first = false), ...);
        os_ << '\n';
        os_.flush();
    }

private:
    std::ofstream os_;
};

}  // namespace mmseg::train
