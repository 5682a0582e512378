// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// 15-scenario evaluation sweep and report rendering.

#pragma once

#include "mmseg/eval/metrics.hpp"
#include "mmseg/hypernet/embedder.hpp"
#include "mmseg/hypernet/hypernet.hpp"
#include "mmseg/train/dataset.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <string>
#include <vector>

namespace mmseg::eval {

struct RegionScore {
    double dsc = 0.0;
    double hd95 = 0.0;
};

struct EvalReport {
    std::vector<ModalityCode> codes;                  // sweep order
    std::vector<std::array<RegionScore, 3>> scores;   // per code, WT/TC/ET, averaged over subjects
    std::array<double, 3> mean_dsc{}, mean_hd95{};    // per region over codes
    double grand_mean = 0.0;                          // mean of all DSC cells
    int subjects = 0;

    void recompute();
    bool operator==(const EvalReport& o) const;
};

struct EvalOptions {
    Extent3 crop{32, 32, 32};
    double threshold = 0.5;
    Hd95Options hd;
    bool with_hd95 = true;
};

/// Each code: zero missing channels, run the model with the code's prompt,
/// threshold sigmoid, score each region, average over subjects.
EvalReport evaluate_sweep(hyper::HyperSegModel<float>& model, const std::vector<train::Sample>& subjects,
                          const hyper::PromptBank& bank, const EvalOptions& opt);

enum class Format { Csv, Json, Markdown };
Format format_from_path(const std::string& path);
std::string render_report(const EvalReport& r, Format f);
nlohmann::json report_to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

}  // namespace mmseg::eval
