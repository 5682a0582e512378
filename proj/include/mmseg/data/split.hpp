// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mmseg/modality.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace mmseg::data {

struct IncompleteEntry {
    std::string id;
    ModalityCode code;
};

/// Training set D = D_f (full-modality subjects) ∪ D_m (subjects with
/// 1..M−1 modalities discarded).
struct DatasetSplit {
    std::vector<std::string> full;
    std::vector<IncompleteEntry> incomplete;
    double fm_ratio = 1.0;
    std::uint64_t seed = 0;
    int modalities = 4;

    /// Availability code of a subject (all-ones for D_f members).
    ModalityCode code_of(const std::string& id) const;
    std::size_t size() const { return full.size() + incomplete.size(); }
};

struct MissingRange {
    int lo = 1, hi = 3;
};

/// |D_f| = max(1, round(fm_ratio · N)); the rest get a missing count drawn
/// uniformly from range and missing identities drawn without replacement.
DatasetSplit build_split(const std::vector<std::string>& subject_ids, double fm_ratio, std::uint64_t seed,
                         int modalities, MissingRange range);
DatasetSplit build_split(const std::vector<std::string>& subject_ids, double fm_ratio, std::uint64_t seed,
                         int modalities = 4);

nlohmann::json split_to_json(const DatasetSplit& s);
DatasetSplit split_from_json(const nlohmann::json& j);

}  // namespace mmseg::data
