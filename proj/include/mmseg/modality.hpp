// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Core data model: multimodal volumes, modality availability codes and the
// nested tumor region masks (WT ⊇ TC ⊇ ET).

#pragma once

#include "mmseg/tensor.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mmseg {

/// Canonical modality order; matches the column pattern of the evaluation tables.
inline const std::vector<std::string>& canonical_modalities() {
    static const std::vector<std::string> names{"FLAIR", "T1", "T1c", "T2"};
    return names;
}

/// Names for an M-modality setup: canonical names first, then "M<i>".
std::vector<std::string> modality_names(int m);

class ModalityCode {
public:
    ModalityCode() = default;
    explicit ModalityCode(std::vector<std::uint8_t> bits);
    ModalityCode(std::vector<std::uint8_t> bits, std::vector<std::string> names);

    static ModalityCode all(int m);
    /// Parse "1001"-style strings.
    static ModalityCode parse(const std::string& s);

    int size() const { return static_cast<int>(bits_.size()); }
    bool operator[](int i) const { return bits_.at(static_cast<std::size_t>(i)) != 0; }
    void set(int i, bool on) { bits_.at(static_cast<std::size_t>(i)) = on ? 1 : 0; }
    int available_count() const;
    bool full() const { return available_count() == size(); }
    std::vector<int> available() const;
    std::vector<int> missing() const;
    const std::vector<std::uint8_t>& bits() const { return bits_; }
    const std::vector<std::string>& names() const { return names_; }
    std::string str() const;

    bool operator==(const ModalityCode& o) const { return bits_ == o.bits_; }
    bool operator<(const ModalityCode& o) const { return bits_ < o.bits_; }

private:
    std::vector<std::uint8_t> bits_;
    std::vector<std::string> names_;
};

/// The 2^M − 1 non-empty codes in evaluation-table column order.
/// For M = 4 this is the fixed ●/○ ordering of the reporting tables; for
/// other M, codes are ordered by available count then lexicographically.
std::vector<ModalityCode> sweep_codes(int m);

struct MultimodalVolume {
    Tensor<float> voxels;  // [M, D, H, W]
    std::array<double, 3> spacing{1.0, 1.0, 1.0};  // mm, ordered (D, H, W)
    std::string subject_id;

    int modalities() const { return static_cast<int>(voxels.dim(0)); }
    Extent3 extent() const { return voxels.extent(); }
    bool channel_is_zero(int c) const;
    /// Code derived from which channels are non-all-zero.
    ModalityCode observed_code() const;
    /// Zero every channel whose bit is 0.
    void apply_code(const ModalityCode& code);
};

enum class Region : int { WT = 0, TC = 1, ET = 2 };
inline constexpr std::array<const char*, 3> kRegionNames{"WT", "TC", "ET"};

struct RegionMasks {
    Tensor<std::uint8_t> regions;  // [3, D, H, W], ordered WT, TC, ET
    std::optional<Tensor<std::uint8_t>> labels;

    Extent3 extent() const { return regions.extent(); }
    bool nested() const;
    std::int64_t count(Region r) const;
};

/// BraTS label mapping: WT = {1,2,4}, TC = {1,4}, ET = {4}.
/// Throws on any other label value, naming it.
RegionMasks masks_from_labels(const Tensor<std::uint8_t>& labels);  // labels: [1, D, H, W]

}  // namespace mmseg
