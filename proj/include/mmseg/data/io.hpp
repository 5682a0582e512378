// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Volume file IO.
//
// Raw format (little-endian):
//   ASCII header "MMVOL1 M D H W\n" followed by M·D·H·W float32 values,
//   channel-major with W fastest.
//
// NIfTI-1 (.nii / .nii.gz): single-file, vox_offset 352. dim[1..3] map to
// (W, H, D); dim[4] (if > 1) is the channel axis. Supported datatypes:
// uint8, int16, int32, float32, float64. scl_slope/scl_inter are applied.
//
// Subject manifest (JSON):
//   {"version": 1, "modalities": ["FLAIR","T1","T1c","T2"],
//    "subjects": [{"id": "...", "images": {"FLAIR": "path" | null, ...},
//                  "label": "path"}]}
// Relative paths resolve against the manifest's directory.

#pragma once

#include "mmseg/modality.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mmseg::data {

namespace fs = std::filesystem;

// -- raw ---------------------------------------------------------------------
void save_raw(const fs::path& path, const Tensor<float>& voxels);
Tensor<float> load_raw(const fs::path& path);

// -- NIfTI -------------------------------------------------------------------
enum class NiftiType { UInt8, Int16, Int32, Float32, Float64 };

struct NiftiImage {
    Tensor<float> voxels;  // [C, D, H, W]
    std::array<double, 3> spacing{1.0, 1.0, 1.0};  // (D, H, W) in mm
};

NiftiImage read_nifti(const fs::path& path);
/// Writes gzip-compressed when the path ends in ".gz".
void write_nifti(const fs::path& path, const Tensor<float>& voxels, const std::array<double, 3>& spacing,
                 NiftiType type = NiftiType::Float32);

bool is_nifti(const fs::path& path);

// -- volumes and labels ------------------------------------------------------
/// Raw or NIfTI; a 3D file yields a single-channel volume.
MultimodalVolume load_volume(const fs::path& path);
/// Label map with values {0, 1, 2, 4}; unknown values raise an error naming the value.
RegionMasks load_labels(const fs::path& path);
void save_labels(const fs::path& path, const Tensor<std::uint8_t>& labels, const std::array<double, 3>& spacing);

// -- manifest ----------------------------------------------------------------
struct SubjectRecord {
    std::string id;
    std::map<std::string, std::optional<fs::path>> images;
    fs::path label;
};

struct Manifest {
    std::vector<std::string> modalities;
    std::vector<SubjectRecord> subjects;
    fs::path root;  // directory relative paths resolve against

    std::vector<std::string> ids() const;
    const SubjectRecord& find(const std::string& id) const;
};

Manifest load_manifest(const fs::path& path);
void save_manifest(const fs::path& path, const Manifest& m);

struct Subject {
    MultimodalVolume volume;
    RegionMasks masks;
};

/// Stack per-modality files into one volume; absent modalities are zero
/// channels. Every file must share the same spatial extent.
Subject load_subject(const Manifest& m, const SubjectRecord& rec);

}  // namespace mmseg::data
