// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat tensor archive keyed by parameter path.
//
//   "MMTENS1\n"
//   u64 entry count
//   per entry: u32 name length, name bytes, u8 element size (4 | 8),
//              u32 rank, i64 dims[rank], little-endian values
//
// A checkpoint is a directory holding config.json plus params.bin.

#pragma once

#include "mmseg/nn/layers.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace mmseg::nn {

using TensorArchive = std::map<std::string, Tensor<double>>;

template <typename T>
void save_archive(const std::filesystem::path& file, const ParamList<T>& params);

TensorArchive load_archive(const std::filesystem::path& file);

/// Assign archive entries to params by name. With strict = true every param
/// must be present with a matching shape; otherwise mismatches are skipped.
/// Returns the number of params assigned.
template <typename T>
int assign_from_archive(const TensorArchive& archive, const ParamList<T>& params, bool strict);

}  // namespace mmseg::nn
