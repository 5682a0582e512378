// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exact squared Euclidean distance transform on an anisotropic voxel grid
// (separable lower-envelope algorithm, one 1D pass per axis). The parallel
// path distributes independent scan lines across threads.

#pragma once

#include "mmseg/kernels/conv3d.hpp"
#include "mmseg/tensor.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace mmseg::kernels {

/// Squared distance in mm² from each voxel centre to the nearest seed voxel
/// (seeds[i] != 0). Every entry is +inf when there are no seeds.
std::vector<double> squared_edt(const std::uint8_t* seeds, Extent3 e, const std::array<double, 3>& spacing,
                                Exec exec);

}  // namespace mmseg::kernels
