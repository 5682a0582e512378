// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mmseg/kernels/conv3d.hpp"
#include "mmseg/tensor.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace mmseg::eval {

/// 2|P∩G| / (|P|+|G|); both empty → 1.
double dsc(const std::uint8_t* pred, const std::uint8_t* gt, std::int64_t n);

/// Mask voxels with at least one face neighbour outside the mask (or outside the grid).
std::vector<std::uint8_t> boundary(const std::uint8_t* mask, Extent3 e);

/// numpy-style linear-interpolated percentile (q in [0, 100]) of unsorted values.
double percentile(std::vector<double> values, double q);

struct Hd95Options {
    /// Value used when exactly one mask is empty; default is the volume diagonal in mm.
    std::optional<double> one_empty;
    kernels::Exec exec = kernels::Exec::Parallel;
};

double volume_diagonal(Extent3 e, const std::array<double, 3>& spacing);

/// 95th percentile of the pooled symmetric boundary-to-boundary distances.
double hd95(const std::uint8_t* pred, const std::uint8_t* gt, Extent3 e, const std::array<double, 3>& spacing,
            const Hd95Options& opt = {});

}  // namespace mmseg::eval
