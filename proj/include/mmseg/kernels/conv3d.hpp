// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Volumetric convolution kernels. Every kernel has two implementations:
//   Exec::Serial   - naive loop nest, the reference used by tests
//   Exec::Parallel - OpenMP-parallel, row-vectorized production path
// Parallel kernels partition work by output channel (or input channel for
// input gradients), so each output element is written by exactly one thread
// and results are independent of thread count.

#pragma once

#include <cstdint>

namespace mmseg::kernels {

enum class Exec { Serial, Parallel };

/// Stride-1 "same" convolution with an odd cubic kernel (pad = k / 2).
/// Weight layout [cout, cin, k, k, k]; activations [c, d, h, w].
struct ConvGeom {
    std::int64_t cin = 0, cout = 0;
    std::int64_t d = 0, h = 0, w = 0;
    std::int64_t k = 3;

    std::int64_t voxels() const { return d * h * w; }
    std::int64_t weight_count() const { return cout * cin * k * k * k; }
};

/// out = conv(in, weight) + bias   (out is overwritten)
template <typename T>
void conv3d_forward(const T* in, const T* weight, const T* bias, T* out, const ConvGeom& g, Exec exec);

/// grad_in = conv^T(grad_out, weight)   (grad_in is overwritten)
template <typename T>
void conv3d_backward_input(const T* grad_out, const T* weight, T* grad_in, const ConvGeom& g, Exec exec);

/// grad_weight += correlate(grad_out, in); grad_bias += sum(grad_out)   (accumulating)
template <typename T>
void conv3d_backward_weight(const T* grad_out, const T* in, T* grad_weight, T* grad_bias, const ConvGeom& g,
                            Exec exec);

/// Transposed convolution, kernel 2, stride 2 (exact 2x upsampling).
/// Weight layout [cin, cout, 2, 2, 2]; input [cin, d, h, w]; output [cout, 2d, 2h, 2w].
struct UpGeom {
    std::int64_t cin = 0, cout = 0;
    std::int64_t d = 0, h = 0, w = 0;  // input extent

    std::int64_t weight_count() const { return cin * cout * 8; }
};

template <typename T>
void convt2_forward(const T* in, const T* weight, const T* bias, T* out, const UpGeom& g, Exec exec);
template <typename T>
void convt2_backward_input(const T* grad_out, const T* weight, T* grad_in, const UpGeom& g, Exec exec);
template <typename T>
void convt2_backward_weight(const T* grad_out, const T* in, T* grad_weight, T* grad_bias, const UpGeom& g,
                            Exec exec);

/// Process-wide execution default used by the nn layers.
Exec default_exec();
void set_default_exec(Exec e);

}  // namespace mmseg::kernels
