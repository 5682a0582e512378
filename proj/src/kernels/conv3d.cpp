// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/kernels/conv3d.hpp"

#include <algorithm>
#include <atomic>
#include <vector>

namespace mmseg::kernels {

namespace {

std::atomic<Exec> g_default_exec{Exec::Parallel};

using i64 = std::int64_t;

// ---------------------------------------------------------------------------
// Serial reference: direct definition, one output element at a time.

template <typename T>
void conv_fwd_serial(const T* in, const T* wt, const T* bias, T* out, const ConvGeom& g) {
    const i64 pad = g.k / 2;
    for (i64 co = 0; co < g.cout; ++co)
        for (i64 z = 0; z < g.d; ++z)
            for (i64 y = 0; y < g.h; ++y)
                for (i64 x = 0; x < g.w; ++x) {
                    T acc = bias ? bias[co] : T{0};
                    for (i64 ci = 0; ci < g.cin; ++ci)
                        for (i64 kz = 0; kz < g.k; ++kz)
                            for (i64 ky = 0; ky < g.k; ++ky)
                                for (i64 kx = 0; kx < g.k; ++kx) {
                                    const i64 iz = z + kz - pad, iy = y + ky - pad, ix = x + kx - pad;
                                    if (iz < 0 || iz >= g.d || iy < 0 || iy >= g.h || ix < 0 || ix >= g.w) continue;
                                    acc += wt[(((co * g.cin + ci) * g.k + kz) * g.k + ky) * g.k + kx] *
                                           in[((ci * g.d + iz) * g.h + iy) * g.w + ix];
                                }
                    out[((co * g.d + z) * g.h + y) * g.w + x] = acc;
                }
}

template <typename T>
void conv_bwd_input_serial(const T* gout, const T* wt, T* gin, const ConvGeom& g) {
    const i64 pad = g.k / 2;
    std::fill(gin, gin + g.cin * g.voxels(), T{0});
    for (i64 co = 0; co < g.cout; ++co)
        for (i64 z = 0; z < g.d; ++z)
            for (i64 y = 0; y < g.h; ++y)
                for (i64 x = 0; x < g.w; ++x) {
                    const T go = gout[((co * g.d + z) * g.h + y) * g.w + x];
                    for (i64 ci = 0; ci < g.cin; ++ci)
                        for (i64 kz = 0; kz < g.k; ++kz)
                            for (i64 ky = 0; ky < g.k; ++ky)
                                for (i64 kx = 0; kx < g.k; ++kx) {
                                    const i64 iz = z + kz - pad, iy = y + ky - pad, ix = x + kx - pad;
                                    if (iz < 0 || iz >= g.d || iy < 0 || iy >= g.h || ix < 0 || ix >= g.w) continue;
                                    gin[((ci * g.d + iz) * g.h + iy) * g.w + ix] +=
                                        wt[(((co * g.cin + ci) * g.k + kz) * g.k + ky) * g.k + kx] * go;
                                }
                }
}

template <typename T>
void conv_bwd_weight_serial(const T* gout, const T* in, T* gw, T* gb, const ConvGeom& g) {
    const i64 pad = g.k / 2;
    for (i64 co = 0; co < g.cout; ++co)
        for (i64 z = 0; z < g.d; ++z)
            for (i64 y = 0; y < g.h; ++y)
                for (i64 x = 0; x < g.w; ++x) {
                    const T go = gout[((co * g.d + z) * g.h + y) * g.w + x];
                    if (gb) gb[co] += go;
                    for (i64 ci = 0; ci < g.cin; ++ci)
                        for (i64 kz = 0; kz < g.k; ++kz)
                            for (i64 ky = 0; ky < g.k; ++ky)
                                for (i64 kx = 0; kx < g.k; ++kx) {
                                    const i64 iz = z + kz - pad, iy = y + ky - pad, ix = x + kx - pad;
                                    if (iz < 0 || iz >= g.d || iy < 0 || iy >= g.h || ix < 0 || ix >= g.w) continue;
                                    gw[(((co * g.cin + ci) * g.k + kz) * g.k + ky) * g.k + kx] +=
                                        go * in[((ci * g.d + iz) * g.h + iy) * g.w + ix];
                                }
                }
}

// ---------------------------------------------------------------------------
// Parallel path. Inputs are zero-padded once so the inner loops carry no
// bounds checks; output rows are computed in register-resident chunks of VL
// voxels for CB output channels at a time.

/// Copy [c, d, h, w] into a zero-padded [c, d+2p, h+2p, w+2p] buffer.
template <typename T>
std::vector<T> pad_volume(const T* in, i64 c, i64 d, i64 h, i64 w, i64 p) {
    const i64 dp = d + 2 * p, hp = h + 2 * p, wp = w + 2 * p;
    std::vector<T> out(static_cast<std::size_t>(c * dp * hp * wp), T{0});
#pragma omp parallel for schedule(static)
    for (i64 ch = 0; ch < c; ++ch)
        for (i64 z = 0; z < d; ++z)
            for (i64 y = 0; y < h; ++y)
                std::copy(in + ((ch * d + z) * h + y) * w, in + ((ch * d + z) * h + y) * w + w,
                          out.data() + ((ch * dp + z + p) * hp + y + p) * wp + p);
    return out;
}

template <typename T, int VL, int CB>
void conv_rows(const T* padded, const T* wt, const T* bias, T* out, const ConvGeom& g, i64 co0) {
    const i64 k = g.k, k3 = k * k * k, p = k / 2;
    const i64 dp = g.d + 2 * p, hp = g.h + 2 * p, wp = g.w + 2 * p;
    for (i64 z = 0; z < g.d; ++z)
        for (i64 y = 0; y < g.h; ++y)
            for (i64 x0 = 0; x0 < g.w; x0 += VL) {
                T acc[CB][VL];
                for (int b = 0; b < CB; ++b)
                    for (int v = 0; v < VL; ++v) acc[b][v] = bias ? bias[co0 + b] : T{0};
                for (i64 ci = 0; ci < g.cin; ++ci) {
                    const T* wc[CB];
                    for (int b = 0; b < CB; ++b) wc[b] = wt + ((co0 + b) * g.cin + ci) * k3;
                    for (i64 kz = 0; kz < k; ++kz)
                        for (i64 ky = 0; ky < k; ++ky) {
                            const T* row = padded + ((ci * dp + z + kz) * hp + y + ky) * wp + x0;
                            const i64 tap = (kz * k + ky) * k;
                            for (i64 kx = 0; kx < k; ++kx) {
                                const T* r = row + kx;
                                for (int b = 0; b < CB; ++b) {
                                    const T wv = wc[b][tap + kx];
#pragma omp simd
                                    for (int v = 0; v < VL; ++v) acc[b][v] += wv * r[v];
                                }
                            }
                        }
                }
                for (int b = 0; b < CB; ++b) {
                    T* dst = out + ((co0 + b) * g.d + z) * g.h * g.w + y * g.w + x0;
                    for (int v = 0; v < VL; ++v) dst[v] = acc[b][v];
                }
            }
}

template <typename T, int VL>
void conv_fwd_blocked(const T* padded, const T* wt, const T* bias, T* out, const ConvGeom& g) {
    constexpr int CB = 4;
    const i64 blocks = g.cout / CB;
#pragma omp parallel for schedule(static)
    for (i64 blk = 0; blk < blocks; ++blk) conv_rows<T, VL, CB>(padded, wt, bias, out, g, blk * CB);
    for (i64 co = blocks * CB; co < g.cout; ++co) conv_rows<T, VL, 1>(padded, wt, bias, out, g, co);
}

template <typename T>
void conv_fwd_parallel(const T* in, const T* wt, const T* bias, T* out, const ConvGeom& g) {
    const i64 p = g.k / 2;
    const auto padded = pad_volume(in, g.cin, g.d, g.h, g.w, p);
    if (g.w % 16 == 0)
        conv_fwd_blocked<T, 16>(padded.data(), wt, bias, out, g);
    else if (g.w % 8 == 0)
        conv_fwd_blocked<T, 8>(padded.data(), wt, bias, out, g);
    else if (g.w % 4 == 0)
        conv_fwd_blocked<T, 4>(padded.data(), wt, bias, out, g);
    else
        conv_fwd_blocked<T, 1>(padded.data(), wt, bias, out, g);
}

template <typename T>
void conv_bwd_input_parallel(const T* gout, const T* wt, T* gin, const ConvGeom& g) {
    // The input gradient of a stride-1 same convolution is a same convolution
    // of grad_out with channel-transposed, spatially flipped weights.
    const i64 k = g.k, k3 = k * k * k;
    std::vector<T> flipped(static_cast<std::size_t>(g.weight_count()));
    for (i64 co = 0; co < g.cout; ++co)
        for (i64 ci = 0; ci < g.cin; ++ci)
            for (i64 t = 0; t < k3; ++t)
                flipped[static_cast<std::size_t>((ci * g.cout + co) * k3 + (k3 - 1 - t))] = wt[(co * g.cin + ci) * k3 + t];
    ConvGeom tg = g;
    tg.cin = g.cout;
    tg.cout = g.cin;
    conv_fwd_parallel<T>(gout, flipped.data(), nullptr, gin, tg);
}

template <typename T, int VL>
void conv_bwd_weight_blocked(const T* gout, const T* padded, T* gw, const ConvGeom& g) {
    const i64 k = g.k, k3 = k * k * k, p = k / 2, vox = g.voxels();
    const i64 dp = g.d + 2 * p, hp = g.h + 2 * p, wp = g.w + 2 * p;
    constexpr int KMAX = 3;
#pragma omp parallel for schedule(static)
    for (i64 pair = 0; pair < g.cout * g.cin; ++pair) {
        const i64 co = pair / g.cin, ci = pair % g.cin;
        const T* go = gout + co * vox;
        T* wk = gw + (co * g.cin + ci) * k3;
        for (i64 kz = 0; kz < k; ++kz)
            for (i64 ky = 0; ky < k; ++ky) {
                T acc[KMAX][VL] = {};
                for (i64 z = 0; z < g.d; ++z)
                    for (i64 y = 0; y < g.h; ++y) {
                        const T* grow = go + (z * g.h + y) * g.w;
                        const T* prow = padded + ((ci * dp + z + kz) * hp + y + ky) * wp;
                        for (i64 x0 = 0; x0 < g.w; x0 += VL)
                            for (i64 kx = 0; kx < k; ++kx) {
                                const T* r = prow + x0 + kx;
#pragma omp simd
                                for (int v = 0; v < VL; ++v) acc[kx][v] += grow[x0 + v] * r[v];
                            }
                    }
                for (i64 kx = 0; kx < k; ++kx) {
                    T s{0};
                    for (int v = 0; v < VL; ++v) s += acc[kx][v];
                    wk[(kz * k + ky) * k + kx] += s;
                }
            }
    }
}

template <typename T>
void conv_bwd_weight_parallel(const T* gout, const T* in, T* gw, T* gb, const ConvGeom& g) {
    const i64 vox = g.voxels();
    if (gb) {
        for (i64 co = 0; co < g.cout; ++co) {
            T s{0};
            for (i64 i = 0; i < vox; ++i) s += gout[co * vox + i];
            gb[co] += s;
        }
    }
    if (g.k > 3) {
        conv_bwd_weight_serial<T>(gout, in, gw, nullptr, g);
        return;
    }
    const auto padded = pad_volume(in, g.cin, g.d, g.h, g.w, g.k / 2);
    if (g.w % 16 == 0)
        conv_bwd_weight_blocked<T, 16>(gout, padded.data(), gw, g);
    else if (g.w % 8 == 0)
        conv_bwd_weight_blocked<T, 8>(gout, padded.data(), gw, g);
    else if (g.w % 4 == 0)
        conv_bwd_weight_blocked<T, 4>(gout, padded.data(), gw, g);
    else
        conv_bwd_weight_blocked<T, 1>(gout, padded.data(), gw, g);
}

// ---------------------------------------------------------------------------
// Transposed 2x2x2 stride-2 convolution.

template <typename T>
void convt_fwd(const T* in, const T* wt, const T* bias, T* out, const UpGeom& g, bool parallel) {
    const i64 od = 2 * g.d, oh = 2 * g.h, ow = 2 * g.w, ovox = od * oh * ow, ivox = g.d * g.h * g.w;
#pragma omp parallel for schedule(static) if (parallel)
    for (i64 co = 0; co < g.cout; ++co) {
        T* dst = out + co * ovox;
        std::fill(dst, dst + ovox, bias ? bias[co] : T{0});
        for (i64 ci = 0; ci < g.cin; ++ci) {
            const T* src = in + ci * ivox;
            const T* wk = wt + (ci * g.cout + co) * 8;
            for (i64 z = 0; z < g.d; ++z)
                for (i64 a = 0; a < 2; ++a)
                    for (i64 y = 0; y < g.h; ++y)
                        for (i64 b = 0; b < 2; ++b) {
                            T* drow = dst + ((2 * z + a) * oh + 2 * y + b) * ow;
                            const T* srow = src + (z * g.h + y) * g.w;
                            const T w0 = wk[(a * 2 + b) * 2 + 0], w1 = wk[(a * 2 + b) * 2 + 1];
                            for (i64 x = 0; x < g.w; ++x) {
                                drow[2 * x] += w0 * srow[x];
                                drow[2 * x + 1] += w1 * srow[x];
                            }
                        }
        }
    }
}

template <typename T>
void convt_bwd_input(const T* gout, const T* wt, T* gin, const UpGeom& g, bool parallel) {
    const i64 oh = 2 * g.h, ow = 2 * g.w, ovox = 8 * g.d * g.h * g.w, ivox = g.d * g.h * g.w;
#pragma omp parallel for schedule(static) if (parallel)
    for (i64 ci = 0; ci < g.cin; ++ci) {
        T* dst = gin + ci * ivox;
        std::fill(dst, dst + ivox, T{0});
        for (i64 co = 0; co < g.cout; ++co) {
            const T* src = gout + co * ovox;
            const T* wk = wt + (ci * g.cout + co) * 8;
            for (i64 z = 0; z < g.d; ++z)
                for (i64 a = 0; a < 2; ++a)
                    for (i64 y = 0; y < g.h; ++y)
                        for (i64 b = 0; b < 2; ++b) {
                            const T* srow = src + ((2 * z + a) * oh + 2 * y + b) * ow;
                            T* drow = dst + (z * g.h + y) * g.w;
                            const T w0 = wk[(a * 2 + b) * 2 + 0], w1 = wk[(a * 2 + b) * 2 + 1];
                            for (i64 x = 0; x < g.w; ++x) drow[x] += w0 * srow[2 * x] + w1 * srow[2 * x + 1];
                        }
        }
    }
}

template <typename T>
void convt_bwd_weight(const T* gout, const T* in, T* gw, T* gb, const UpGeom& g, bool parallel) {
    const i64 oh = 2 * g.h, ow = 2 * g.w, ovox = 8 * g.d * g.h * g.w, ivox = g.d * g.h * g.w;
    if (gb) {
        for (i64 co = 0; co < g.cout; ++co) {
            T s{0};
            for (i64 i = 0; i < ovox; ++i) s += gout[co * ovox + i];
            gb[co] += s;
        }
    }
#pragma omp parallel for schedule(static) if (parallel)
    for (i64 pair = 0; pair < g.cin * g.cout; ++pair) {
        const i64 ci = pair / g.cout, co = pair % g.cout;
        const T* src = in + ci * ivox;
        const T* go = gout + co * ovox;
        T acc[8] = {};
        for (i64 z = 0; z < g.d; ++z)
            for (i64 a = 0; a < 2; ++a)
                for (i64 y = 0; y < g.h; ++y)
                    for (i64 b = 0; b < 2; ++b) {
                        const T* grow = go + ((2 * z + a) * oh + 2 * y + b) * ow;
                        const T* srow = src + (z * g.h + y) * g.w;
                        T s0{0}, s1{0};
                        for (i64 x = 0; x < g.w; ++x) {
                            s0 += grow[2 * x] * srow[x];
                            s1 += grow[2 * x + 1] * srow[x];
                        }
                        acc[(a * 2 + b) * 2 + 0] += s0;
                        acc[(a * 2 + b) * 2 + 1] += s1;
                    }
        T* wk = gw + pair * 8;
        for (int t = 0; t < 8; ++t) wk[t] += acc[t];
    }
}

}  // namespace

Exec default_exec() { return g_default_exec.load(); }
void set_default_exec(Exec e) { g_default_exec.store(e); }

template <typename T>
void conv3d_forward(const T* in, const T* weight, const T* bias, T* out, const ConvGeom& g, Exec exec) {
    if (exec == Exec::Serial)
        conv_fwd_serial(in, weight, bias, out, g);
    else
        conv_fwd_parallel(in, weight, bias, out, g);
}

template <typename T>
void conv3d_backward_input(const T* grad_out, const T* weight, T* grad_in, const ConvGeom& g, Exec exec) {
    if (exec == Exec::Serial)
        conv_bwd_input_serial(grad_out, weight, grad_in, g);
    else
        conv_bwd_input_parallel(grad_out, weight, grad_in, g);
}

template <typename T>
void conv3d_backward_weight(const T* grad_out, const T* in, T* grad_weight, T* grad_bias, const ConvGeom& g,
                            Exec exec) {
    if (exec == Exec::Serial)
        conv_bwd_weight_serial(grad_out, in, grad_weight, grad_bias, g);
    else
        conv_bwd_weight_parallel(grad_out, in, grad_weight, grad_bias, g);
}

template <typename T>
void convt2_forward(const T* in, const T* weight, const T* bias, T* out, const UpGeom& g, Exec exec) {
    convt_fwd(in, weight, bias, out, g, exec == Exec::Parallel);
}

template <typename T>
void convt2_backward_input(const T* grad_out, const T* weight, T* grad_in, const UpGeom& g, Exec exec) {
    convt_bwd_input(grad_out, weight, grad_in, g, exec == Exec::Parallel);
}

template <typename T>
void convt2_backward_weight(const T* grad_out, const T* in, T* grad_weight, T* grad_bias, const UpGeom& g,
                            Exec exec) {
    convt_bwd_weight(grad_out, in, grad_weight, grad_bias, g, exec == Exec::Parallel);
}

#define MMSEG_INSTANTIATE(T)                                                                               \
    template void conv3d_forward<T>(const T*, const T*, const T*, T*, const ConvGeom&, Exec);              \
    template void conv3d_backward_input<T>(const T*, const T*, T*, const ConvGeom&, Exec);                 \
    template void conv3d_backward_weight<T>(const T*, const T*, T*, T*, const ConvGeom&, Exec);            \
    template void convt2_forward<T>(const T*, const T*, const T*, T*, const UpGeom&, Exec);                \
    template void convt2_backward_input<T>(const T*, const T*, T*, const UpGeom&, Exec);                   \
    template void convt2_backward_weight<T>(const T*, const T*, T*, T*, const UpGeom&, Exec);

MMSEG_INSTANTIATE(float)
MMSEG_INSTANTIATE(double)
#undef MMSEG_INSTANTIATE

}  // namespace mmseg::kernels
