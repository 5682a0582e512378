// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/kernels/distance.hpp"

#include <limits>

namespace mmseg::kernels {

namespace {

using i64 = std::int64_t;
constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D transform of n samples at stride `stride`, sample spacing s.
// Scratch buffers are sized n (f, d) and n + 1 (v, z).
void edt_line(double* data, i64 n, i64 stride, double s, double* f, i64* v, double* z) {
    i64 k = -1;
    for (i64 q = 0; q < n; ++q) {
        f[q] = data[q * stride];
        if (f[q] == kInf) continue;
        const double xq = s * static_cast<double>(q);
        while (k >= 0) {
            const double xv = s * static_cast<double>(v[k]);
            const double sep = ((f[q] + xq * xq) - (f[v[k]] + xv * xv)) / (2.0 * (xq - xv));
            if (sep <= z[k]) {
                --k;
                continue;
            }
            ++k;
            v[k] = q;
            z[k] = sep;
            break;
        }
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
        }
    }
    if (k < 0) return;  // no finite sample on this line
    z[k + 1] = kInf;
    i64 j = 0;
    for (i64 q = 0; q < n; ++q) {
        const double xq = s * static_cast<double>(q);
        while (z[j + 1] < xq) ++j;
        const double dx = xq - s * static_cast<double>(v[j]);
        data[q * stride] = dx * dx + f[v[j]];
    }
}

void pass(std::vector<double>& g, i64 lines_outer, i64 lines_inner, i64 n, i64 stride, i64 outer_step, double s,
          bool parallel) {
#pragma omp parallel if (parallel)
    {
        std::vector<double> f(static_cast<std::size_t>(n)), z(static_cast<std::size_t>(n) + 1);
        std::vector<i64> v(static_cast<std::size_t>(n));
#pragma omp for schedule(static)
        for (i64 a = 0; a < lines_outer; ++a)
            for (i64 b = 0; b < lines_inner; ++b) {
                // Lines along the axis with the given stride; (a, b) enumerate the other two axes.
                double* base = g.data() + a * outer_step + b * (stride == 1 ? n : 1);
                edt_line(base, n, stride, s, f.data(), v.data(), z.data());
            }
    }
}

}  // namespace

std::vector<double> squared_edt(const std::uint8_t* seeds, Extent3 e, const std::array<double, 3>& spacing,
                                Exec exec) {
    const i64 vox = e.voxels();
    std::vector<double> g(static_cast<std::size_t>(vox));
    for (i64 i = 0; i < vox; ++i) g[static_cast<std::size_t>(i)] = seeds[i] ? 0.0 : kInf;
    const bool par = exec == Exec::Parallel;
    // W lines: outer z (step h*w), inner y (step w).
    pass(g, e.d, e.h, e.w, 1, e.h * e.w, spacing[2], par);
    // H lines: outer z, inner x (step 1), stride w.
    pass(g, e.d, e.w, e.h, e.w, e.h * e.w, spacing[1], par);
    // D lines: outer y (step w), inner x (step 1), stride h*w.
    pass(g, e.h, e.w, e.d, e.h * e.w, e.w, spacing[0], par);
    return g;
}

}  // namespace mmseg::kernels
