// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "../common/oracles.hpp"

#include "mmseg/kernels/conv3d.hpp"
#include "mmseg/kernels/distance.hpp"

using namespace mmseg;
using kernels::Exec;

namespace {

std::vector<double> rand_vec(std::int64_t n, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.uniform(-1, 1);
    return v;
}

}  // namespace

TEST_CASE("conv3d forward matches the direct oracle, serial and parallel") {
    Rng rng(1);
    const kernels::ConvGeom g{3, 5, 6, 4, 7, 3};
    const auto in = rand_vec(g.cin * g.voxels(), rng), w = rand_vec(g.weight_count(), rng), b = rand_vec(g.cout, rng);
    std::vector<double> ref;
    oracle::conv3d(in, w, b, ref, 3, 5, {6, 4, 7});
    for (auto ex : {Exec::Serial, Exec::Parallel}) {
        std::vector<double> out(ref.size());
        kernels::conv3d_forward(in.data(), w.data(), b.data(), out.data(), g, ex);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv3d serial and parallel paths agree") {
    Rng rng(2);
    const kernels::ConvGeom g{8, 8, 16, 16, 16, 3};
    std::vector<float> in(static_cast<std::size_t>(g.cin * g.voxels())), w(static_cast<std::size_t>(g.weight_count())),
        b(static_cast<std::size_t>(g.cout)), go(static_cast<std::size_t>(g.cout * g.voxels()));
    for (auto* v : {&in, &w, &b, &go})
        for (auto& x : *v) x = static_cast<float>(rng.uniform(-1, 1));
    std::vector<float> o1(go.size()), o2(go.size()), gi1(in.size()), gi2(in.size()), gw1(w.size()), gw2(w.size()),
        gb1(b.size()), gb2(b.size());
    kernels::conv3d_forward(in.data(), w.data(), b.data(), o1.data(), g, Exec::Serial);
    kernels::conv3d_forward(in.data(), w.data(), b.data(), o2.data(), g, Exec::Parallel);
    CHECK(o1 == o2);
    kernels::conv3d_backward_input(go.data(), w.data(), gi1.data(), g, Exec::Serial);
    kernels::conv3d_backward_input(go.data(), w.data(), gi2.data(), g, Exec::Parallel);
    CHECK(gi1 == gi2);
    kernels::conv3d_backward_weight(go.data(), in.data(), gw1.data(), gb1.data(), g, Exec::Serial);
    kernels::conv3d_backward_weight(go.data(), in.data(), gw2.data(), gb2.data(), g, Exec::Parallel);
    // Weight reduction order differs between paths; the parallel one is still repeatable.
    for (std::size_t i = 0; i < gw1.size(); ++i) CHECK(gw2[i] == doctest::Approx(gw1[i]).epsilon(1e-4));
    for (std::size_t i = 0; i < gb1.size(); ++i) CHECK(gb2[i] == doctest::Approx(gb1[i]).epsilon(1e-4));
    std::vector<float> gw3(w.size()), gb3(b.size());
    kernels::conv3d_backward_weight(go.data(), in.data(), gw3.data(), gb3.data(), g, Exec::Parallel);
    CHECK(gw3 == gw2);
    CHECK(gb3 == gb2);
}

TEST_CASE("conv3d backward is the adjoint of forward") {
    // <conv(x), y> = <x, conv_T(y)> and d<conv(x), y>/dw = grad_weight.
    Rng rng(3);
    const kernels::ConvGeom g{2, 3, 4, 5, 3, 3};
    const auto x = rand_vec(g.cin * g.voxels(), rng), w = rand_vec(g.weight_count(), rng),
               y = rand_vec(g.cout * g.voxels(), rng);
    std::vector<double> zero_b(3, 0.0), out(y.size()), gi(x.size()), gw(w.size()), gb(3);
    kernels::conv3d_forward(x.data(), w.data(), zero_b.data(), out.data(), g, Exec::Serial);
    kernels::conv3d_backward_input(y.data(), w.data(), gi.data(), g, Exec::Serial);
    kernels::conv3d_backward_weight(y.data(), x.data(), gw.data(), gb.data(), g, Exec::Serial);
    double lhs = 0, rhs = 0, wdot = 0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += out[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * gi[i];
    for (std::size_t i = 0; i < w.size(); ++i) wdot += w[i] * gw[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK(lhs == doctest::Approx(wdot).epsilon(1e-12));
}

TEST_CASE("transposed 2x conv: adjoint and serial/parallel agreement") {
    Rng rng(4);
    const kernels::UpGeom g{3, 2, 2, 3, 2};
    const auto x = rand_vec(g.cin * 12, rng), w = rand_vec(g.weight_count(), rng), y = rand_vec(g.cout * 96, rng);
    std::vector<double> b(2, 0.0), out(y.size()), out2(y.size()), gi(x.size()), gw(w.size()), gb(2);
    kernels::convt2_forward(x.data(), w.data(), b.data(), out.data(), g, Exec::Serial);
    kernels::convt2_forward(x.data(), w.data(), b.data(), out2.data(), g, Exec::Parallel);
    CHECK(out == out2);
    kernels::convt2_backward_input(y.data(), w.data(), gi.data(), g, Exec::Serial);
    kernels::convt2_backward_weight(y.data(), x.data(), gw.data(), gb.data(), g, Exec::Serial);
    double lhs = 0, rhs = 0, wdot = 0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += out[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * gi[i];
    for (std::size_t i = 0; i < w.size(); ++i) wdot += w[i] * gw[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK(lhs == doctest::Approx(wdot).epsilon(1e-12));
}

TEST_CASE("squared EDT matches exhaustive search, serial and parallel") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const Extent3 e{5 + trial % 3, 6, 7};
        const auto seeds = oracle::random_mask(e.voxels(), rng, 0.05 + 0.05 * trial);
        const std::array<double, 3> sp{rng.uniform(0.5, 2), rng.uniform(0.5, 2), 1.0};
        const auto ref = oracle::squared_distance(seeds, e, sp);
        const auto a = kernels::squared_edt(seeds.data(), e, sp, Exec::Serial);
        const auto b = kernels::squared_edt(seeds.data(), e, sp, Exec::Parallel);
        CHECK(a == b);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            if (std::isinf(ref[i]))
                CHECK(std::isinf(a[i]));
            else
                CHECK(a[i] == doctest::Approx(ref[i]).epsilon(1e-12));
        }
    }
}
