// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Serial reference vs OpenMP kernels.

#include "mmseg/kernels/conv3d.hpp"
#include "mmseg/kernels/distance.hpp"
#include "mmseg/rng.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace mmseg;
using kernels::Exec;

namespace {

std::vector<float> random(std::int64_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
    return v;
}

void conv_forward(benchmark::State& st, Exec ex) {
    const auto s = st.range(0), c = st.range(1);
    const kernels::ConvGeom g{c, c, s, s, s, 3};
    const auto in = random(g.cin * g.voxels(), 1), w = random(g.weight_count(), 2), b = random(g.cout, 3);
    std::vector<float> out(static_cast<std::size_t>(g.cout * g.voxels()));
    for (auto _ : st) {
        kernels::conv3d_forward(in.data(), w.data(), b.data(), out.data(), g, ex);
        benchmark::DoNotOptimize(out.data());
    }
    st.counters["GMAC/s"] = benchmark::Counter(static_cast<double>(g.voxels() * g.weight_count()) * 1e-9,
                                              benchmark::Counter::kIsIterationInvariantRate);
}

void conv_backward(benchmark::State& st, Exec ex) {
    const auto s = st.range(0), c = st.range(1);
    const kernels::ConvGeom g{c, c, s, s, s, 3};
    const auto in = random(g.cin * g.voxels(), 1), w = random(g.weight_count(), 2), go = random(g.cout * g.voxels(), 3);
    std::vector<float> gi(in.size()), gw(w.size()), gb(static_cast<std::size_t>(g.cout));
    for (auto _ : st) {
        kernels::conv3d_backward_input(go.data(), w.data(), gi.data(), g, ex);
        kernels::conv3d_backward_weight(go.data(), in.data(), gw.data(), gb.data(), g, ex);
        benchmark::DoNotOptimize(gw.data());
    }
}

void edt(benchmark::State& st, Exec ex) {
    const auto s = st.range(0);
    const Extent3 e{s, s, s};
    Rng rng(4);
    std::vector<std::uint8_t> seeds(static_cast<std::size_t>(e.voxels()));
    for (auto& v : seeds) v = rng.bernoulli(0.01);
    for (auto _ : st) benchmark::DoNotOptimize(kernels::squared_edt(seeds.data(), e, {1, 1, 1}, ex));
}

}  // namespace

BENCHMARK_CAPTURE(conv_forward, serial, Exec::Serial)->Args({32, 8})->Args({16, 32})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(conv_forward, parallel, Exec::Parallel)->Args({32, 8})->Args({16, 32})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(conv_backward, serial, Exec::Serial)->Args({32, 8})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(conv_backward, parallel, Exec::Parallel)->Args({32, 8})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(edt, serial, Exec::Serial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(edt, parallel, Exec::Parallel)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
