// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace mmseg {

/// splitmix64 finalizer; the seed fan-out primitive for every stage.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derive a child seed from a parent seed and a stage tag:
///   child = splitmix64(parent ^ splitmix64(fnv1a(tag)))
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

/// Seeded generator with platform-independent distribution mappings.
/// std::mt19937_64 is fully specified by the standard; the std
/// distributions are not, so the mappings below are written out.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n) via rejection (no modulo bias).
    std::uint64_t below(std::uint64_t n);
    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t between(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }
    bool bernoulli(double p) { return uniform() < p; }
    /// Standard normal via Box-Muller (no cached second value).
    double normal();

    /// Choose k distinct items of [0, n), in draw order (partial Fisher-Yates).
    std::vector<std::int64_t> sample_without_replacement(std::int64_t n, std::int64_t k);

    template <typename V>
    void shuffle(std::vector<V>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace mmseg
