// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/rng.hpp"
#include "mmseg/tensor.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace mmseg {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag) {
    return splitmix64(parent ^ splitmix64(fnv1a(tag.data(), tag.size())));
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
    return splitmix64(parent ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below(0)");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::int64_t> Rng::sample_without_replacement(std::int64_t n, std::int64_t k) {
    if (k < 0 || k > n) throw std::invalid_argument("sample_without_replacement: k out of range");
    std::vector<std::int64_t> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(k));
    for (std::int64_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
        out.push_back(pool[static_cast<std::size_t>(i)]);
    }
    return out;
}

}  // namespace mmseg
