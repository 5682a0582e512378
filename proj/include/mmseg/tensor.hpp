// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensor used throughout the framework. Volumes are stored as
// [C, D, H, W] with W fastest; the batch dimension is implicit (one sample).

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmseg {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::int64_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& s);

/// Spatial extent of a volume, ordered (D, H, W).
struct Extent3 {
    std::int64_t d = 0, h = 0, w = 0;

    std::int64_t voxels() const { return d * h * w; }
    bool operator==(const Extent3&) const = default;
};

template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T{0})
        : shape_(std::move(shape)), data_(static_cast<std::size_t>(mmseg::numel(shape_)), fill) {}
    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<std::int64_t>(data_.size()) != mmseg::numel(shape_))
            throw std::invalid_argument("tensor data size does not match shape " + shape_str(shape_));
    }

    static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape_); }

    const Shape& shape() const { return shape_; }
    std::int64_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const { return shape_.size(); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> span() { return data_; }
    std::span<const T> span() const { return data_; }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    /// Channel-major volume accessors for rank-4 tensors.
    Extent3 extent() const {
        if (shape_.size() != 4) throw std::logic_error("extent() requires a [C,D,H,W] tensor");
        return {shape_[1], shape_[2], shape_[3]};
    }
    std::int64_t channels() const { return shape_.at(0); }
    T* channel(std::int64_t c) { return data() + c * (numel() / shape_.at(0)); }
    const T* channel(std::int64_t c) const { return data() + c * (numel() / shape_.at(0)); }
    T& at(std::int64_t c, std::int64_t z, std::int64_t y, std::int64_t x) {
        return data_[static_cast<std::size_t>(((c * shape_[1] + z) * shape_[2] + y) * shape_[3] + x)];
    }
    const T& at(std::int64_t c, std::int64_t z, std::int64_t y, std::int64_t x) const {
        return data_[static_cast<std::size_t>(((c * shape_[1] + z) * shape_[2] + y) * shape_[3] + x)];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(T{0}); }
    void reshape(Shape s) {
        if (mmseg::numel(s) != numel()) throw std::invalid_argument("reshape changes element count");
        shape_ = std::move(s);
    }

    Tensor& operator+=(const Tensor& o) {
        check_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor& operator*=(T s) {
        for (auto& v : data_) v *= s;
        return *this;
    }
    /// this += s * o
    void axpy(T s, const Tensor& o) {
        check_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[static_cast<std::int64_t>(i)] = static_cast<U>(data_[i]);
        return out;
    }

    bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

private:
    void check_same(const Tensor& o) const {
        if (shape_ != o.shape_)
            throw std::invalid_argument("shape mismatch " + shape_str(shape_) + " vs " + shape_str(o.shape_));
    }

    Shape shape_;
    std::vector<T> data_;
};

/// Bitwise FNV-1a checksum over the raw bytes of a buffer.
std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t seed = 1469598103934665603ULL);

template <typename T>
std::uint64_t checksum(const Tensor<T>& t, std::uint64_t seed = 1469598103934665603ULL) {
    return fnv1a(t.data(), static_cast<std::size_t>(t.numel()) * sizeof(T), seed);
}

}  // namespace mmseg
