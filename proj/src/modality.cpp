// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/modality.hpp"

#include <algorithm>
#include <stdexcept>

namespace mmseg {

std::vector<std::string> modality_names(int m) {
    std::vector<std::string> out;
    for (int i = 0; i < m; ++i)
        out.push_back(i < 4 ? canonical_modalities()[static_cast<std::size_t>(i)] : "M" + std::to_string(i));
    return out;
}

ModalityCode::ModalityCode(std::vector<std::uint8_t> bits)
    : ModalityCode(bits, modality_names(static_cast<int>(bits.size()))) {}

ModalityCode::ModalityCode(std::vector<std::uint8_t> bits, std::vector<std::string> names)
    : bits_(std::move(bits)), names_(std::move(names)) {
    if (bits_.size() != names_.size()) throw std::invalid_argument("modality code and name list differ in length");
    for (auto& b : bits_) {
        if (b > 1) throw std::invalid_argument("modality code bits must be 0 or 1");
    }
}

ModalityCode ModalityCode::all(int m) { return ModalityCode(std::vector<std::uint8_t>(static_cast<std::size_t>(m), 1)); }

ModalityCode ModalityCode::parse(const std::string& s) {
    std::vector<std::uint8_t> bits;
    for (char ch : s) {
        if (ch == '0' || ch == '1')
            bits.push_back(static_cast<std::uint8_t>(ch - '0'));
        else if (ch != ',' && ch != ' ' && ch != '[' && ch != ']')
            throw std::invalid_argument("cannot parse modality code '" + s + "'");
    }
    return ModalityCode(std::move(bits));
}

int ModalityCode::available_count() const {
    return static_cast<int>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<int> ModalityCode::available() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
        if ((*this)[i]) out.push_back(i);
    return out;
}

std::vector<int> ModalityCode::missing() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
        if (!(*this)[i]) out.push_back(i);
    return out;
}

std::string ModalityCode::str() const {
    std::string s;
    for (auto b : bits_) s.push_back(static_cast<char>('0' + b));
    return s;
}

std::vector<ModalityCode> sweep_codes(int m) {
    if (m == 4) {
        static const char* order[15] = {"0001", "0010", "0100", "1000", "0011", "0110", "1100", "0101",
                                        "1001", "1010", "1110", "1101", "1011", "0111", "1111"};
        std::vector<ModalityCode> out;
        for (const char* s : order) out.push_back(ModalityCode::parse(s));
        return out;
    }
    std::vector<ModalityCode> out;
    for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) bits[static_cast<std::size_t>(i)] = (mask >> (m - 1 - i)) & 1u;
        out.emplace_back(std::move(bits));
    }
    std::stable_sort(out.begin(), out.end(), [](const ModalityCode& a, const ModalityCode& b) {
        return a.available_count() < b.available_count();
    });
    return out;
}

bool MultimodalVolume::channel_is_zero(int c) const {
    const auto n = voxels.numel() / voxels.dim(0);
    const float* p = voxels.channel(c);
    return std::all_of(p, p + n, [](float v) { return v == 0.0f; });
}

ModalityCode MultimodalVolume::observed_code() const {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(modalities()));
    for (int c = 0; c < modalities(); ++c) bits[static_cast<std::size_t>(c)] = channel_is_zero(c) ? 0 : 1;
    return ModalityCode(std::move(bits));
}

void MultimodalVolume::apply_code(const ModalityCode& code) {
    if (code.size() != modalities()) throw std::invalid_argument("modality code length does not match volume");
    const auto n = voxels.numel() / voxels.dim(0);
    for (int c = 0; c < modalities(); ++c)
        if (!code[c]) std::fill(voxels.channel(c), voxels.channel(c) + n, 0.0f);
}

bool RegionMasks::nested() const {
    const auto n = regions.numel() / 3;
    const auto* wt = regions.channel(0);
    const auto* tc = regions.channel(1);
    const auto* et = regions.channel(2);
    for (std::int64_t i = 0; i < n; ++i) {
        if (et[i] > tc[i] || tc[i] > wt[i]) return false;
    }
    return true;
}

std::int64_t RegionMasks::count(Region r) const {
    const auto n = regions.numel() / 3;
    const auto* p = regions.channel(static_cast<int>(r));
    return std::count(p, p + n, std::uint8_t{1});
}

RegionMasks masks_from_labels(const Tensor<std::uint8_t>& labels) {
    const auto e = labels.extent();
    RegionMasks out;
    out.regions = Tensor<std::uint8_t>({3, e.d, e.h, e.w});
    const auto n = e.voxels();
    auto* wt = out.regions.channel(0);
    auto* tc = out.regions.channel(1);
    auto* et = out.regions.channel(2);
    for (std::int64_t i = 0; i < n; ++i) {
        switch (labels[i]) {
            case 0: break;
            case 1: wt[i] = tc[i] = 1; break;
            case 2: wt[i] = 1; break;
            case 4: wt[i] = tc[i] = et[i] = 1; break;
            default:
                throw std::invalid_argument("unknown label value " + std::to_string(int{labels[i]}) +
                                            " (expected one of 0, 1, 2, 4)");
        }
    }
    out.labels = labels;
    return out;
}

}  // namespace mmseg
