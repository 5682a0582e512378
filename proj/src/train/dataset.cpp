// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/train/dataset.hpp"

#include "mmseg/nn/losses.hpp"
#include "mmseg/rng.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mmseg::train {

std::vector<Sample> make_samples(const std::vector<Subject>& subjects, const data::DatasetSplit& split) {
    std::vector<Sample> out;
    out.reserve(subjects.size());
    for (const auto& s : subjects) {
        Sample x{s.volume.subject_id, s.volume, s.masks, split.code_of(s.volume.subject_id)};
        x.volume.apply_code(x.code);
        out.push_back(std::move(x));
    }
    return out;
}

std::vector<Sample> full_samples(const std::vector<Subject>& subjects) {
    std::vector<Sample> out;
    for (const auto& s : subjects)
        out.push_back({s.volume.subject_id, s.volume, s.masks, ModalityCode::all(s.volume.modalities())});
    return out;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    return order;
}

Prepared prepare(const Sample& s, Extent3 crop, bool train, std::uint64_t seed, const data::AugmentConfig& aug) {
    auto p = data::preprocess(s.volume, s.masks, crop, train, seed, aug);
    Prepared out;
    out.x = std::move(p.volume.voxels);
    out.targets = nn::region_targets<float>(p.masks);
    out.masks = std::move(p.masks);
    return out;
}

void check_finite(double v, const std::string& stage, int epoch, const std::string& sample_id) {
    if (!std::isfinite(v))
        throw std::runtime_error("non-finite loss in " + stage + " at epoch " + std::to_string(epoch) +
                                 ", sample '" + sample_id + "'");
}

CsvLog::CsvLog(const std::filesystem::path& path, const std::string& header) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    os_.open(path);
    if (!os_) throw std::runtime_error("cannot write " + path.string());
    os_ << header << '\n';
}

}  // namespace mmseg::train
