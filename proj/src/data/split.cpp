// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/data/split.hpp"

#include "mmseg/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <set>
#include <stdexcept>

namespace mmseg::data {

ModalityCode DatasetSplit::code_of(const std::string& id) const {
    for (const auto& f : full)
        if (f == id) return ModalityCode::all(modalities);
    for (const auto& e : incomplete)
        if (e.id == id) return e.code;
    throw std::out_of_range("subject '" + id + "' is not part of the split");
}

DatasetSplit build_split(const std::vector<std::string>& subject_ids, double fm_ratio, std::uint64_t seed,
                         int modalities) {
    return build_split(subject_ids, fm_ratio, seed, modalities, {1, modalities - 1});
}

DatasetSplit build_split(const std::vector<std::string>& subject_ids, double fm_ratio, std::uint64_t seed,
                         int modalities, MissingRange range) {
    if (subject_ids.empty()) throw std::invalid_argument("build_split: empty subject list");
    if (!(fm_ratio > 0.0) || fm_ratio > 1.0)
        throw std::invalid_argument("build_split: fm_ratio must be in (0, 1]; at least one full-modality subject is "
                                    "required for distribution approximation");
    if (modalities < 2) throw std::invalid_argument("build_split: need at least 2 modalities");
    if (range.lo < 1 || range.hi > modalities - 1 || range.lo > range.hi)
        throw std::invalid_argument("build_split: missing count range must lie within [1, M-1]");
    if (std::set<std::string>(subject_ids.begin(), subject_ids.end()).size() != subject_ids.size())
        throw std::invalid_argument("build_split: duplicate subject ids");

    const auto n = static_cast<long>(subject_ids.size());
    const long n_full = std::max(1L, std::lround(fm_ratio * static_cast<double>(n)));

    DatasetSplit out;
    out.fm_ratio = fm_ratio;
    out.seed = seed;
    out.modalities = modalities;

    Rng rng(derive_seed(seed, "split"));
    auto order = subject_ids;
    rng.shuffle(order);
    for (long i = 0; i < n; ++i) {
        const auto& id = order[static_cast<std::size_t>(i)];
        if (i < n_full) {
            out.full.push_back(id);
            continue;
        }
        const int k = static_cast<int>(rng.between(range.lo, range.hi));
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(modalities), 1);
        for (auto m : rng.sample_without_replacement(modalities, k)) bits[static_cast<std::size_t>(m)] = 0;
        out.incomplete.push_back({id, ModalityCode(std::move(bits))});
    }
    return out;
}

nlohmann::json split_to_json(const DatasetSplit& s) {
    nlohmann::json j;
    j["fm_ratio"] = s.fm_ratio;
    j["seed"] = s.seed;
    j["modalities"] = s.modalities;
    j["full"] = s.full;
    j["incomplete"] = nlohmann::json::array();
    for (const auto& e : s.incomplete) j["incomplete"].push_back({{"id", e.id}, {"code", e.code.bits()}});
    return j;
}

DatasetSplit split_from_json(const nlohmann::json& j) {
    DatasetSplit s;
    s.fm_ratio = j.at("fm_ratio").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.modalities = j.value("modalities", 4);
    s.full = j.at("full").get<std::vector<std::string>>();
    for (const auto& e : j.at("incomplete"))
        s.incomplete.push_back({e.at("id").get<std::string>(), ModalityCode(e.at("code").get<std::vector<std::uint8_t>>())});
    return s;
}

}  // namespace mmseg::data
