// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/hypernet/prompt.hpp"

#include <stdexcept>

namespace mmseg::hyper {

std::string build_prompt(const ModalityCode& code) {
    const auto avail = code.available();
    if (avail.empty()) throw std::invalid_argument("build_prompt: code " + code.str() + " has no available modality");
    const auto& names = code.names();
    std::string list;
    for (std::size_t i = 0; i < avail.size(); ++i) {
        if (i > 0) list += (i + 1 == avail.size()) ? " and " : ", ";
        list += names.at(static_cast<std::size_t>(avail[i]));
    }
    return std::string(kPromptPrefix) + " " + list;
}

}  // namespace mmseg::hyper
