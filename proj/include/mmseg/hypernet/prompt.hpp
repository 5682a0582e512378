// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mmseg/modality.hpp"

#include <string>
#include <string_view>

namespace mmseg::hyper {

inline constexpr std::string_view kPromptPrefix = "The input MRI modalities are";

/// "The input MRI modalities are FLAIR, T1 and T2" (no serial comma).
std::string build_prompt(const ModalityCode& code);

}  // namespace mmseg::hyper
