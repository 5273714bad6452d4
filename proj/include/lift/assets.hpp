// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string_view>

namespace lift::assets {

// Looks up an embedded asset by its path relative to assets/,
// e.g. "prompts/v1/user.txt".
std::optional<std::string_view> find(std::string_view name);

}  // namespace lift::assets
