// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSON codecs for the module configuration types. Decoding fills absent
// fields with defaults, rejects unknown keys and validates the result.

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "lift/pipeline.hpp"
#include "lift/segmenter.hpp"
#include "lift/taskgen.hpp"

namespace lift {

// Throws ValidationError("<section>.<key>") for the first key not in `known`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                         const std::string& section);

void to_json(nlohmann::json& j, const SamplingParams& v);
void from_json(const nlohmann::json& j, SamplingParams& v);
void to_json(nlohmann::json& j, const GenerationConfig& v);
void from_json(const nlohmann::json& j, GenerationConfig& v);
void to_json(nlohmann::json& j, const SegmenterConfig& v);
void from_json(const nlohmann::json& j, SegmenterConfig& v);
void to_json(nlohmann::json& j, const PipelineConfig& v);
void from_json(const nlohmann::json& j, PipelineConfig& v);

}  // namespace lift
