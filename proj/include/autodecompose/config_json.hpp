// Copyright 2026 The autodecompose Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "autodecompose/model.hpp"

namespace autodecompose {

// JSON mirrors of the configuration types. Parsing rejects unknown keys with
// ConfigError naming the offending key.
nlohmann::json to_json(const LayerSpec& spec);
LayerSpec layer_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AugmentConfig& cfg);
AugmentConfig augment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AutodecomposeConfig& cfg);
// Missing keys fall back to the named preset (default "conv").
AutodecomposeConfig autodecompose_config_from_json(const nlohmann::json& j);

// Applies "a.b.c=value" overrides; the value is parsed as JSON when possible,
// otherwise taken as a string.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

}  // namespace autodecompose
