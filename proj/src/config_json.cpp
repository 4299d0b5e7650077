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

#include "autodecompose/config_json.hpp"

#include <initializer_list>
#include <string_view>

#include "autodecompose/errors.hpp"

namespace autodecompose {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto k : keys) known = known || k == key;
    if (!known) throw ConfigError("unknown config key: " + std::string(where) + "." + key);
  }
}

template <class T>
void read(const json& j, const char* key, T& out, std::string_view where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key " + std::string(where) + "." + key + " has the wrong type");
  }
}

}  // namespace

json to_json(const LayerSpec& spec) {
  json j = {{"kind", to_string(spec.kind)}};
  if (spec.kind != LayerKind::BatchNormRelu) j["width"] = spec.width;
  if (spec.kind == LayerKind::Dense || spec.kind == LayerKind::Conv1d)
    j["activation"] = to_string(spec.activation);
  if (spec.kind == LayerKind::Conv1d) j["kernel"] = spec.kernel;
  return j;
}

LayerSpec layer_spec_from_json(const json& j) {
  reject_unknown(j, "layer", {"kind", "width", "activation", "kernel"});
  LayerSpec s;
  std::string kind, act = "identity";
  read(j, "kind", kind, "layer");
  s.kind = parse_layer_kind(kind);
  read(j, "width", s.width, "layer");
  read(j, "activation", act, "layer");
  s.activation = s.kind == LayerKind::BatchNormRelu ? Activation::Relu : parse_activation(act);
  read(j, "kernel", s.kernel, "layer");
  return s;
}

json to_json(const AugmentConfig& c) {
  return {{"scramble_pivots_min", c.scramble_pivots_min},
          {"scramble_pivots_max", c.scramble_pivots_max},
          {"time_mask_segments", c.time_mask_segments},
          {"time_mask_len", c.time_mask_len},
          {"stretch_min_pct", c.stretch_min_pct},
          {"stretch_max_pct", c.stretch_max_pct},
          {"freq_mask_max_segments", c.freq_mask_max_segments},
          {"freq_mask_max_len", c.freq_mask_max_len},
          {"freq_mask_protected_low_bins", c.freq_mask_protected_low_bins}};
}

AugmentConfig augment_config_from_json(const json& j) {
  reject_unknown(j, "augment",
                 {"scramble_pivots_min", "scramble_pivots_max", "time_mask_segments",
                  "time_mask_len", "stretch_min_pct", "stretch_max_pct", "freq_mask_max_segments",
                  "freq_mask_max_len", "freq_mask_protected_low_bins"});
  AugmentConfig c;
  read(j, "scramble_pivots_min", c.scramble_pivots_min, "augment");
  read(j, "scramble_pivots_max", c.scramble_pivots_max, "augment");
  read(j, "time_mask_segments", c.time_mask_segments, "augment");
  read(j, "time_mask_len", c.time_mask_len, "augment");
  read(j, "stretch_min_pct", c.stretch_min_pct, "augment");
  read(j, "stretch_max_pct", c.stretch_max_pct, "augment");
  read(j, "freq_mask_max_segments", c.freq_mask_max_segments, "augment");
  read(j, "freq_mask_max_len", c.freq_mask_max_len, "augment");
  read(j, "freq_mask_protected_low_bins", c.freq_mask_protected_low_bins, "augment");
  c.validate();
  return c;
}

json to_json(const AutodecomposeConfig& c) {
  json enc = json::array(), dec = json::array();
  for (const auto& s : c.encoder_spec) enc.push_back(to_json(s));
  for (const auto& s : c.decoder_spec) dec.push_back(to_json(s));
  return {{"preset", c.preset},
          {"encoder_spec", enc},
          {"decoder_spec", dec},
          {"embed_dim", c.embed_dim},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"learning_rate", c.learning_rate},
          {"views", to_string(c.views)},
          {"augment", to_json(c.augment)}};
}

AutodecomposeConfig autodecompose_config_from_json(const json& j) {
  reject_unknown(j, "model",
                 {"preset", "encoder_spec", "decoder_spec", "embed_dim", "batch_size", "epochs",
                  "seed", "learning_rate", "views", "augment"});
  std::string preset = "conv";
  read(j, "preset", preset, "model");
  AutodecomposeConfig c = preset_config(preset);
  if (j.contains("encoder_spec")) {
    c.encoder_spec.clear();
    for (const auto& s : j.at("encoder_spec")) c.encoder_spec.push_back(layer_spec_from_json(s));
  }
  if (j.contains("decoder_spec")) {
    c.decoder_spec.clear();
    for (const auto& s : j.at("decoder_spec")) c.decoder_spec.push_back(layer_spec_from_json(s));
  }
  read(j, "embed_dim", c.embed_dim, "model");
  read(j, "batch_size", c.batch_size, "model");
  read(j, "epochs", c.epochs, "model");
  read(j, "seed", c.seed, "model");
  read(j, "learning_rate", c.learning_rate, "model");
  std::string views = std::string(to_string(c.views));
  read(j, "views", views, "model");
  c.views = parse_view_mode(views);
  if (j.contains("augment")) c.augment = augment_config_from_json(j.at("augment"));
  c.validate();
  return c;
}

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override must look like key=value: " + ov);
    const std::string path = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
      if (key.empty()) throw ConfigError("empty key segment in override: " + ov);
      if (!node->is_object()) *node = json::object();
      if (dot == std::string::npos) {
        (*node)[key] = value;
        break;
      }
      node = &(*node)[key];
      start = dot + 1;
    }
  }
}

}  // namespace autodecompose
