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

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "autodecompose/config_json.hpp"
#include "autodecompose/errors.hpp"
#include "autodecompose/model.hpp"

namespace autodecompose {

static_assert(std::endian::native == std::endian::little,
              "ADCKPT1 I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'D', 'C', 'K', 'P', 'T', '1', '\0'};

struct NamedTensor {
  std::string name;
  Tensor<float>* tensor;
};

}  // namespace

// ADCKPT1: magic | u32 header length | JSON header | f32 tensors in the
// order the header lists them (parameters, batchnorm buffers, Adam moments).
class CheckpointCodec {
 public:
  static std::vector<NamedTensor> tensors(Autodecompose& m) {
    std::vector<NamedTensor> out;
    const std::pair<const char*, Network*> nets[] = {
        {"source_encoder", &m.source_}, {"content_encoder", &m.content_}, {"decoder", &m.decoder_}};
    for (const auto& [prefix, net] : nets) {
      for (std::size_t i = 0; i < net->layers.size(); ++i) {
        auto& layer = net->layers[i];
        const bool bn = net->specs[i].kind == LayerKind::BatchNormRelu;
        const std::string base = std::string(prefix) + "." + std::to_string(i) + ".";
        out.push_back({base + (bn ? "gamma" : "weight"), &layer.params[0]});
        out.push_back({base + (bn ? "beta" : "bias"), &layer.params[1]});
        if (bn) {
          out.push_back({base + "running_mean", &layer.buffers[0]});
          out.push_back({base + "running_var", &layer.buffers[1]});
        }
      }
    }
    for (std::size_t i = 0; i < m.adam_.m.size(); ++i)
      out.push_back({"adam.m." + std::to_string(i), &m.adam_.m[i]});
    for (std::size_t i = 0; i < m.adam_.v.size(); ++i)
      out.push_back({"adam.v." + std::to_string(i), &m.adam_.v[i]});
    return out;
  }

  static std::string encode(const Autodecompose& model) {
    auto& m = const_cast<Autodecompose&>(model);
    nlohmann::json header;
    header["format"] = "ADCKPT1";
    header["config"] = to_json(m.cfg_);
    header["optimizer"] = {{"lr", m.adam_.hyper.lr},
                           {"beta1", m.adam_.hyper.beta1},
                           {"beta2", m.adam_.hyper.beta2},
                           {"eps", m.adam_.hyper.eps},
                           {"step", m.adam_.step}};
    header["epochs_trained"] = m.epochs_trained_;
    nlohmann::json list = nlohmann::json::array();
    std::size_t total = 0;
    const auto named = tensors(m);
    for (const auto& nt : named) {
      list.push_back({{"name", nt.name}, {"shape", nt.tensor->shape}});
      total += nt.tensor->size();
    }
    header["tensors"] = list;
    const std::string text = header.dump();
    std::string out(kMagic, sizeof(kMagic));
    const auto len = static_cast<std::uint32_t>(text.size());
    out.append(reinterpret_cast<const char*>(&len), 4);
    out += text;
    out.reserve(out.size() + total * 4);
    for (const auto& nt : named)
      out.append(reinterpret_cast<const char*>(nt.tensor->data.data()), nt.tensor->size() * 4);
    return out;
  }

  static Autodecompose decode(const std::string& bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0)
      throw FormatError("not an ADCKPT1 checkpoint (bad magic)");
    std::uint32_t len;
    std::memcpy(&len, bytes.data() + 8, 4);
    if (12 + static_cast<std::size_t>(len) > bytes.size())
      throw FormatError("truncated ADCKPT1 header");
    nlohmann::json header;
    try {
      header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + len);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("corrupt ADCKPT1 header: ") + e.what());
    }
    Autodecompose m(autodecompose_config_from_json(header.at("config")));
    const auto& opt = header.at("optimizer");
    m.adam_.hyper = {opt.at("lr").get<double>(), opt.at("beta1").get<double>(),
                     opt.at("beta2").get<double>(), opt.at("eps").get<double>()};
    m.adam_.step = opt.at("step").get<std::uint64_t>();
    m.epochs_trained_ = header.at("epochs_trained").get<std::uint64_t>();

    const auto named = tensors(m);
    const auto& list = header.at("tensors");
    if (list.size() != named.size()) throw FormatError("checkpoint tensor list does not match its config");
    std::size_t pos = 12 + len;
    for (std::size_t i = 0; i < named.size(); ++i) {
      const auto shape = list[i].at("shape").get<std::vector<std::size_t>>();
      if (list[i].at("name").get<std::string>() != named[i].name || shape != named[i].tensor->shape)
        throw FormatError("checkpoint tensor " + named[i].name + " has an unexpected name or shape");
      const std::size_t nbytes = named[i].tensor->size() * 4;
      if (pos + nbytes > bytes.size()) throw FormatError("truncated ADCKPT1 payload");
      std::memcpy(named[i].tensor->data.data(), bytes.data() + pos, nbytes);
      pos += nbytes;
    }
    if (pos != bytes.size()) throw FormatError("trailing bytes after ADCKPT1 payload");
    return m;
  }
};

std::string Autodecompose::serialize() const { return CheckpointCodec::encode(*this); }

Autodecompose Autodecompose::deserialize(const std::string& bytes) {
  try {
    return CheckpointCodec::decode(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed ADCKPT1 header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("ADCKPT1 header holds an invalid config: ") + e.what());
  }
}

void Autodecompose::save(const std::filesystem::path& path) const {
  const std::string bytes = serialize();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write checkpoint " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Autodecompose Autodecompose::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace autodecompose
