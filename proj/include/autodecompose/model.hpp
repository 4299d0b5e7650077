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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "autodecompose/adam.hpp"
#include "autodecompose/augment.hpp"
#include "autodecompose/dsp.hpp"
#include "autodecompose/layers.hpp"

namespace autodecompose {

enum class Encoder { Source, Content };
enum class Pooling { None, Mean };

// Which views feed the encoders during training. Complementary is the real
// method; the other two exist as negative controls.
enum class ViewMode { Complementary, Swapped, Identity };

std::string_view to_string(ViewMode mode);
ViewMode parse_view_mode(std::string_view name);

struct AutodecomposeConfig {
  std::string preset = "conv";
  // Shared by both encoders; each encoder gets its own parameters.
  std::vector<LayerSpec> encoder_spec;
  std::vector<LayerSpec> decoder_spec;
  std::size_t embed_dim = 128;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double learning_rate = 1e-3;
  ViewMode views = ViewMode::Complementary;
  AugmentConfig augment;

  // Throws ConfigError on inconsistent layer stacks.
  void validate() const;
};

// Registered presets: "dense", "conv" and "large". Unknown names throw ConfigError.
AutodecomposeConfig preset_config(std::string_view name);
std::vector<std::string> preset_names();

// Originals d and the two augmented views, each batch x 64 x 80.
struct Batch {
  Tensor<float> original;
  Tensor<float> source_view;   // a  = A_s(d), feeds the source encoder
  Tensor<float> content_view;  // a' = A_c(d), feeds the content encoder
};

Tensor<float> stack_chunks(std::span<const MelChunk> chunks);

// Batch of corpus[indices[i]] with per-chunk augmentation streams derived
// from `step_seed` and i; assembled in parallel, deterministic.
Batch make_batch(std::span<const MelChunk> corpus, std::span<const std::size_t> indices,
                 const AutodecomposeConfig& cfg, std::uint64_t step_seed);

struct Network {
  std::vector<LayerSpec> specs;
  std::vector<LayerParams<float>> layers;
  std::size_t in_channels = 0;
};

struct EpochRecord {
  std::uint64_t epoch = 0;  // 1-based, counted over the model's lifetime
  double mean_loss = 0.0;
  double wall_seconds = 0.0;
};
using TrainingLog = std::vector<EpochRecord>;

// Row-major embedding: 64 x embed_dim (no pooling) or 1 x embed_dim (mean).
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;
  std::span<const float> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

class Autodecompose {
 public:
  // Initializes every parameter from cfg.seed.
  explicit Autodecompose(AutodecomposeConfig cfg);

  const AutodecomposeConfig& config() const { return cfg_; }
  const Network& source_encoder() const { return source_; }
  const Network& content_encoder() const { return content_; }
  const Network& decoder() const { return decoder_; }
  const AdamState<float>& optimizer() const { return adam_; }
  std::uint64_t epochs_trained() const { return epochs_trained_; }
  std::size_t parameter_count() const;

  // Trainable tensors in checkpoint order: source encoder, content encoder, decoder.
  std::vector<Tensor<float>*> trainable();
  std::vector<const Tensor<float>*> trainable() const;

  // One Adam update on the reconstruction loss; returns the pre-update loss.
  float train_step(const Batch& batch);

  using EpochCallback = std::function<void(const EpochRecord&)>;
  // `epochs` passes over the corpus with fresh augmentations per step.
  TrainingLog fit(std::span<const MelChunk> corpus, std::size_t epochs,
                  const EpochCallback& on_epoch = {});

  EmbeddingMatrix embed(const MelChunk& chunk, Encoder which, Pooling pooling) const;
  std::vector<EmbeddingMatrix> embed_many(std::span<const MelChunk> chunks, Encoder which,
                                          Pooling pooling) const;

  // Decoder output for <E_s(source_input), E_c(content_input)> in eval mode.
  MelChunk reconstruct(const MelChunk& source_input, const MelChunk& content_input) const;

  void save(const std::filesystem::path& path) const;
  static Autodecompose load(const std::filesystem::path& path);
  std::string serialize() const;
  static Autodecompose deserialize(const std::string& bytes);

  // Test seam: rewrites the decoder output before the loss is taken.
  std::function<void(Tensor<float>& prediction, const Tensor<float>& target)> output_hook;

 private:
  Autodecompose() = default;

  AutodecomposeConfig cfg_;
  Network source_;
  Network content_;
  Network decoder_;
  AdamState<float> adam_;
  std::uint64_t epochs_trained_ = 0;

  friend class CheckpointCodec;
};

}  // namespace autodecompose
