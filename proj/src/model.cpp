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

#include "autodecompose/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "autodecompose/errors.hpp"

namespace autodecompose {

namespace {

constexpr std::size_t kFrames = MelChunk::kFrames;
constexpr std::size_t kBins = MelChunk::kBins;

// Stream tags for derive_seed so different consumers never share a stream.
constexpr std::uint64_t kInitTag = 0x1A17;
constexpr std::uint64_t kShuffleTag = 0x5B0F;
constexpr std::uint64_t kStepTag = 0x57E9;

std::vector<LayerSpec> conv_encoder(std::size_t filters, std::size_t embed) {
  std::vector<LayerSpec> s;
  for (int i = 0; i < 3; ++i) {
    s.push_back({LayerKind::Conv1d, filters, Activation::Identity, 3});
    s.push_back({LayerKind::BatchNormRelu, 0, Activation::Relu, 3});
  }
  s.push_back({LayerKind::LinearEmbed, embed, Activation::Identity, 3});
  return s;
}

std::vector<LayerSpec> conv_decoder(std::size_t filters) {
  std::vector<LayerSpec> s;
  for (int i = 0; i < 2; ++i) {
    s.push_back({LayerKind::Conv1d, filters, Activation::Identity, 3});
    s.push_back({LayerKind::BatchNormRelu, 0, Activation::Relu, 3});
  }
  s.push_back({LayerKind::OutputHead, kBins, Activation::Identity, 3});
  return s;
}

struct Pass {
  std::vector<LayerCache<float>> caches;
  Tensor<float> output;
};

Pass forward(Network& net, const Tensor<float>& x, Mode mode) {
  Pass pass;
  pass.caches.resize(net.specs.size());
  Tensor<float> h = x;
  for (std::size_t i = 0; i < net.specs.size(); ++i)
    h = layer_forward(net.specs[i], net.layers[i], h, mode, pass.caches[i]);
  pass.output = std::move(h);
  return pass;
}

// Appends parameter gradients in layer order.
Tensor<float> backward(const Network& net, const Pass& pass, Tensor<float> grad,
                       std::vector<Tensor<float>>& grads) {
  std::vector<std::vector<Tensor<float>>> per_layer(net.specs.size());
  for (std::size_t i = net.specs.size(); i-- > 0;)
    grad = layer_backward(net.specs[i], net.layers[i], pass.caches[i], grad, per_layer[i]);
  for (auto& layer : per_layer)
    for (auto& g : layer) grads.push_back(std::move(g));
  return grad;
}

Network build_network(const std::vector<LayerSpec>& specs, std::size_t in_channels, RngStream rng) {
  Network net;
  net.specs = specs;
  net.in_channels = in_channels;
  std::size_t width = in_channels;
  for (const auto& spec : specs) {
    net.layers.push_back(init_layer<float>(spec, width, rng));
    width = layer_output_width(spec, width);
  }
  return net;
}

std::size_t stack_width(const std::vector<LayerSpec>& specs, std::size_t in) {
  for (const auto& s : specs) in = layer_output_width(s, in);
  return in;
}

void append_trainable(Network& net, std::vector<Tensor<float>*>& out) {
  for (auto& layer : net.layers)
    for (auto& p : layer.params) out.push_back(&p);
}

Tensor<float> concat_channels(const Tensor<float>& a, const Tensor<float>& b) {
  const std::size_t rows = a.rows(), ca = a.cols(), cb = b.cols();
  Tensor<float> out({a.dim(0), a.dim(1), ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data.data() + r * ca, ca, out.data.data() + r * (ca + cb));
    std::copy_n(b.data.data() + r * cb, cb, out.data.data() + r * (ca + cb) + ca);
  }
  return out;
}

void split_channels(const Tensor<float>& z, std::size_t ca, Tensor<float>& a, Tensor<float>& b) {
  const std::size_t rows = z.rows(), cz = z.cols(), cb = cz - ca;
  a = Tensor<float>({z.dim(0), z.dim(1), ca});
  b = Tensor<float>({z.dim(0), z.dim(1), cb});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(z.data.data() + r * cz, ca, a.data.data() + r * ca);
    std::copy_n(z.data.data() + r * cz + ca, cb, b.data.data() + r * cb);
  }
}

}  // namespace

std::string_view to_string(ViewMode mode) {
  switch (mode) {
    case ViewMode::Complementary: return "complementary";
    case ViewMode::Swapped: return "swapped";
    case ViewMode::Identity: return "identity";
  }
  return "?";
}

ViewMode parse_view_mode(std::string_view name) {
  for (auto m : {ViewMode::Complementary, ViewMode::Swapped, ViewMode::Identity})
    if (to_string(m) == name) return m;
  throw ConfigError("unknown view mode: " + std::string(name));
}

void AutodecomposeConfig::validate() const {
  if (encoder_spec.empty() || decoder_spec.empty())
    throw ConfigError("encoder and decoder specs must be non-empty");
  if (embed_dim == 0 || batch_size == 0) throw ConfigError("embed_dim and batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  for (const auto* stack : {&encoder_spec, &decoder_spec})
    for (const auto& s : *stack)
      if (s.kind != LayerKind::BatchNormRelu && s.width == 0)
        throw ConfigError("layer widths must be positive");
  if (encoder_spec.back().kind != LayerKind::LinearEmbed)
    throw ConfigError("encoder must end with a linear_embed layer");
  if (stack_width(encoder_spec, kBins) != embed_dim)
    throw ConfigError("encoder output width must equal embed_dim");
  if (decoder_spec.back().kind != LayerKind::OutputHead)
    throw ConfigError("decoder must end with an output_head layer");
  if (stack_width(decoder_spec, 2 * embed_dim) != kBins)
    throw ConfigError("decoder output width must be 80 mel bins");
  if (encoder_spec.front().kind == LayerKind::BatchNormRelu ||
      decoder_spec.front().kind == LayerKind::BatchNormRelu)
    throw ConfigError("a stack cannot start with batchnorm_relu");
  augment.validate();
}

std::vector<std::string> preset_names() { return {"dense", "conv", "large"}; }

AutodecomposeConfig preset_config(std::string_view name) {
  AutodecomposeConfig cfg;
  cfg.preset = std::string(name);
  if (name == "dense") {
    cfg.encoder_spec = {{LayerKind::Dense, 512, Activation::Identity, 3},
                        {LayerKind::BatchNormRelu, 0, Activation::Relu, 3},
                        {LayerKind::LinearEmbed, 128, Activation::Identity, 3}};
    cfg.decoder_spec = {{LayerKind::Dense, 1024, Activation::Relu, 3},
                        {LayerKind::OutputHead, kBins, Activation::Identity, 3}};
  } else if (name == "conv") {
    cfg.encoder_spec = conv_encoder(512, 128);
    cfg.decoder_spec = conv_decoder(512);
  } else if (name == "large") {
    // Desk-scale stand-in for the overfitting model: wide embedding and decoder, no LSTMs.
    cfg.embed_dim = 1024;
    cfg.encoder_spec = conv_encoder(512, 1024);
    cfg.decoder_spec = conv_decoder(1024);
  } else {
    throw ConfigError("unknown preset: " + std::string(name));
  }
  return cfg;
}

Tensor<float> stack_chunks(std::span<const MelChunk> chunks) {
  Tensor<float> out({chunks.size(), kFrames, kBins});
  for (std::size_t i = 0; i < chunks.size(); ++i)
    std::copy(chunks[i].values.begin(), chunks[i].values.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(i * MelChunk::kSize));
  return out;
}

Batch make_batch(std::span<const MelChunk> corpus, std::span<const std::size_t> indices,
                 const AutodecomposeConfig& cfg, std::uint64_t step_seed) {
  const std::size_t n = indices.size();
  Batch batch;
  batch.original = Tensor<float>({n, kFrames, kBins});
  batch.source_view = Tensor<float>({n, kFrames, kBins});
  batch.content_view = Tensor<float>({n, kFrames, kBins});
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const MelChunk& d = corpus[indices[i]];
    const RngStream stream(derive_seed(step_seed, i));
    RngStream rs = stream.split(1);
    RngStream rc = stream.split(2);
    MelChunk a, ac;
    switch (cfg.views) {
      case ViewMode::Complementary:
        a = augment_source_preserving(d, rs, cfg.augment);
        ac = augment_content_preserving(d, rc, cfg.augment);
        break;
      case ViewMode::Swapped:
        a = augment_content_preserving(d, rc, cfg.augment);
        ac = augment_source_preserving(d, rs, cfg.augment);
        break;
      case ViewMode::Identity:
        a = d;
        ac = d;
        break;
    }
    const auto off = static_cast<std::ptrdiff_t>(i * MelChunk::kSize);
    std::copy(d.values.begin(), d.values.end(), batch.original.data.begin() + off);
    std::copy(a.values.begin(), a.values.end(), batch.source_view.data.begin() + off);
    std::copy(ac.values.begin(), ac.values.end(), batch.content_view.data.begin() + off);
  }
  return batch;
}

Autodecompose::Autodecompose(AutodecomposeConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const RngStream root(derive_seed(cfg_.seed, kInitTag));
  source_ = build_network(cfg_.encoder_spec, kBins, root.split(1));
  content_ = build_network(cfg_.encoder_spec, kBins, root.split(2));
  decoder_ = build_network(cfg_.decoder_spec, 2 * cfg_.embed_dim, root.split(3));
  auto params = trainable();
  adam_ = AdamState<float>::for_params(params, AdamHyper{cfg_.learning_rate});
}

std::vector<Tensor<float>*> Autodecompose::trainable() {
  std::vector<Tensor<float>*> out;
  append_trainable(source_, out);
  append_trainable(content_, out);
  append_trainable(decoder_, out);
  return out;
}

std::vector<const Tensor<float>*> Autodecompose::trainable() const {
  auto mut = const_cast<Autodecompose*>(this)->trainable();
  return {mut.begin(), mut.end()};
}

std::size_t Autodecompose::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : trainable()) n += p->size();
  return n;
}

float Autodecompose::train_step(const Batch& batch) {
  const Pass ps = forward(source_, batch.source_view, Mode::Train);
  const Pass pc = forward(content_, batch.content_view, Mode::Train);
  const Tensor<float> z = concat_channels(ps.output, pc.output);
  Pass pd = forward(decoder_, z, Mode::Train);
  if (output_hook) output_hook(pd.output, batch.original);
  const LossResult<float> loss = mse_loss(pd.output, batch.original);

  std::vector<Tensor<float>> grad_dec;
  const Tensor<float> dz = backward(decoder_, pd, loss.grad, grad_dec);
  Tensor<float> ds, dc;
  split_channels(dz, cfg_.embed_dim, ds, dc);
  std::vector<Tensor<float>> grads;
  backward(source_, ps, std::move(ds), grads);
  backward(content_, pc, std::move(dc), grads);
  for (auto& g : grad_dec) grads.push_back(std::move(g));

  if (!std::isfinite(loss.loss)) {
    double max_grad = 0.0;
    for (const auto& g : grads)
      for (float v : g.data) max_grad = std::max(max_grad, static_cast<double>(std::fabs(v)));
    std::ostringstream msg;
    msg << "non-finite training loss at optimizer step " << adam_.step + 1
        << " (max |grad| = " << max_grad << ")";
    throw DivergenceError(msg.str());
  }

  auto params = trainable();
  std::vector<const Tensor<float>*> grad_ptrs;
  for (const auto& g : grads) grad_ptrs.push_back(&g);
  adam_step<float>(adam_, params, grad_ptrs);
  for (const auto* p : params)
    for (float v : p->data)
      if (!std::isfinite(v))
        throw DivergenceError("non-finite parameters after optimizer step " + std::to_string(adam_.step));
  for (auto* net : {&source_, &content_, &decoder_})
    for (auto& layer : net->layers) ++layer.version;
  return loss.loss;
}

TrainingLog Autodecompose::fit(std::span<const MelChunk> corpus, std::size_t epochs,
                               const EpochCallback& on_epoch) {
  TrainingLog log;
  if (epochs == 0) return log;
  if (corpus.empty()) throw InvalidInput("fit: corpus is empty");
  const std::size_t n = corpus.size();
  const std::size_t bs = std::min(cfg_.batch_size, n);
  for (std::size_t e = 0; e < epochs; ++e) {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t epoch_id = epochs_trained_;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream shuffle(derive_seed(cfg_.seed, kShuffleTag, epoch_id));
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

    double weighted = 0.0;
    for (std::size_t b = 0, first = 0; first < n; ++b, first += bs) {
      const std::size_t count = std::min(bs, n - first);
      std::span<const std::size_t> idx(order.data() + first, count);
      const std::uint64_t step_seed = derive_seed(cfg_.seed ^ kStepTag, epoch_id, b);
      const Batch batch = make_batch(corpus, idx, cfg_, step_seed);
      weighted += static_cast<double>(train_step(batch)) * static_cast<double>(count);
    }
    ++epochs_trained_;
    EpochRecord rec;
    rec.epoch = epochs_trained_;
    rec.mean_loss = weighted / static_cast<double>(n);
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return log;
}

std::vector<EmbeddingMatrix> Autodecompose::embed_many(std::span<const MelChunk> chunks,
                                                       Encoder which, Pooling pooling) const {
  // Eval mode reads the batchnorm running statistics and never writes parameters.
  Network& net = const_cast<Network&>(which == Encoder::Source ? source_ : content_);
  constexpr std::size_t kGroup = 64;
  std::vector<EmbeddingMatrix> out;
  out.reserve(chunks.size());
  for (std::size_t first = 0; first < chunks.size(); first += kGroup) {
    const auto group = chunks.subspan(first, std::min(kGroup, chunks.size() - first));
    const Pass pass = forward(net, stack_chunks(group), Mode::Eval);
    const std::size_t d = pass.output.cols();
    for (std::size_t i = 0; i < group.size(); ++i) {
      const float* base = pass.output.data.data() + i * kFrames * d;
      EmbeddingMatrix m;
      m.cols = d;
      if (pooling == Pooling::None) {
        m.rows = kFrames;
        m.values.assign(base, base + kFrames * d);
      } else {
        m.rows = 1;
        m.values.assign(d, 0.0f);
        for (std::size_t j = 0; j < d; ++j) {
          double s = 0.0;
          for (std::size_t t = 0; t < kFrames; ++t) s += base[t * d + j];
          m.values[j] = static_cast<float>(s / kFrames);
        }
      }
      out.push_back(std::move(m));
    }
  }
  return out;
}

EmbeddingMatrix Autodecompose::embed(const MelChunk& chunk, Encoder which, Pooling pooling) const {
  return embed_many(std::span<const MelChunk>(&chunk, 1), which, pooling).front();
}

MelChunk Autodecompose::reconstruct(const MelChunk& source_input,
                                    const MelChunk& content_input) const {
  auto* self = const_cast<Autodecompose*>(this);
  const Pass ps = forward(self->source_, stack_chunks(std::span(&source_input, 1)), Mode::Eval);
  const Pass pc = forward(self->content_, stack_chunks(std::span(&content_input, 1)), Mode::Eval);
  const Pass pd = forward(self->decoder_, concat_channels(ps.output, pc.output), Mode::Eval);
  MelChunk out;
  out.floor = source_input.floor;
  for (std::size_t i = 0; i < MelChunk::kSize; ++i)
    out.values[i] = std::max(pd.output.data[i], out.floor);
  return out;
}

}  // namespace autodecompose
