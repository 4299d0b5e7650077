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

#include <doctest.h>

#include <fstream>
#include <iterator>

#include "autodecompose/errors.hpp"
#include "autodecompose/model.hpp"
#include "autodecompose/synth.hpp"
#include "test_util.hpp"

using namespace autodecompose;

namespace {

const std::vector<MelChunk>& tiny_corpus() {
  static const std::vector<MelChunk> chunks = make_corpus(2, 4, 1, 5).data.chunks;
  return chunks;
}

AutodecomposeConfig dense(std::uint64_t seed = 1, std::size_t batch = 8) {
  auto cfg = preset_config("dense");
  cfg.seed = seed;
  cfg.batch_size = batch;
  return cfg;
}

bool same_params(const Autodecompose& a, const Autodecompose& b) {
  const auto pa = a.trainable();
  const auto pb = b.trainable();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!(*pa[i] == *pb[i])) return false;
  return true;
}

std::vector<double> losses(const TrainingLog& log) {
  std::vector<double> out;
  for (const auto& r : log) out.push_back(r.mean_loss);
  return out;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("dense preset parameter count matches the hand sum of its shapes") {
  const Autodecompose m(dense());
  const std::size_t encoder = (80 * 512 + 512) + 2 * 512 + (512 * 128 + 128);
  const std::size_t decoder = (256 * 1024 + 1024) + (1024 * 80 + 80);
  CHECK(m.parameter_count() == 2 * encoder + decoder);
}

TEST_CASE("presets are registered and unknown names are rejected") {
  for (const auto& name : preset_names()) CHECK_NOTHROW(Autodecompose(preset_config(name)));
  CHECK_THROWS_AS(preset_config("lstm"), ConfigError);
}

TEST_CASE("inconsistent layer stacks are config errors") {
  auto cfg = dense();
  cfg.encoder_spec.back().width = 64;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = dense();
  cfg.decoder_spec.back().width = 79;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = dense();
  cfg.decoder_spec.pop_back();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("same seed gives identical initial parameters") {
  const Autodecompose a(dense(9)), b(dense(9)), c(dense(10));
  CHECK(same_params(a, b));
  CHECK_FALSE(same_params(a, c));
}

TEST_CASE("both encoders emit 128 wide time-distributed maps") {
  for (const char* name : {"dense", "conv"}) {
    const Autodecompose m(preset_config(name));
    const MelChunk& c = tiny_corpus()[0];
    for (Encoder e : {Encoder::Source, Encoder::Content}) {
      const auto full = m.embed(c, e, Pooling::None);
      CHECK(full.rows == 64);
      CHECK(full.cols == 128);
      const auto pooled = m.embed(c, e, Pooling::Mean);
      CHECK(pooled.rows == 1);
      CHECK(pooled.cols == 128);
      for (std::size_t j = 0; j < 128; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < 64; ++t) s += full.row(t)[j];
        CHECK(pooled.values[j] == doctest::Approx(s / 64).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("mean pooling of a constant-over-time map returns that vector") {
  const Autodecompose m(dense());
  MelChunk c;
  for (std::size_t t = 0; t < 64; ++t)
    for (std::size_t b = 0; b < 80; ++b) c.at(t, b) = c.floor + static_cast<float>(b % 7);
  const auto full = m.embed(c, Encoder::Content, Pooling::None);
  const auto pooled = m.embed(c, Encoder::Content, Pooling::Mean);
  for (std::size_t t = 1; t < 64; ++t)
    for (std::size_t j = 0; j < 128; ++j) REQUIRE(full.row(t)[j] == full.row(0)[j]);
  for (std::size_t j = 0; j < 128; ++j)
    CHECK(pooled.values[j] == doctest::Approx(full.row(0)[j]).epsilon(1e-6));
}

TEST_CASE("embedding is deterministic in eval mode and batch independent") {
  const Autodecompose m(preset_config("conv"));
  const auto& corpus = tiny_corpus();
  const auto many = m.embed_many(corpus, Encoder::Source, Pooling::None);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto one = m.embed(corpus[i], Encoder::Source, Pooling::None);
    CHECK(one.values == many[i].values);
    CHECK(one.values == m.embed(corpus[i], Encoder::Source, Pooling::None).values);
  }
}

TEST_CASE("batch views are the augmentations under the recorded streams") {
  const auto cfg = dense();
  const auto& corpus = tiny_corpus();
  const std::vector<std::size_t> idx{3, 0, 6};
  const Batch batch = make_batch(corpus, idx, cfg, 1234);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const RngStream stream(derive_seed(1234, i));
    RngStream rs = stream.split(1);
    RngStream rc = stream.split(2);
    const MelChunk a = augment_source_preserving(corpus[idx[i]], rs, cfg.augment);
    const MelChunk ac = augment_content_preserving(corpus[idx[i]], rc, cfg.augment);
    for (std::size_t k = 0; k < MelChunk::kSize; ++k) {
      REQUIRE(batch.original.data[i * MelChunk::kSize + k] == corpus[idx[i]].values[k]);
      REQUIRE(batch.source_view.data[i * MelChunk::kSize + k] == a.values[k]);
      REQUIRE(batch.content_view.data[i * MelChunk::kSize + k] == ac.values[k]);
    }
  }
}

TEST_CASE("exact reconstruction gives zero loss and no parameter movement") {
  Autodecompose m(dense());
  const Autodecompose before(dense());
  m.output_hook = [](Tensor<float>& pred, const Tensor<float>& target) { pred = target; };
  const std::vector<std::size_t> idx{0, 1, 2, 3};
  const float loss = m.train_step(make_batch(tiny_corpus(), idx, m.config(), 7));
  CHECK(loss == 0.0f);
  CHECK(same_params(m, before));
}

TEST_CASE("loss is never negative and the decoder has no skip path") {
  Autodecompose m(dense());
  // Zero both embedding layers: the decoder input no longer depends on the chunk.
  for (const Network* net : {&m.source_encoder(), &m.content_encoder()}) {
    auto& last = const_cast<Network*>(net)->layers.back();
    for (auto& t : last.params) std::fill(t.data.begin(), t.data.end(), 0.0f);
  }
  const auto& corpus = tiny_corpus();
  const MelChunk r0 = m.reconstruct(corpus[0], corpus[1]);
  const MelChunk r1 = m.reconstruct(corpus[5], corpus[7]);
  CHECK(r0.values == r1.values);
  const std::vector<std::size_t> idx{0, 1};
  CHECK(m.train_step(make_batch(corpus, idx, m.config(), 3)) >= 0.0f);
}

TEST_CASE("zero epochs leaves the model untouched") {
  Autodecompose m(dense());
  const Autodecompose ref(dense());
  CHECK(m.fit(tiny_corpus(), 0).empty());
  CHECK(same_params(m, ref));
  CHECK(m.epochs_trained() == 0);
  CHECK_THROWS_AS(m.fit(std::span<const MelChunk>(), 1), InvalidInput);
}

TEST_CASE("dense preset learns the tiny corpus") {
  Autodecompose m(dense());
  const auto log = m.fit(tiny_corpus(), 200);
  REQUIRE(log.size() == 200);
  for (std::size_t i = 0; i < log.size(); ++i) CHECK(log[i].epoch == i + 1);
  // One step per epoch here, so 200 epochs are 200 optimizer steps.
  CHECK(m.optimizer().step == 200);
  double tail = 0.0;
  for (std::size_t i = 190; i < 200; ++i) tail += log[i].mean_loss / 10.0;
  CHECK(tail < log[0].mean_loss);
  CHECK(log[49].mean_loss < 0.5 * log[0].mean_loss);
}

TEST_CASE("fixed seed reproduces the loss log and the parameters") {
  Autodecompose a(dense(4, 3)), b(dense(4, 3));
  const auto la = a.fit(tiny_corpus(), 3);
  const auto lb = b.fit(tiny_corpus(), 3);
  CHECK(losses(la) == losses(lb));
  CHECK(a.serialize() == b.serialize());
}

TEST_CASE("swapping the views changes the trajectory") {
  auto cfg = dense(4, 4);
  Autodecompose a(cfg);
  cfg.views = ViewMode::Swapped;
  Autodecompose b(cfg);
  CHECK(losses(a.fit(tiny_corpus(), 3)) != losses(b.fit(tiny_corpus(), 3)));
}

TEST_CASE("checkpoint round trip is lossless") {
  testutil::TempDir dir;
  Autodecompose m(dense(2, 4));
  m.fit(tiny_corpus(), 2);
  m.save(dir / "a.adckpt");
  const Autodecompose back = Autodecompose::load(dir / "a.adckpt");
  back.save(dir / "b.adckpt");
  std::ifstream fa(dir / "a.adckpt", std::ios::binary), fb(dir / "b.adckpt", std::ios::binary);
  const std::string ba{std::istreambuf_iterator<char>(fa), {}};
  const std::string bb{std::istreambuf_iterator<char>(fb), {}};
  CHECK(ba == bb);
  CHECK(ba.compare(0, 8, std::string("ADCKPT1\0", 8)) == 0);
  CHECK(back.epochs_trained() == 2);
  CHECK(same_params(m, back));
  for (Encoder e : {Encoder::Source, Encoder::Content})
    CHECK(m.embed(tiny_corpus()[1], e, Pooling::None).values ==
          back.embed(tiny_corpus()[1], e, Pooling::None).values);
}

TEST_CASE("truncated or foreign checkpoints are format errors") {
  const std::string bytes = Autodecompose(dense()).serialize();
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1})
    CHECK_THROWS_AS(Autodecompose::deserialize(bytes.substr(0, cut)), FormatError);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(Autodecompose::deserialize(bad), FormatError);
  CHECK_THROWS_AS(Autodecompose::deserialize(bytes + "tail"), FormatError);
  testutil::TempDir dir;
  CHECK_THROWS_AS(Autodecompose::load(dir / "missing.adckpt"), FormatError);
}

TEST_CASE("load then fit equals uninterrupted training") {
  Autodecompose whole(dense(6, 3));
  whole.fit(tiny_corpus(), 4);
  Autodecompose first(dense(6, 3));
  first.fit(tiny_corpus(), 2);
  Autodecompose resumed = Autodecompose::deserialize(first.serialize());
  const auto tail = resumed.fit(tiny_corpus(), 2);
  CHECK(tail.front().epoch == 3);
  CHECK(resumed.serialize() == whole.serialize());
}

}  // TEST_SUITE
