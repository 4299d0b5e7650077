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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "augment_invariants.hpp"
#include "autodecompose/errors.hpp"
#include "autodecompose/synth.hpp"
#include "test_util.hpp"

using namespace autodecompose;

namespace {

SourceSpec plain_source(double f0) {
  SourceSpec s;
  s.f0 = f0;
  s.formants = {{{500, 150, 0.2}, {1500, 150, 0.2}, {2500, 150, 0.2}, {3500, 150, 0.2}}};
  s.rolloff = 1.5;
  return s;
}

double rms(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

// Per-frame mean log-mel level, a proxy for the symbol gate.
std::vector<double> frame_levels(const MelChunk& c) {
  std::vector<double> out(MelChunk::kFrames);
  for (std::size_t t = 0; t < MelChunk::kFrames; ++t) {
    double s = 0.0;
    for (float v : c.frame(t)) s += v;
    out[t] = s / MelChunk::kBins;
  }
  return out;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("alphabet is the twelve multiplier and shape pairs") {
  std::set<std::pair<double, int>> seen;
  for (const Symbol& s : alphabet()) seen.insert({s.multiplier, static_cast<int>(s.shape)});
  CHECK(seen.size() == 12);
  for (double m : {0.8, 1.0, 1.25})
    for (int sh = 0; sh < 4; ++sh) CHECK(seen.count({m, sh}) == 1);
}

TEST_CASE("all-off script is near silence") {
  SynthSpec spec{plain_source(150.0), {}, 30.0};
  int off = -1;
  for (std::size_t i = 0; i < kAlphabetSize; ++i)
    if (!alphabet()[i].gate()) off = static_cast<int>(i);
  spec.content.symbols.fill(off);
  RngStream rng(1);
  const auto audio = synth_utterance(spec, rng);
  REQUIRE(audio.samples.size() == kUtteranceSamples);
  CHECK(rms(audio.samples) < noise_rms(30.0) * std::pow(10.0, 3.0 / 20.0));
}

TEST_CASE("synthesis is deterministic and peak normalized") {
  SynthSpec spec{plain_source(180.0), {}, 30.0};
  spec.content.symbols = {0, 1, 2, 4, 5, 6, 8, 9};
  RngStream a(3), b(3), c(4);
  const auto x = synth_utterance(spec, a);
  CHECK(x.sample_rate == 16000);
  CHECK(x.samples == synth_utterance(spec, b).samples);
  CHECK(x.samples != synth_utterance(spec, c).samples);
  double peak = 0.0;
  for (double v : x.samples) peak = std::max(peak, std::fabs(v));
  CHECK(peak == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("the dominant partial of a unit-multiplier symbol is the source f0") {
  int flat_unit = -1;
  for (std::size_t i = 0; i < kAlphabetSize; ++i)
    if (alphabet()[i].multiplier == 1.0 && alphabet()[i].shape == Shape::Flat) flat_unit = static_cast<int>(i);
  REQUIRE(flat_unit >= 0);
  for (double f0 : {120.0, 170.0, 240.0, 310.0}) {
    SynthSpec spec{plain_source(f0), {}, 30.0};
    spec.content.symbols.fill(flat_unit);
    RngStream rng(static_cast<std::uint64_t>(f0));
    const auto audio = synth_utterance(spec, rng);
    const std::vector<double> symbol(audio.samples.begin() + 2 * kSymbolSamples,
                                     audio.samples.begin() + 3 * kSymbolSamples);
    const auto mag = testutil::dft_magnitude(symbol);
    const double bin_hz = 16000.0 / kSymbolSamples;
    const double peak_hz = static_cast<double>(testutil::argmax(mag, 1)) * bin_hz;
    CAPTURE(f0);
    CHECK(std::fabs(peak_hz - f0) <= bin_hz);
  }
}

TEST_CASE("drawn sources share a register and stay 8% apart") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(seed);
    const auto sources = draw_sources(6, rng);
    std::vector<double> f0;
    for (std::size_t i = 0; i < sources.size(); ++i) {
      CHECK(sources[i].source_id == static_cast<int>(i));
      CHECK_NOTHROW(sources[i].validate());
      f0.push_back(sources[i].f0);
    }
    std::sort(f0.begin(), f0.end());
    for (std::size_t i = 1; i < f0.size(); ++i) CHECK(f0[i] / f0[i - 1] >= kMinF0Ratio - 1e-12);
    CHECK(f0.back() / f0.front() <= VoiceOptions{}.register_ratio + 1e-9);
  }
  RngStream rng(1);
  CHECK_THROWS_AS(draw_sources(20, rng), InvalidInput);
}

TEST_CASE("drawn scripts have unique adjacent pairs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream rng(seed);
    const auto scripts = draw_scripts(10, rng);
    REQUIRE(scripts.size() == 10);
    std::set<std::pair<int, int>> pairs;
    std::size_t total = 0;
    for (const auto& s : scripts) {
      CHECK_NOTHROW(s.validate());
      for (std::size_t i = 1; i < kSymbolsPerScript; ++i) {
        auto key = [](int sym) { return alphabet()[static_cast<std::size_t>(sym)].gate() ? sym : -1; };
        pairs.insert({key(s.symbols[i - 1]), key(s.symbols[i])});
        ++total;
      }
    }
    CHECK(pairs.size() == total);
  }
  // Far more scripts than unique pairs allow still yields distinct scripts.
  RngStream rng(2);
  const auto many = draw_scripts(40, rng);
  std::set<std::array<int, kSymbolsPerScript>> distinct;
  for (const auto& s : many) distinct.insert(s.symbols);
  CHECK(distinct.size() == 40);
}

TEST_CASE("corpus grid arithmetic and independence") {
  const auto corpus = make_corpus(5, 10, 2, 1);
  const auto& d = corpus.data;
  REQUIRE(d.chunks.size() == 100);
  std::map<int, int> by_source, by_content;
  std::map<std::pair<int, int>, int> joint;
  for (std::size_t i = 0; i < d.chunks.size(); ++i) {
    CHECK_NOTHROW(d.chunks[i].validate());
    ++by_source[d.source_ids[i]];
    ++by_content[d.content_ids[i]];
    ++joint[{d.source_ids[i], d.content_ids[i]}];
  }
  CHECK(by_source.size() == 5);
  for (auto [k, n] : by_source) CHECK(n == 20);
  CHECK(by_content.size() == 10);
  for (auto [k, n] : by_content) CHECK(n == 10);
  CHECK(joint.size() == 50);
  for (auto [k, n] : joint) CHECK(n == 2);
  CHECK_THROWS_AS(make_corpus(1, 10, 2, 1), InvalidInput);
}

TEST_CASE("corpus regeneration is bitwise identical") {
  const auto a = make_corpus(2, 3, 2, 42);
  const auto b = make_corpus(2, 3, 2, 42);
  const auto c = make_corpus(2, 3, 2, 43);
  CHECK(a.data.chunks == b.data.chunks);
  CHECK(a.data.seeds == b.data.seeds);
  CHECK(a.data.chunks != c.data.chunks);
}

TEST_CASE("chunks are reproducible from their recorded seeds") {
  const auto corpus = make_corpus(2, 2, 2, 9);
  for (std::size_t i = 0; i < corpus.data.chunks.size(); ++i) {
    SynthSpec spec{corpus.sources[static_cast<std::size_t>(corpus.data.source_ids[i])],
                   corpus.scripts[static_cast<std::size_t>(corpus.data.content_ids[i])], corpus.noise_db};
    RngStream rng(corpus.data.seeds[i]);
    CHECK(preprocess(synth_utterance(spec, rng)).at(0) == corpus.data.chunks[i]);
  }
}

TEST_CASE("source is recoverable from raw pooled log-mel") {
  const auto corpus = make_corpus(5, 10, 2, 1);
  const auto score = run_probe(raw_dataset(corpus.data, LabelKind::Source), 10.24, 1);
  CHECK(score.macro_f1 > 0.8);
}

TEST_CASE("augmentations keep their invariants on synthetic chunks") {
  const auto corpus = make_corpus(3, 4, 2, 5);
  const AugmentConfig cfg;
  for (std::size_t i = 0; i < corpus.data.chunks.size(); ++i) {
    const MelChunk& c = corpus.data.chunks[i];
    CHECK(testutil::check_source_preserving(c, 100 + i, cfg) == "");
    CHECK(testutil::check_content_preserving(c, 200 + i, cfg) == "");
    // The content view keeps the loud and quiet frames where they were.
    RngStream rng(300 + i);
    const MelChunk v = augment_content_preserving(c, rng, cfg);
    const auto before = frame_levels(c), after = frame_levels(v);
    const double mid_b = (*std::min_element(before.begin(), before.end()) + *std::max_element(before.begin(), before.end())) / 2;
    const double quiet = *std::min_element(before.begin(), before.end());
    for (std::size_t t = 0; t < before.size(); ++t)
      if (before[t] < quiet + 0.5) CHECK(after[t] < mid_b);
  }
}

TEST_CASE("decomposition checks compare against chance") {
  DecompositionReport r;
  auto row = [&](const char* e, const char* k, double f1) { r.rows.push_back({e, k, 10.24, f1, 0, 0, 1}); };
  row("E_s", "source", 0.95);
  row("E_c", "source", 0.55);
  row("E_c", "content", 0.36);
  row("E_s", "content", 0.24);
  auto checks = evaluate_decomposition(r, 10, {});
  REQUIRE(checks.size() == 4);
  for (const auto& c : checks) CHECK(c.pass);
  CHECK(checks[2].bound == doctest::Approx(0.35));
  CHECK(checks[3].bound == doctest::Approx(0.25));
  r.rows[1].macro_f1 = 0.61;
  checks = evaluate_decomposition(r, 10, {});
  CHECK_FALSE(checks[1].pass);
}

TEST_CASE("theorem check reports divergence as a failure with diagnostics") {
  auto cfg = preset_config("dense");
  cfg.epochs = 1;
  cfg.learning_rate = std::numeric_limits<double>::infinity();
  const auto corpus = make_corpus(2, 2, 2, 1);
  // An infinite step size turns the parameters non-finite after one update.
  cfg.batch_size = 2;
  const auto r = theorem_check(cfg, corpus);
  CHECK_FALSE(r.pass);
  CHECK(r.diagnostics.find("non-finite") != std::string::npos);
  CHECK(r.checks.empty());
}

}  // TEST_SUITE
