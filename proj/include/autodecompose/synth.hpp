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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "autodecompose/audio.hpp"
#include "autodecompose/model.hpp"
#include "autodecompose/probe.hpp"
#include "autodecompose/rng.hpp"

namespace autodecompose {

inline constexpr int kSynthSampleRate = 16000;
inline constexpr std::size_t kSymbolsPerScript = 8;
inline constexpr std::size_t kSymbolSamples = 2048;  // 0.128 s
inline constexpr std::size_t kUtteranceSamples = kSymbolsPerScript * kSymbolSamples;
inline constexpr double kSourceF0Min = 110.0;
inline constexpr double kSourceF0Max = 320.0;
inline constexpr double kMinF0Ratio = 1.08;

struct Formant {
  double center_hz = 0.0;
  double width_hz = 0.0;
  double gain = 0.0;
};

// A synthetic "voice": pitch plus a fixed spectral envelope.
struct SourceSpec {
  int source_id = 0;
  double f0 = 0.0;
  std::array<Formant, 4> formants{};
  double rolloff = 1.5;  // harmonic h is scaled by h^-rolloff

  // Linear gain of the spectral envelope at `hz` (>= 1).
  double envelope(double hz) const;
  void validate() const;
};

enum class Shape { Flat, Rise, Fall, Off };

struct Symbol {
  double multiplier = 1.0;
  Shape shape = Shape::Flat;
  bool gate() const { return shape != Shape::Off; }
  // Amplitude at fractional position u in [0, 1) of the symbol.
  double amplitude(double u) const;
};

// Twelve symbols: {0.8, 1.0, 1.25} x {flat, rise, fall, off}.
inline constexpr std::size_t kAlphabetSize = 12;
const std::array<Symbol, kAlphabetSize>& alphabet();

struct ContentScript {
  int content_id = 0;
  std::array<int, kSymbolsPerScript> symbols{};  // alphabet indices
  void validate() const;
};

struct SynthSpec {
  SourceSpec source;
  ContentScript content;
  double noise_db = 30.0;
};

// RMS of the additive noise for a given SNR against a full-scale 0.9-peak sine.
double noise_rms(double noise_db);

// 1.024 s of 16 kHz audio. The rng supplies the per-utterance pitch jitter,
// harmonic phases and the noise.
AudioBuffer synth_utterance(const SynthSpec& spec, RngStream& rng);

// How far apart voices may be. All sources of one corpus share a register:
// a band of f0 of width `register_ratio` placed at random inside
// [f0_min, f0_max], and a formant scale within a factor
// `formant_scale_ratio` of nominal.
struct VoiceOptions {
  double register_ratio = 1.5;
  double formant_scale_ratio = 1.1;
  double f0_min = kSourceF0Min;
  double f0_max = kSourceF0Max;
};

// K sources with f0 at least 8% apart inside one register.
std::vector<SourceSpec> draw_sources(std::size_t count, RngStream& rng, const VoiceOptions& opts = {});
// M scripts whose adjacent symbol pairs are unique across the set, so a
// short window identifies the script; falls back to merely distinct scripts
// when M is too large for that.
std::vector<ContentScript> draw_scripts(std::size_t count, RngStream& rng);

struct SyntheticCorpus {
  std::vector<SourceSpec> sources;
  std::vector<ContentScript> scripts;
  LabeledCorpus data;  // ordered by source, then content, then repetition
  double noise_db = 30.0;
};

// The full K x M grid, `per_cell` utterances each, every one turned into a
// single MelChunk. Parallel over utterances, deterministic in `seed`.
SyntheticCorpus make_corpus(std::size_t n_sources, std::size_t n_contents, std::size_t per_cell,
                            std::uint64_t seed, double noise_db = 30.0, const VoiceOptions& voices = {});
SyntheticCorpus make_corpus(std::vector<SourceSpec> sources, std::vector<ContentScript> scripts,
                            std::size_t per_cell, std::uint64_t seed, double noise_db = 30.0);

// The four probe inequalities of the decomposition check.
struct DecompositionThresholds {
  double budget_seconds = 10.24;
  double source_by_source_min = 0.90;    // F1(E_s, source) >=
  double source_by_content_max = 0.60;   // F1(E_c, source) <=
  double content_by_content_margin = 0.25;  // F1(E_c, content) >= chance + margin
  double content_by_source_margin = 0.15;   // F1(E_s, content) <= chance + margin
};

struct CheckOutcome {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool upper = false;  // value must be <= bound (else >=)
  bool pass = false;
};

std::vector<CheckOutcome> evaluate_decomposition(const DecompositionReport& report,
                                                 std::size_t n_contents,
                                                 const DecompositionThresholds& t);

struct TheoremResult {
  bool pass = false;
  std::string diagnostics;  // set when training diverged
  TrainingLog log;
  DecompositionReport report;
  std::vector<CheckOutcome> checks;
};

// Trains a fresh model on the unlabeled chunks for cfg.epochs, then probes it.
TheoremResult theorem_check(const AutodecomposeConfig& cfg, const SyntheticCorpus& corpus,
                            const DecompositionThresholds& t = {},
                            const Autodecompose::EpochCallback& on_epoch = {});
// Probe-only half, for an already trained model.
TheoremResult theorem_check(const Autodecompose& model, const SyntheticCorpus& corpus,
                            std::uint64_t probe_seed, const DecompositionThresholds& t = {});

}  // namespace autodecompose
