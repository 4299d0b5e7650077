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

#include "autodecompose/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <set>

#include "autodecompose/dsp.hpp"
#include "autodecompose/errors.hpp"

namespace autodecompose {

namespace {

constexpr std::uint64_t kSourceTag = 0x5352430001ULL;
constexpr std::uint64_t kScriptTag = 0x5343520002ULL;
constexpr std::uint64_t kUtteranceTag = 0x5554540003ULL;

constexpr double kTopHz = 7600.0;
constexpr double kPeak = 0.9;
constexpr double kPitchJitter = 0.01;
constexpr std::size_t kMaxHarmonics = 96;

constexpr std::array<double, 4> kNominalFormants{500.0, 1500.0, 2500.0, 3500.0};

int canonical(int symbol) {
  // All gated-off symbols sound the same.
  return alphabet()[static_cast<std::size_t>(symbol)].gate() ? symbol : -1;
}

}  // namespace

double SourceSpec::envelope(double hz) const {
  double g = 1.0;
  for (const Formant& f : formants) {
    const double z = (hz - f.center_hz) / f.width_hz;
    g += f.gain * std::exp(-0.5 * z * z);
  }
  return g;
}

void SourceSpec::validate() const {
  if (!(f0 >= kSourceF0Min && f0 <= kSourceF0Max))
    throw InvalidInput("source f0 must lie in [110, 320] Hz");
  for (const Formant& f : formants)
    if (!(f.gain > 0.0) || !(f.width_hz > 0.0) || !(f.center_hz > 0.0))
      throw InvalidInput("formant gain, width and center must be positive");
  if (!(rolloff > 0.0)) throw InvalidInput("harmonic rolloff must be positive");
}

double Symbol::amplitude(double u) const {
  switch (shape) {
    case Shape::Flat: return 1.0;
    case Shape::Rise: return 0.25 + 0.75 * u;
    case Shape::Fall: return 1.0 - 0.75 * u;
    case Shape::Off: return 0.0;
  }
  return 0.0;
}

const std::array<Symbol, kAlphabetSize>& alphabet() {
  static const std::array<Symbol, kAlphabetSize> table = [] {
    std::array<Symbol, kAlphabetSize> t{};
    const double mults[3] = {0.8, 1.0, 1.25};
    const Shape shapes[4] = {Shape::Flat, Shape::Rise, Shape::Fall, Shape::Off};
    std::size_t i = 0;
    for (Shape s : shapes)
      for (double m : mults) t[i++] = {m, s};
    return t;
  }();
  return table;
}

void ContentScript::validate() const {
  for (int s : symbols)
    if (s < 0 || s >= static_cast<int>(kAlphabetSize)) throw InvalidInput("symbol outside alphabet");
}

double noise_rms(double noise_db) { return kPeak / std::numbers::sqrt2 * std::pow(10.0, -noise_db / 20.0); }

AudioBuffer synth_utterance(const SynthSpec& spec, RngStream& rng) {
  spec.source.validate();
  spec.content.validate();
  const double fs = kSynthSampleRate;
  const double f0 = spec.source.f0 * (1.0 + rng.uniform(-kPitchJitter, kPitchJitter));
  std::array<double, kMaxHarmonics> offsets{};
  for (double& p : offsets) p = rng.uniform(0.0, 2.0 * std::numbers::pi);

  std::vector<double> voiced(kUtteranceSamples, 0.0);
  double phase = 0.0;  // fundamental phase, carried across symbols
  for (std::size_t s = 0; s < kSymbolsPerScript; ++s) {
    const Symbol& sym = alphabet()[static_cast<std::size_t>(spec.content.symbols[s])];
    const double f = f0 * sym.multiplier;
    double* out = voiced.data() + s * kSymbolSamples;
    if (sym.gate()) {
      std::vector<double> gain(kSymbolSamples);
      for (std::size_t n = 0; n < kSymbolSamples; ++n)
        gain[n] = sym.amplitude(static_cast<double>(n) / kSymbolSamples);
      for (std::size_t h = 1; h <= kMaxHarmonics && h * f < kTopHz; ++h) {
        const double hd = static_cast<double>(h);
        const double amp = std::pow(hd, -spec.source.rolloff) * spec.source.envelope(hd * f);
        std::complex<double> z = std::polar(amp, hd * phase + offsets[h - 1]);
        const std::complex<double> w = std::polar(1.0, 2.0 * std::numbers::pi * hd * f / fs);
        for (std::size_t n = 0; n < kSymbolSamples; ++n) {
          out[n] += gain[n] * z.imag();
          z *= w;
        }
      }
    }
    phase = std::fmod(phase + 2.0 * std::numbers::pi * f * kSymbolSamples / fs, 2.0 * std::numbers::pi);
  }

  double peak = 0.0;
  for (double v : voiced) peak = std::max(peak, std::fabs(v));
  if (peak > 0.0)
    for (double& v : voiced) v *= kPeak / peak;
  const double sigma = noise_rms(spec.noise_db);
  AudioBuffer audio;
  audio.sample_rate = kSynthSampleRate;
  audio.samples.resize(kUtteranceSamples);
  for (std::size_t n = 0; n < kUtteranceSamples; ++n) audio.samples[n] = voiced[n] + sigma * rng.normal();
  if (peak > 0.0) {
    double total = 0.0;
    for (double v : audio.samples) total = std::max(total, std::fabs(v));
    for (double& v : audio.samples) v *= kPeak / total;
  }
  return audio;
}

std::vector<SourceSpec> draw_sources(std::size_t count, RngStream& rng, const VoiceOptions& opts) {
  if (count == 0) return {};
  if (!(opts.f0_min >= kSourceF0Min && opts.f0_max <= kSourceF0Max && opts.f0_min < opts.f0_max))
    throw InvalidInput("voice f0 range must lie inside [110, 320] Hz");
  if (!(opts.formant_scale_ratio >= 1.0)) throw InvalidInput("formant scale ratio must be >= 1");
  const double gap = std::log(kMinF0Ratio);
  const double full = std::log(opts.f0_max / opts.f0_min);
  const double need = gap * static_cast<double>(count - 1);
  if (need > full) throw InvalidInput("cannot place that many sources 8% apart in the f0 range");
  const double band = std::clamp(std::log(opts.register_ratio), need, full);
  const double lo = std::log(opts.f0_min) + rng.uniform(0.0, full - band);

  // Uniform over placements with the minimum gap: sorted uniforms spread
  // the slack, then the fixed gaps are added back.
  std::vector<double> slack(count);
  for (double& u : slack) u = rng.uniform(0.0, band - need);
  std::sort(slack.begin(), slack.end());
  std::vector<double> f0(count);
  for (std::size_t i = 0; i < count; ++i)
    f0[i] = std::clamp(std::exp(lo + slack[i] + gap * static_cast<double>(i)), opts.f0_min, opts.f0_max);
  for (std::size_t i = count - 1; i > 0; --i)
    std::swap(f0[i], f0[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);

  std::vector<SourceSpec> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    SourceSpec& s = out[k];
    s.source_id = static_cast<int>(k);
    s.f0 = f0[k];
    const double scale = std::exp(rng.uniform(-std::log(opts.formant_scale_ratio), std::log(opts.formant_scale_ratio)));
    // Gains stay small enough that the fundamental remains the strongest partial.
    for (std::size_t i = 0; i < 4; ++i)
      s.formants[i] = {kNominalFormants[i] * scale * rng.uniform(0.97, 1.03), rng.uniform(100.0, 200.0),
                       rng.uniform(0.15, 0.32)};
    s.rolloff = rng.uniform(1.2, 2.0);
  }
  return out;
}

namespace {

// Randomized depth-first search for scripts whose adjacent symbol pairs are
// all distinct across the whole set (gated-off symbols count as one sound).
bool search_scripts(std::vector<ContentScript>& out, std::size_t count, std::set<std::pair<int, int>>& used,
                    RngStream& rng, std::size_t& budget) {
  if (out.size() == count) return true;
  ContentScript c;
  c.content_id = static_cast<int>(out.size());
  std::function<bool(std::size_t)> extend = [&](std::size_t pos) -> bool {
    if (budget == 0) return false;
    --budget;
    if (pos == kSymbolsPerScript) {
      out.push_back(c);
      if (search_scripts(out, count, used, rng, budget)) return true;
      out.pop_back();
      return false;
    }
    std::vector<int> order(kAlphabetSize);
    for (std::size_t i = 0; i < kAlphabetSize; ++i) order[i] = static_cast<int>(i);
    for (std::size_t i = kAlphabetSize - 1; i > 0; --i)
      std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
    for (int sym : order) {
      c.symbols[pos] = sym;
      if (pos == 0) {
        if (extend(1)) return true;
        continue;
      }
      const std::pair<int, int> b{canonical(c.symbols[pos - 1]), canonical(sym)};
      if (b.first == b.second || used.count(b)) continue;
      used.insert(b);
      if (extend(pos + 1)) return true;
      used.erase(b);
      if (budget == 0) return false;
    }
    return false;
  };
  return extend(0);
}

}  // namespace

std::vector<ContentScript> draw_scripts(std::size_t count, RngStream& rng) {
  // Nine voiced symbols plus silence give 10 * 9 ordered pairs without repeats.
  constexpr std::size_t kDistinctPairs = 90;
  const int attempts = count * (kSymbolsPerScript - 1) <= kDistinctPairs ? 20 : 0;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    std::vector<ContentScript> out;
    std::set<std::pair<int, int>> used;
    std::size_t budget = 200000;
    if (search_scripts(out, count, used, rng, budget)) return out;
  }
  // Too many scripts for unique pairs: fall back to distinct scripts.
  std::vector<ContentScript> out;
  std::set<std::array<int, kSymbolsPerScript>> seen;
  while (out.size() < count) {
    ContentScript c;
    c.content_id = static_cast<int>(out.size());
    for (int& s : c.symbols) s = static_cast<int>(rng.uniform_int(0, kAlphabetSize - 1));
    if (seen.insert(c.symbols).second) out.push_back(c);
  }
  return out;
}

SyntheticCorpus make_corpus(std::size_t n_sources, std::size_t n_contents, std::size_t per_cell,
                            std::uint64_t seed, double noise_db, const VoiceOptions& voices) {
  if (n_sources < 2 || n_contents < 2) throw InvalidInput("corpus needs at least 2 sources and 2 contents");
  RngStream source_rng(derive_seed(seed, kSourceTag));
  RngStream script_rng(derive_seed(seed, kScriptTag));
  auto sources = draw_sources(n_sources, source_rng, voices);
  auto scripts = draw_scripts(n_contents, script_rng);
  return make_corpus(std::move(sources), std::move(scripts), per_cell, seed, noise_db);
}

SyntheticCorpus make_corpus(std::vector<SourceSpec> sources, std::vector<ContentScript> scripts,
                            std::size_t per_cell, std::uint64_t seed, double noise_db) {
  if (sources.size() < 2 || scripts.size() < 2) throw InvalidInput("corpus needs at least 2 sources and 2 contents");
  if (per_cell == 0) throw InvalidInput("utterances per cell must be positive");
  for (std::size_t i = 0; i < sources.size(); ++i) sources[i].source_id = static_cast<int>(i);
  for (std::size_t i = 0; i < scripts.size(); ++i) scripts[i].content_id = static_cast<int>(i);

  SyntheticCorpus corpus;
  corpus.noise_db = noise_db;
  const std::size_t total = sources.size() * scripts.size() * per_cell;
  LabeledCorpus& data = corpus.data;
  data.chunks.resize(total);
  data.source_ids.resize(total);
  data.content_ids.resize(total);
  data.seeds.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    data.source_ids[i] = static_cast<int>(i / (scripts.size() * per_cell));
    data.content_ids[i] = static_cast<int>((i / per_cell) % scripts.size());
    data.seeds[i] = derive_seed(seed, kUtteranceTag, i);
  }
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(total); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    SynthSpec spec{sources[static_cast<std::size_t>(data.source_ids[i])],
                   scripts[static_cast<std::size_t>(data.content_ids[i])], noise_db};
    RngStream rng(data.seeds[i]);
    data.chunks[i] = preprocess(synth_utterance(spec, rng)).at(0);
  }
  corpus.sources = std::move(sources);
  corpus.scripts = std::move(scripts);
  return corpus;
}

std::vector<CheckOutcome> evaluate_decomposition(const DecompositionReport& report,
                                                 std::size_t n_contents,
                                                 const DecompositionThresholds& t) {
  const double chance_c = 1.0 / static_cast<double>(n_contents);
  const double b = t.budget_seconds;
  std::vector<CheckOutcome> out{
      {"F1(E_s,source)", report.f1(Encoder::Source, LabelKind::Source, b), t.source_by_source_min, false},
      {"F1(E_c,source)", report.f1(Encoder::Content, LabelKind::Source, b), t.source_by_content_max, true},
      {"F1(E_c,content)", report.f1(Encoder::Content, LabelKind::Content, b),
       chance_c + t.content_by_content_margin, false},
      {"F1(E_s,content)", report.f1(Encoder::Source, LabelKind::Content, b),
       chance_c + t.content_by_source_margin, true},
  };
  for (auto& c : out) c.pass = c.upper ? c.value <= c.bound : c.value >= c.bound;
  return out;
}

TheoremResult theorem_check(const Autodecompose& model, const SyntheticCorpus& corpus,
                            std::uint64_t probe_seed, const DecompositionThresholds& t) {
  TheoremResult r;
  const double budgets[] = {t.budget_seconds};
  r.report = decomposition_report(model, corpus.data, budgets, probe_seed);
  r.checks = evaluate_decomposition(r.report, corpus.scripts.size(), t);
  r.pass = std::all_of(r.checks.begin(), r.checks.end(), [](const CheckOutcome& c) { return c.pass; });
  return r;
}

TheoremResult theorem_check(const AutodecomposeConfig& cfg, const SyntheticCorpus& corpus,
                            const DecompositionThresholds& t,
                            const Autodecompose::EpochCallback& on_epoch) {
  Autodecompose model(cfg);
  TrainingLog log;
  try {
    log = model.fit(corpus.data.chunks, cfg.epochs, on_epoch);
  } catch (const DivergenceError& e) {
    TheoremResult r;
    r.diagnostics = e.what();
    return r;
  }
  TheoremResult r = theorem_check(model, corpus, cfg.seed, t);
  r.log = std::move(log);
  return r;
}

}  // namespace autodecompose
