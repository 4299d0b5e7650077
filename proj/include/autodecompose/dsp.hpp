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

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "autodecompose/audio.hpp"

namespace autodecompose {

struct DspConfig {
  int target_rate = 16000;
  double band_low = 90.0;
  double band_high = 7600.0;
  std::size_t n_fft = 256;
  std::size_t hop = 256;
  std::size_t n_mels = 80;
  std::size_t chunk_frames = 64;
  double log_epsilon = 1e-5;

  void validate() const;
  double log_floor() const { return std::log(log_epsilon); }
};

// Row-major (frames x bins) log-mel matrix.
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<float> values;

  float at(std::size_t t, std::size_t m) const { return values[t * bins + m]; }
  std::span<const float> frame(std::size_t t) const { return {values.data() + t * bins, bins}; }
};

// One 64 x 80 log-mel chunk (1.024 s of 16 kHz audio): the model's unit sample.
struct MelChunk {
  static constexpr std::size_t kFrames = 64;
  static constexpr std::size_t kBins = 80;
  static constexpr std::size_t kSize = kFrames * kBins;
  static constexpr double kHopSeconds = 0.016;

  std::vector<float> values = std::vector<float>(kSize, 0.0f);
  float floor = static_cast<float>(std::log(1e-5));

  float& at(std::size_t t, std::size_t m) { return values[t * kBins + m]; }
  float at(std::size_t t, std::size_t m) const { return values[t * kBins + m]; }
  std::span<float> frame(std::size_t t) { return {values.data() + t * kBins, kBins}; }
  std::span<const float> frame(std::size_t t) const { return {values.data() + t * kBins, kBins}; }

  static MelChunk silence(float floor_value);
  // Throws ContractError unless 64 x 80, finite, and >= floor everywhere.
  void validate() const;
  bool operator==(const MelChunk&) const = default;
};

AudioBuffer resample(const AudioBuffer& audio, int target_rate);

AudioBuffer bandpass(const AudioBuffer& audio, double low_hz, double high_hz);

Spectrogram mel_spectrogram(const AudioBuffer& audio, const DspConfig& cfg = {});

std::vector<MelChunk> crop_chunks(const Spectrogram& spec, std::size_t chunk_frames = 64,
                                  float floor_value = static_cast<float>(std::log(1e-5)));

// resample -> bandpass -> mel_spectrogram -> crop_chunks.
std::vector<MelChunk> preprocess(const AudioBuffer& audio, const DspConfig& cfg = {});

double hz_to_mel(double hz);
double mel_to_hz(double mel);
// Center frequencies (Hz) of the triangular filters, low to high.
std::vector<double> mel_filter_centers(const DspConfig& cfg);
// n_mels x (n_fft/2 + 1) triangular weights, peak 1 at each center.
std::vector<double> mel_filterbank(const DspConfig& cfg);

}  // namespace autodecompose
