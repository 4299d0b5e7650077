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

#include "autodecompose/dsp.hpp"

#include <fftw3.h>
#include <omp.h>

#include <algorithm>
#include <array>
#include <mutex>
#include <numbers>
#include <string>

#include "autodecompose/errors.hpp"
#include "autodecompose/kernels.hpp"

namespace autodecompose {

namespace {

constexpr double kPi = std::numbers::pi;

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x); }

// Direct-form-I biquad with RBJ coefficients.
struct Biquad {
  double b0, b1, b2, a1, a2;

  static Biquad highpass(double fs, double f0, double q) {
    const double w = 2.0 * kPi * f0 / fs;
    const double alpha = std::sin(w) / (2.0 * q);
    const double c = std::cos(w);
    const double a0 = 1.0 + alpha;
    return {(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0, -2.0 * c / a0,
            (1.0 - alpha) / a0};
  }
  static Biquad lowpass(double fs, double f0, double q) {
    const double w = 2.0 * kPi * f0 / fs;
    const double alpha = std::sin(w) / (2.0 * q);
    const double c = std::cos(w);
    const double a0 = 1.0 + alpha;
    return {(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0, -2.0 * c / a0,
            (1.0 - alpha) / a0};
  }

  void run(std::vector<double>& x) const {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (double& v : x) {
      const double y = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = v;
      y2 = y1;
      y1 = y;
      v = y;
    }
  }
};

// Pole-pair Q factors of a 4th-order Butterworth prototype.
constexpr std::array<double, 2> kButterworth4Q = {0.54119610014619701, 1.3065629648763766};

struct FftPlan {
  fftw_plan plan = nullptr;
  std::size_t n = 0;
};

// FFTW planning is not thread-safe; plans are created once under a lock and
// then executed concurrently through the new-array interface.
const FftPlan& r2c_plan(std::size_t n) {
  static std::mutex mu;
  static std::vector<FftPlan> plans;
  std::lock_guard lock(mu);
  for (const auto& p : plans)
    if (p.n == n) return p;
  std::vector<double> in(n);
  std::vector<fftw_complex> out(n / 2 + 1);
  FftPlan p;
  p.n = n;
  p.plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(),
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans.push_back(p);
  return plans.back();
}

}  // namespace

void DspConfig::validate() const {
  if (target_rate <= 0 || n_fft == 0 || hop == 0 || n_mels == 0 || chunk_frames == 0 ||
      log_epsilon <= 0.0)
    throw InvalidInput("DspConfig: all sizes and rates must be positive");
  if (!(band_low > 0.0 && band_low < band_high && band_high < target_rate / 2.0))
    throw InvalidInput("DspConfig: need 0 < band_low < band_high < target_rate/2");
  if (hop > n_fft) throw InvalidInput("DspConfig: hop must not exceed n_fft");
}

MelChunk MelChunk::silence(float floor_value) {
  MelChunk c;
  c.floor = floor_value;
  std::fill(c.values.begin(), c.values.end(), floor_value);
  return c;
}

void MelChunk::validate() const {
  if (values.size() != kSize) throw ContractError("MelChunk must hold exactly 64 x 80 values");
  for (float v : values) {
    if (!std::isfinite(v)) throw ContractError("MelChunk contains a non-finite value");
    if (v < floor) throw ContractError("MelChunk value below its log floor");
  }
}

AudioBuffer resample(const AudioBuffer& audio, int target_rate) {
  audio.validate();
  if (target_rate <= 0) throw InvalidInput("resample: target rate must be positive");
  if (target_rate == audio.sample_rate) return audio;

  constexpr int kTaps = 64;
  const double ratio = static_cast<double>(target_rate) / audio.sample_rate;
  const double cutoff = std::min(1.0, ratio);  // relative to the input Nyquist
  const auto n_in = static_cast<long long>(audio.samples.size());
  const long long n_out =
      (n_in * target_rate + audio.sample_rate / 2) / static_cast<long long>(audio.sample_rate);

  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(std::max<long long>(n_out, 1)));
  const auto count = static_cast<std::ptrdiff_t>(out.samples.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < count; ++j) {
    const double pos = static_cast<double>(j) * audio.sample_rate / target_rate;
    const long long base = static_cast<long long>(std::floor(pos));
    double acc = 0.0, wsum = 0.0;
    for (long long i = base - kTaps / 2 + 1; i <= base + kTaps / 2; ++i) {
      if (i < 0 || i >= n_in) continue;
      const double tau = pos - static_cast<double>(i);
      // Blackman window over the kTaps-sample support.
      const double u = (tau + kTaps / 2.0) / kTaps;
      if (u <= 0.0 || u >= 1.0) continue;
      const double win = 0.42 - 0.5 * std::cos(2.0 * kPi * u) + 0.08 * std::cos(4.0 * kPi * u);
      const double w = cutoff * sinc(cutoff * tau) * win;
      acc += w * audio.samples[static_cast<std::size_t>(i)];
      wsum += w;
    }
    out.samples[static_cast<std::size_t>(j)] = wsum != 0.0 ? acc / wsum : 0.0;
  }
  return out;
}

AudioBuffer bandpass(const AudioBuffer& audio, double low_hz, double high_hz) {
  audio.validate();
  const double nyquist = audio.sample_rate / 2.0;
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist))
    throw InvalidInput("bandpass: need 0 < low < high < sample_rate/2 (got " +
                       std::to_string(low_hz) + ", " + std::to_string(high_hz) + ")");
  AudioBuffer out = audio;
  const double fs = audio.sample_rate;
  for (double q : kButterworth4Q) Biquad::highpass(fs, low_hz, q).run(out.samples);
  for (double q : kButterworth4Q) Biquad::lowpass(fs, high_hz, q).run(out.samples);
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_filter_centers(const DspConfig& cfg) {
  const double top = hz_to_mel(cfg.target_rate / 2.0);
  std::vector<double> centers(cfg.n_mels);
  for (std::size_t i = 0; i < cfg.n_mels; ++i)
    centers[i] = mel_to_hz(top * static_cast<double>(i + 1) / static_cast<double>(cfg.n_mels + 1));
  return centers;
}

std::vector<double> mel_filterbank(const DspConfig& cfg) {
  const std::size_t n_bins = cfg.n_fft / 2 + 1;
  const double top = hz_to_mel(cfg.target_rate / 2.0);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  std::vector<double> weights(cfg.n_mels * n_bins, 0.0);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * cfg.target_rate / static_cast<double>(cfg.n_fft);
      const double rise = (f - lo) / (mid - lo);
      const double fall = (hi - f) / (hi - mid);
      weights[m * n_bins + k] = std::max(0.0, std::min(rise, fall));
    }
  }
  return weights;
}

Spectrogram mel_spectrogram(const AudioBuffer& audio, const DspConfig& cfg) {
  cfg.validate();
  audio.validate();
  if (audio.sample_rate != cfg.target_rate)
    throw InvalidInput("mel_spectrogram: audio must be at the target rate");
  if (audio.samples.size() < cfg.n_fft)
    throw InvalidInput("mel_spectrogram: audio shorter than one analysis frame");

  const std::size_t n_fft = cfg.n_fft;
  const std::size_t n_bins = n_fft / 2 + 1;
  const std::size_t frames = 1 + (audio.samples.size() - n_fft) / cfg.hop;

  std::vector<double> window(n_fft);
  for (std::size_t i = 0; i < n_fft; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n_fft));

  const FftPlan& plan = r2c_plan(n_fft);
  std::vector<double> power(frames * n_bins);
#pragma omp parallel
  {
    std::vector<double> buf(n_fft);
    std::vector<fftw_complex> spec(n_bins);
#pragma omp for schedule(static)
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(frames); ++t) {
      const double* src = audio.samples.data() + static_cast<std::size_t>(t) * cfg.hop;
      for (std::size_t i = 0; i < n_fft; ++i) buf[i] = src[i] * window[i];
      fftw_execute_dft_r2c(plan.plan, buf.data(), spec.data());
      double* row = power.data() + static_cast<std::size_t>(t) * n_bins;
      for (std::size_t k = 0; k < n_bins; ++k)
        row[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    }
  }

  // mel[t, m] = sum_k power[t, k] * fb[m, k]
  const std::vector<double> fb = mel_filterbank(cfg);
  std::vector<double> mel(frames * cfg.n_mels);
  kernels::gemm<double>(kernels::Op::None, kernels::Op::Trans, frames, cfg.n_mels, n_bins,
                        power.data(), fb.data(), 0.0, mel.data());

  Spectrogram out;
  out.frames = frames;
  out.bins = cfg.n_mels;
  out.values.resize(mel.size());
  const float floor_value = static_cast<float>(cfg.log_floor());
  for (std::size_t i = 0; i < mel.size(); ++i) {
    // Rounding error can leave tiny negative energies on silent input.
    const double v = std::max(mel[i], 0.0);
    out.values[i] = std::max(static_cast<float>(std::log(v + cfg.log_epsilon)), floor_value);
  }
  return out;
}

std::vector<MelChunk> crop_chunks(const Spectrogram& spec, std::size_t chunk_frames,
                                  float floor_value) {
  if (spec.bins != MelChunk::kBins || chunk_frames != MelChunk::kFrames)
    throw InvalidInput("crop_chunks: chunks are fixed at 64 frames x 80 mel bins");
  std::vector<MelChunk> chunks;
  const std::size_t count = spec.frames / chunk_frames;
  chunks.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    MelChunk chunk;
    chunk.floor = floor_value;
    const auto first = spec.values.begin() +
                       static_cast<std::ptrdiff_t>(c * chunk_frames * spec.bins);
    std::copy(first, first + static_cast<std::ptrdiff_t>(MelChunk::kSize), chunk.values.begin());
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

std::vector<MelChunk> preprocess(const AudioBuffer& audio, const DspConfig& cfg) {
  cfg.validate();
  AudioBuffer x = resample(audio, cfg.target_rate);
  x = bandpass(x, cfg.band_low, cfg.band_high);
  if (x.samples.size() < cfg.n_fft) return {};
  return crop_chunks(mel_spectrogram(x, cfg), cfg.chunk_frames,
                     static_cast<float>(cfg.log_floor()));
}

}  // namespace autodecompose
