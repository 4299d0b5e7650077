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

#include "autodecompose/augment.hpp"

#include <algorithm>
#include <cmath>

#include "autodecompose/errors.hpp"

namespace autodecompose {

namespace {

constexpr int kFrames = static_cast<int>(MelChunk::kFrames);
constexpr int kBins = static_cast<int>(MelChunk::kBins);

void fill_frames(MelChunk& chunk, int start, int len) {
  for (int t = start; t < std::min(start + len, kFrames); ++t)
    std::fill_n(chunk.values.begin() + t * kBins, kBins, chunk.floor);
}

}  // namespace

void AugmentConfig::validate() const {
  if (scramble_pivots_min < 0 || scramble_pivots_max < scramble_pivots_min)
    throw ConfigError("augment: need 0 <= scramble_pivots_min <= scramble_pivots_max");
  if (time_mask_segments < 0 || time_mask_len < 0 || time_mask_len > kFrames)
    throw ConfigError("augment: time mask counts out of range");
  if (!(stretch_min_pct >= 0.0 && stretch_min_pct <= stretch_max_pct && stretch_max_pct < 100.0))
    throw ConfigError("augment: need 0 <= stretch_min_pct <= stretch_max_pct < 100");
  if (freq_mask_max_segments < 0 || freq_mask_max_len < 0)
    throw ConfigError("augment: frequency mask counts must be non-negative");
  if (freq_mask_protected_low_bins < 0 || freq_mask_protected_low_bins >= kBins ||
      freq_mask_protected_low_bins + freq_mask_max_len > kBins)
    throw ConfigError("augment: protected bins must leave room for a mask segment");
}

std::vector<double> natural_cubic_spline(std::span<const double> y, std::span<const double> xs) {
  const std::size_t n = y.size();
  if (n < 2) throw InvalidInput("natural_cubic_spline: need at least two knots");
  // Second derivatives from the tridiagonal system with unit knot spacing:
  // M[i-1] + 4 M[i] + M[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1]), M[0] = M[n-1] = 0.
  std::vector<double> m2(n, 0.0);
  if (n > 2) {
    const std::size_t k = n - 2;
    std::vector<double> c(k), d(k);
    for (std::size_t i = 0; i < k; ++i) {
      const double rhs = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]);
      if (i == 0) {
        c[i] = 1.0 / 4.0;
        d[i] = rhs / 4.0;
      } else {
        const double denom = 4.0 - c[i - 1];
        c[i] = 1.0 / denom;
        d[i] = (rhs - d[i - 1]) / denom;
      }
    }
    m2[k] = d[k - 1];
    for (std::size_t i = k - 1; i-- > 0;) m2[i + 1] = d[i] - c[i] * m2[i + 2];
  }
  std::vector<double> out(xs.size());
  const double last = static_cast<double>(n - 1);
  for (std::size_t q = 0; q < xs.size(); ++q) {
    const double x = std::clamp(xs[q], 0.0, last);
    const std::size_t i = std::min(static_cast<std::size_t>(x), n - 2);
    const double t = x - static_cast<double>(i);
    const double s = 1.0 - t;
    out[q] = s * y[i] + t * y[i + 1] + ((s * s * s - s) * m2[i] + (t * t * t - t) * m2[i + 1]) / 6.0;
  }
  return out;
}

void rotate_frames(MelChunk& chunk, int pivot) {
  const int frames = static_cast<int>(chunk.values.size()) / kBins;
  if (pivot < 0 || pivot > frames) throw InvalidInput("rotate_frames: pivot out of range");
  std::rotate(chunk.values.begin(), chunk.values.begin() + pivot * kBins, chunk.values.end());
}

void stretch_frequency(MelChunk& chunk, double ratio) {
  if (!(ratio > 0.0)) throw InvalidInput("stretch_frequency: ratio must be positive");
  std::vector<double> xs(kBins);
  for (int m = 0; m < kBins; ++m) xs[static_cast<std::size_t>(m)] = m / ratio;
  std::vector<double> y(kBins);
  for (std::size_t t = 0; t < MelChunk::kFrames; ++t) {
    auto frame = chunk.frame(t);
    std::copy(frame.begin(), frame.end(), y.begin());
    const auto out = natural_cubic_spline(y, xs);
    for (int m = 0; m < kBins; ++m)
      frame[static_cast<std::size_t>(m)] =
          std::max(static_cast<float>(out[static_cast<std::size_t>(m)]), chunk.floor);
  }
}

MelChunk time_scramble(const MelChunk& chunk, RngStream& rng, const AugmentConfig& cfg,
                       AugmentDraws* record) {
  MelChunk out = chunk;
  const auto steps = rng.uniform_int(cfg.scramble_pivots_min, cfg.scramble_pivots_max);
  for (std::int64_t s = 0; s < steps; ++s) {
    const int pivot = static_cast<int>(rng.uniform_int(1, kFrames - 1));
    rotate_frames(out, pivot);
    if (record) record->scramble_pivots.push_back(pivot);
  }
  return out;
}

MelChunk time_mask(const MelChunk& chunk, RngStream& rng, const AugmentConfig& cfg,
                   AugmentDraws* record) {
  MelChunk out = chunk;
  for (int s = 0; s < cfg.time_mask_segments; ++s) {
    const int start = static_cast<int>(rng.uniform_int(0, kFrames - cfg.time_mask_len));
    fill_frames(out, start, cfg.time_mask_len);
    if (record) record->time_mask_starts.push_back(start);
  }
  return out;
}

MelChunk freq_stretch(const MelChunk& chunk, RngStream& rng, const AugmentConfig& cfg,
                      AugmentDraws* record) {
  const double u = rng.uniform(cfg.stretch_min_pct, cfg.stretch_max_pct) / 100.0;
  const double ratio = rng.coin() ? 1.0 + u : 1.0 - u;
  MelChunk out = chunk;
  stretch_frequency(out, ratio);
  if (record) record->stretch_ratio = ratio;
  return out;
}

MelChunk freq_mask(const MelChunk& chunk, RngStream& rng, const AugmentConfig& cfg,
                   AugmentDraws* record) {
  MelChunk out = chunk;
  if (cfg.freq_mask_max_segments == 0 || cfg.freq_mask_max_len == 0) return out;
  const auto segments = rng.uniform_int(1, cfg.freq_mask_max_segments);
  for (std::int64_t s = 0; s < segments; ++s) {
    const int len = static_cast<int>(rng.uniform_int(1, cfg.freq_mask_max_len));
    const int start = static_cast<int>(rng.uniform_int(cfg.freq_mask_protected_low_bins, kBins - len));
    for (std::size_t t = 0; t < MelChunk::kFrames; ++t)
      for (int m = start; m < start + len; ++m) out.at(t, static_cast<std::size_t>(m)) = out.floor;
    if (record) record->freq_masks.emplace_back(start, len);
  }
  return out;
}

MelChunk augment_source_preserving(const MelChunk& chunk, RngStream& rng,
                                   const AugmentConfig& cfg, AugmentDraws* record) {
  return time_mask(time_scramble(chunk, rng, cfg, record), rng, cfg, record);
}

MelChunk augment_content_preserving(const MelChunk& chunk, RngStream& rng,
                                    const AugmentConfig& cfg, AugmentDraws* record) {
  return freq_mask(freq_stretch(chunk, rng, cfg, record), rng, cfg, record);
}

}  // namespace autodecompose
