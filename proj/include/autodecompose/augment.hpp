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

#include <span>
#include <utility>
#include <vector>

#include "autodecompose/dsp.hpp"
#include "autodecompose/rng.hpp"

namespace autodecompose {

struct AugmentConfig {
  int scramble_pivots_min = 5;
  int scramble_pivots_max = 20;
  int time_mask_segments = 2;
  int time_mask_len = 2;  // frames
  double stretch_min_pct = 2.0;
  double stretch_max_pct = 15.0;
  int freq_mask_max_segments = 15;
  int freq_mask_max_len = 5;  // mel bins
  int freq_mask_protected_low_bins = 10;

  void validate() const;
};

// Parameters drawn by one augmentation call, kept for audit sidecars.
struct AugmentDraws {
  std::vector<int> scramble_pivots;
  std::vector<int> time_mask_starts;
  double stretch_ratio = 1.0;
  std::vector<std::pair<int, int>> freq_masks;  // (start bin, length)
};

// Deterministic building blocks.
// New frame order: frames[pivot..64) followed by frames[0..pivot).
void rotate_frames(MelChunk& chunk, int pivot);
// out[m] = spline(m / ratio) per frame, natural cubic spline through the 80
// bins, queries clamped to [0, 79] and values clamped at the chunk floor.
void stretch_frequency(MelChunk& chunk, double ratio);

// Source-preserving family (time axis).
MelChunk time_scramble(const MelChunk& chunk, RngStream& rng, const AugmentConfig& cfg,
                       AugmentDraws* record = nullptr);
MelChunk time_mask(const MelChunk& chunk, RngStream& rng, const AugmentConfig& cfg,
                   AugmentDraws* record = nullptr);

// Content-preserving family (frequency axis).
MelChunk freq_stretch(const MelChunk& chunk, RngStream& rng, const AugmentConfig& cfg,
                      AugmentDraws* record = nullptr);
MelChunk freq_mask(const MelChunk& chunk, RngStream& rng, const AugmentConfig& cfg,
                   AugmentDraws* record = nullptr);

// A_s: scramble then mask in time. Keeps the sound source, destroys content.
MelChunk augment_source_preserving(const MelChunk& chunk, RngStream& rng,
                                   const AugmentConfig& cfg, AugmentDraws* record = nullptr);
// A_c: stretch then mask in frequency. Keeps content, destroys the source.
MelChunk augment_content_preserving(const MelChunk& chunk, RngStream& rng,
                                    const AugmentConfig& cfg, AugmentDraws* record = nullptr);

// Natural cubic spline through (i, y[i]), i = 0..n-1, evaluated at xs.
std::vector<double> natural_cubic_spline(std::span<const double> y, std::span<const double> xs);

}  // namespace autodecompose
