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
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "autodecompose/audio.hpp"
#include "autodecompose/dsp.hpp"
#include "autodecompose/rng.hpp"

namespace testutil {

using autodecompose::AudioBuffer;
using autodecompose::MelChunk;

inline AudioBuffer sine(double hz, std::size_t n, int rate, double amp = 1.0) {
  AudioBuffer a;
  a.sample_rate = rate;
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    a.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate);
  return a;
}

// |X[k]| for k = 0..n/2 by the textbook O(n^2) sum.
inline std::vector<double> dft_magnitude(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> mag(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i % n) / n);
    mag[k] = std::abs(acc);
  }
  return mag;
}

inline std::size_t argmax(const std::vector<double>& v, std::size_t from = 0) {
  std::size_t best = from;
  for (std::size_t i = from; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// Chunk with values in [floor, floor + 14], occasional floor cells.
inline MelChunk random_chunk(autodecompose::RngStream& rng) {
  MelChunk c;
  for (float& v : c.values) v = rng.uniform01() < 0.05 ? c.floor : c.floor + static_cast<float>(rng.uniform(0.0, 14.0));
  return c;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("adtest_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
