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

#include "autodecompose/spec_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "autodecompose/errors.hpp"

namespace autodecompose {

static_assert(std::endian::native == std::endian::little,
              "ADSPEC1 I/O assumes a little-endian host");

std::string encode_spectrogram(const Spectrogram& spec) {
  if (spec.values.size() != spec.frames * spec.bins)
    throw ContractError("spectrogram value count does not match its shape");
  std::string out(kSpecMagic, sizeof(kSpecMagic));
  const auto frames = static_cast<std::uint32_t>(spec.frames);
  const auto bins = static_cast<std::uint32_t>(spec.bins);
  out.append(reinterpret_cast<const char*>(&frames), 4);
  out.append(reinterpret_cast<const char*>(&bins), 4);
  out.append(reinterpret_cast<const char*>(spec.values.data()), spec.values.size() * sizeof(float));
  return out;
}

Spectrogram decode_spectrogram(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kSpecMagic, 8) != 0)
    throw FormatError("not an ADSPEC1 file (bad magic)");
  std::uint32_t frames, bins;
  std::memcpy(&frames, bytes.data() + 8, 4);
  std::memcpy(&bins, bytes.data() + 12, 4);
  const std::size_t count = static_cast<std::size_t>(frames) * bins;
  if (bytes.size() != 16 + count * sizeof(float))
    throw FormatError("ADSPEC1 payload size does not match its header");
  Spectrogram spec;
  spec.frames = frames;
  spec.bins = bins;
  spec.values.resize(count);
  std::memcpy(spec.values.data(), bytes.data() + 16, count * sizeof(float));
  return spec;
}

void write_spectrogram(const std::filesystem::path& path, const Spectrogram& spec) {
  const std::string bytes = encode_spectrogram(spec);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Spectrogram read_spectrogram(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_spectrogram(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Spectrogram to_spectrogram(const MelChunk& chunk) {
  return {MelChunk::kFrames, MelChunk::kBins, chunk.values};
}

void write_chunk(const std::filesystem::path& path, const MelChunk& chunk) {
  write_spectrogram(path, to_spectrogram(chunk));
}

MelChunk read_chunk(const std::filesystem::path& path) {
  Spectrogram spec = read_spectrogram(path);
  if (spec.frames != MelChunk::kFrames || spec.bins != MelChunk::kBins)
    throw FormatError(path.string() + ": chunk files must be 64 x 80");
  MelChunk chunk;
  chunk.values = std::move(spec.values);
  return chunk;
}

}  // namespace autodecompose
