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

#include "autodecompose/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "autodecompose/errors.hpp"

namespace autodecompose {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

void AudioBuffer::validate() const {
  if (samples.empty()) throw InvalidInput("audio buffer is empty");
  if (sample_rate <= 0) throw InvalidInput("audio sample rate must be positive");
  for (double s : samples)
    if (!std::isfinite(s)) throw InvalidInput("audio buffer contains a non-finite sample");
}

namespace {

template <class T>
T read_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <class T>
void put_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("not a RIFF/WAVE file: " + path.string());

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const auto size = read_le<std::uint32_t>(hdr + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw FormatError("truncated WAV chunk in " + path.string());
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError("short fmt chunk in " + path.string());
      format = read_le<std::uint16_t>(bytes.data() + body);
      channels = read_le<std::uint16_t>(bytes.data() + body + 2);
      rate = read_le<std::uint32_t>(bytes.data() + body + 4);
      bits = read_le<std::uint16_t>(bytes.data() + body + 14);
      if (format == 0xFFFE && size >= 26)  // WAVE_FORMAT_EXTENSIBLE: subformat tag
        format = read_le<std::uint16_t>(bytes.data() + body + 24);
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1u);
  }
  if (channels == 0 || rate == 0) throw FormatError("missing fmt chunk in " + path.string());
  if (data == nullptr) throw FormatError("missing data chunk in " + path.string());

  AudioBuffer audio;
  audio.sample_rate = static_cast<int>(rate);
  if (format == 1 && bits == 16) {
    const std::size_t frame = 2u * channels;
    const std::size_t n = data_size / frame;
    audio.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      audio.samples[i] = read_le<std::int16_t>(data + i * frame) / 32768.0;
  } else if (format == 3 && bits == 32) {
    const std::size_t frame = 4u * channels;
    const std::size_t n = data_size / frame;
    audio.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) audio.samples[i] = read_le<float>(data + i * frame);
  } else {
    throw FormatError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                      std::to_string(bits) + " bits) in " + path.string());
  }
  return audio;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding) {
  const bool pcm = encoding == WavEncoding::Pcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(audio.samples.size() * (bits / 8));
  std::string out;
  out.reserve(44 + data_size);
  out.append("RIFF");
  put_le<std::uint32_t>(out, 36 + data_size);
  out.append("WAVEfmt ");
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, pcm ? 1 : 3);
  put_le<std::uint16_t>(out, 1);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(audio.sample_rate) * (bits / 8));
  put_le<std::uint16_t>(out, bits / 8);
  put_le<std::uint16_t>(out, bits);
  out.append("data");
  put_le<std::uint32_t>(out, data_size);
  for (double s : audio.samples) {
    if (pcm) {
      const double clipped = std::clamp(s, -1.0, 32767.0 / 32768.0);
      put_le<std::int16_t>(out, static_cast<std::int16_t>(std::lround(clipped * 32768.0)));
    } else {
      put_le<float>(out, static_cast<float>(s));
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write WAV file: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace autodecompose
