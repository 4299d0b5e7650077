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

#include <filesystem>
#include <string>

#include "autodecompose/dsp.hpp"

namespace autodecompose {

// ADSPEC1 layout: "ADSPEC1\0" | u32 frames | u32 mels | f32 values, all
// little-endian, rows are time frames.
inline constexpr char kSpecMagic[8] = {'A', 'D', 'S', 'P', 'E', 'C', '1', '\0'};

std::string encode_spectrogram(const Spectrogram& spec);
Spectrogram decode_spectrogram(const std::string& bytes);

void write_spectrogram(const std::filesystem::path& path, const Spectrogram& spec);
Spectrogram read_spectrogram(const std::filesystem::path& path);

// Chunk files are ADSPEC1 with exactly 64 frames of 80 mels. The log floor is
// not stored; the default ln(1e-5) is assumed.
void write_chunk(const std::filesystem::path& path, const MelChunk& chunk);
MelChunk read_chunk(const std::filesystem::path& path);

Spectrogram to_spectrogram(const MelChunk& chunk);

}  // namespace autodecompose
