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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace autodecompose::cli {

enum ExitCode : int { kOk = 0, kChecksFailed = 1, kConfigError = 2, kRuntimeError = 3 };

// Runs one subcommand; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct ManifestRow {
  std::filesystem::path chunk_path;  // resolved against the manifest directory
  std::string source_id;
  std::string content_id;
  std::uint64_t seed = 0;
};

// Reads a chunk manifest CSV. Throws ConfigError naming the first missing
// column out of `required`.
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path,
                                       const std::vector<std::string>& required);

// Default run document: seed, model, probe, synth and check sections.
nlohmann::json default_run_config();

}  // namespace autodecompose::cli
