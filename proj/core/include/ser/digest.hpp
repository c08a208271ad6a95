// Copyright 2026 The serbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace ser {

/// Lowercase hex SHA-256 of the input bytes.
std::string sha256_hex(std::string_view bytes);

/// Streaming SHA-256 of a file. Throws IoError.
std::string sha256_file(const std::filesystem::path& path);

/// Short stable content digest used to tag outputs with their configuration.
inline std::string config_hash(std::string_view canonical_text) {
  return sha256_hex(canonical_text).substr(0, 16);
}

}  // namespace ser
