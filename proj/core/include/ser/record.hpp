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

#include <cstdint>
#include <optional>
#include <string>

#include "ser/taxonomy.hpp"

namespace ser {

/// One audio clip of a corpus.
struct UtteranceRecord {
  std::string id;  // dataset_id + "/" + path relative to the dataset root
  std::string dataset_id;
  std::string speaker_id;
  std::string native_label;
  std::optional<EmotionLabel> unified_label;
  double duration_s = 0.0;
  std::string language = "en";
  std::uint32_t sample_rate_hz = 16000;

  bool operator==(const UtteranceRecord&) const = default;
};

}  // namespace ser
