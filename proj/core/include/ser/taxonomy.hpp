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

#include <array>
#include <bitset>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ser {

struct UtteranceRecord;

/// Unified emotion taxonomy: one value per row of the cross-corpus count table.
enum class EmotionLabel : std::uint8_t {
  angry,
  disgust,
  anxious,
  apologetic,
  assertive,
  concerned,
  encouraging,
  excited,
  frustrated,
  fear,
  happy,
  neutral,
  pain,
  sad,
  surprised,
  contempt,
  amused,
  sleepy,
  calm,
};

inline constexpr std::size_t kEmotionLabelCount = 19;

/// All labels in declaration order.
const std::array<EmotionLabel, kEmotionLabelCount>& all_emotion_labels();

std::string_view to_string(EmotionLabel label);

/// Case-insensitive; returns nullopt for names outside the taxonomy.
std::optional<EmotionLabel> parse_emotion_label(std::string_view name);

enum class EmotionSetKind : std::uint8_t { Four, Five, All };

std::string_view to_string(EmotionSetKind kind);
std::optional<EmotionSetKind> parse_emotion_set_kind(std::string_view name);

/// Label set an experiment trains and tests on.
class EmotionSet {
 public:
  static EmotionSet four();
  static EmotionSet five();
  static EmotionSet all();
  static EmotionSet of(EmotionSetKind kind);

  EmotionSetKind kind() const { return kind_; }
  bool contains(EmotionLabel label) const { return bits_.test(static_cast<std::size_t>(label)); }
  std::vector<EmotionLabel> labels() const;
  std::size_t size() const { return bits_.count(); }

 private:
  EmotionSet(EmotionSetKind kind, std::bitset<kEmotionLabelCount> bits) : kind_(kind), bits_(bits) {}

  EmotionSetKind kind_;
  std::bitset<kEmotionLabelCount> bits_;
};

/// One native-label rule. `native` is a case-insensitive glob ('*', '?').
struct MappingRule {
  std::string native;
  EmotionLabel unified;
  std::bitset<3> sets;  // indexed by EmotionSetKind

  bool applies_to(EmotionSetKind kind) const { return sets.test(static_cast<std::size_t>(kind)); }
};

struct LabelMapping {
  std::string dataset_id;
  int version = 1;
  std::vector<MappingRule> rules;
};

/// Registered per-dataset label mappings.
class Taxonomy {
 public:
  /// Validates the mapping; rejects rules with identical patterns and
  /// overlapping set kinds (AmbiguousMapping).
  void add(LabelMapping mapping);

  bool has_dataset(std::string_view dataset_id) const;
  const LabelMapping& mapping(std::string_view dataset_id) const;
  std::vector<std::string> datasets() const;

  /// Loads every *.json mapping document in a directory.
  static Taxonomy load_directory(const std::filesystem::path& dir);

  /// Parses one mapping document.
  static LabelMapping parse_mapping(std::string_view json_text);
  static std::string serialize_mapping(const LabelMapping& mapping);

 private:
  std::map<std::string, LabelMapping, std::less<>> mappings_;
};

enum class UnknownLabelPolicy { Warn, Strict };

/// Unified label for a native label under an emotion set, or nullopt when the
/// record is excluded from that experiment.
///
/// Throws UnknownDataset when the dataset has no mapping, AmbiguousMapping when
/// two rules match, and (Strict only) UnknownLabel when no rule names the label.
std::optional<EmotionLabel> map_label(const Taxonomy& taxonomy, std::string_view dataset_id,
                                      std::string_view native_label, const EmotionSet& set,
                                      UnknownLabelPolicy policy = UnknownLabelPolicy::Warn);

/// Records whose label maps into `set`, with unified_label filled in. Order is preserved.
std::vector<UtteranceRecord> project_manifest(std::span<const UtteranceRecord> records,
                                              const EmotionSet& set, const Taxonomy& taxonomy,
                                              UnknownLabelPolicy policy = UnknownLabelPolicy::Warn);

/// Case-insensitive glob match supporting '*' and '?'.
bool glob_match(std::string_view pattern, std::string_view text);

}  // namespace ser
