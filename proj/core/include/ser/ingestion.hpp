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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ser/record.hpp"

namespace ser {

/// Optional delimited sidecar that supplies per-file fields.
struct MetadataTable {
  std::filesystem::path path;  // relative paths resolve against the dataset root
  std::string key_column;
  std::string key_template = "{stem}";          // evaluated per file
  std::map<std::string, std::string> columns;   // record field -> column name
  char delimiter = ',';
};

/// Per-dataset filename/metadata convention.
///
/// `pattern` is matched against the whole path relative to the dataset root
/// ('/' separated). Named groups speaker_id, native_label and language fill
/// the record directly; `fields` may compose them from other groups with
/// "{group}" templates ({stem}, {name} and {relpath} are always available).
/// `value_maps` rename field values after extraction, e.g. RAVDESS emotion
/// codes to names.
struct AdapterRule {
  std::string dataset_id;
  std::string pattern;
  std::map<std::string, std::string> fields;
  std::map<std::string, std::map<std::string, std::string>> value_maps;
  std::string language = "en";
  bool english_only = false;
  std::optional<MetadataTable> metadata_table;
};

/// Parses an adapter document: either one rule object or {"rules": [...]}.
std::vector<AdapterRule> parse_adapter_rules(std::string_view json_text);
std::vector<AdapterRule> load_adapter_rules(const std::filesystem::path& path);

struct SkipEntry {
  std::string path;  // relative to the dataset root
  std::string reason;
};

struct ScanResult {
  std::vector<UtteranceRecord> records;
  std::vector<SkipEntry> skipped;
};

/// One record per matched WAV file, in sorted path order. Files matching no
/// rule, failing to decode or (for english_only rules) not in English go to the
/// skip list. Durations come from the decoded 16 kHz sample count.
///
/// Throws IoError when `root` is unreadable and PatternError for malformed
/// rules, files matching more than one rule, or empty captured labels.
ScanResult scan_dataset(const std::filesystem::path& root, std::span<const AdapterRule> rules,
                        unsigned jobs = 1);

inline ScanResult scan_dataset(const std::filesystem::path& root, const AdapterRule& rule,
                               unsigned jobs = 1) {
  return scan_dataset(root, std::span<const AdapterRule>(&rule, 1), jobs);
}

inline constexpr double kMinDurationS = 2.0;
inline constexpr double kMaxDurationS = 13.0;

/// Keeps records with min_s <= duration_s <= max_s, preserving order.
std::vector<UtteranceRecord> duration_filter(std::span<const UtteranceRecord> records,
                                             double min_s = kMinDurationS,
                                             double max_s = kMaxDurationS);

// Manifest files: JSON Lines, one UtteranceRecord per line.
std::string record_to_json_line(const UtteranceRecord& record);
UtteranceRecord record_from_json_line(std::string_view line);

void write_manifest(const std::filesystem::path& path, std::span<const UtteranceRecord> records);
/// Throws DuplicateId on repeated ids and ParseError on malformed lines.
std::vector<UtteranceRecord> read_manifest(const std::filesystem::path& path);

/// Sibling skip-list path: "<manifest>.skipped".
std::filesystem::path skipped_path(const std::filesystem::path& manifest_path);
void write_skip_list(const std::filesystem::path& path, std::span<const SkipEntry> skipped);

}  // namespace ser
