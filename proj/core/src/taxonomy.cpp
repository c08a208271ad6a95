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

#include "ser/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ser/error.hpp"
#include "ser/log.hpp"
#include "ser/record.hpp"

namespace ser {

namespace {

constexpr std::array<std::string_view, kEmotionLabelCount> kLabelNames = {
    "angry",   "disgust", "anxious", "apologetic", "assertive", "concerned", "encouraging",
    "excited", "frustrated", "fear", "happy",      "neutral",   "pain",      "sad",
    "surprised", "contempt", "amused", "sleepy",   "calm",
};

constexpr std::array<std::string_view, 3> kSetNames = {"four", "five", "all"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::bitset<kEmotionLabelCount> bits_of(std::initializer_list<EmotionLabel> labels) {
  std::bitset<kEmotionLabelCount> bits;
  for (auto l : labels) bits.set(static_cast<std::size_t>(l));
  return bits;
}

}  // namespace

const std::array<EmotionLabel, kEmotionLabelCount>& all_emotion_labels() {
  static const auto labels = [] {
    std::array<EmotionLabel, kEmotionLabelCount> out{};
    for (std::size_t i = 0; i < kEmotionLabelCount; ++i) out[i] = static_cast<EmotionLabel>(i);
    return out;
  }();
  return labels;
}

std::string_view to_string(EmotionLabel label) {
  return kLabelNames.at(static_cast<std::size_t>(label));
}

std::optional<EmotionLabel> parse_emotion_label(std::string_view name) {
  const std::string key = lower(name);
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (kLabelNames[i] == key) return static_cast<EmotionLabel>(i);
  }
  return std::nullopt;
}

std::string_view to_string(EmotionSetKind kind) {
  return kSetNames.at(static_cast<std::size_t>(kind));
}

std::optional<EmotionSetKind> parse_emotion_set_kind(std::string_view name) {
  const std::string key = lower(name);
  for (std::size_t i = 0; i < kSetNames.size(); ++i) {
    if (kSetNames[i] == key) return static_cast<EmotionSetKind>(i);
  }
  return std::nullopt;
}

EmotionSet EmotionSet::four() {
  using enum EmotionLabel;
  return EmotionSet(EmotionSetKind::Four, bits_of({neutral, angry, happy, sad}));
}

EmotionSet EmotionSet::five() {
  using enum EmotionLabel;
  return EmotionSet(EmotionSetKind::Five, bits_of({neutral, angry, happy, sad, surprised}));
}

EmotionSet EmotionSet::all() {
  std::bitset<kEmotionLabelCount> bits;
  bits.set();
  return EmotionSet(EmotionSetKind::All, bits);
}

EmotionSet EmotionSet::of(EmotionSetKind kind) {
  switch (kind) {
    case EmotionSetKind::Four: return four();
    case EmotionSetKind::Five: return five();
    case EmotionSetKind::All: return all();
  }
  return all();
}

std::vector<EmotionLabel> EmotionSet::labels() const {
  std::vector<EmotionLabel> out;
  for (auto l : all_emotion_labels()) {
    if (contains(l)) out.push_back(l);
  }
  return out;
}

bool glob_match(std::string_view pattern, std::string_view text) {
  // Iterative matcher with single-star backtracking.
  std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
  auto eq = [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
  };
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || (pattern[p] != '*' && eq(pattern[p], text[t])))) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

void Taxonomy::add(LabelMapping mapping) {
  if (mapping.dataset_id.empty()) fail(ErrorKind::ParseError, "mapping without dataset id");
  const auto& rules = mapping.rules;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    if (rules[i].native.empty()) {
      fail(ErrorKind::ParseError, mapping.dataset_id + ": rule with empty native pattern");
    }
    if (rules[i].sets.none()) {
      fail(ErrorKind::ParseError, mapping.dataset_id + ": rule '" + rules[i].native + "' names no sets");
    }
    for (std::size_t j = i + 1; j < rules.size(); ++j) {
      if (lower(rules[i].native) == lower(rules[j].native) && (rules[i].sets & rules[j].sets).any()) {
        fail(ErrorKind::AmbiguousMapping,
             mapping.dataset_id + ": overlapping rules for native label '" + rules[i].native + "'");
      }
    }
  }
  mappings_.insert_or_assign(mapping.dataset_id, std::move(mapping));
}

bool Taxonomy::has_dataset(std::string_view dataset_id) const {
  return mappings_.find(dataset_id) != mappings_.end();
}

const LabelMapping& Taxonomy::mapping(std::string_view dataset_id) const {
  auto it = mappings_.find(dataset_id);
  if (it == mappings_.end()) {
    fail(ErrorKind::UnknownDataset, "no label mapping registered for '" + std::string(dataset_id) + "'");
  }
  return it->second;
}

std::vector<std::string> Taxonomy::datasets() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : mappings_) out.push_back(id);
  return out;
}

LabelMapping Taxonomy::parse_mapping(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("mapping file: ") + e.what());
  }
  LabelMapping mapping;
  try {
    mapping.dataset_id = doc.at("dataset").get<std::string>();
    mapping.version = doc.value("version", 1);
    for (const auto& r : doc.at("rules")) {
      MappingRule rule;
      rule.native = r.at("native").get<std::string>();
      const auto unified = r.at("unified").get<std::string>();
      auto label = parse_emotion_label(unified);
      if (!label) {
        fail(ErrorKind::ParseError,
             mapping.dataset_id + ": '" + unified + "' is not a unified emotion label");
      }
      rule.unified = *label;
      for (const auto& s : r.at("sets")) {
        auto kind = parse_emotion_set_kind(s.get<std::string>());
        if (!kind) fail(ErrorKind::ParseError, mapping.dataset_id + ": unknown set '" + s.dump() + "'");
        rule.sets.set(static_cast<std::size_t>(*kind));
      }
      mapping.rules.push_back(std::move(rule));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("mapping file: ") + e.what());
  }
  return mapping;
}

std::string Taxonomy::serialize_mapping(const LabelMapping& mapping) {
  nlohmann::ordered_json doc;
  doc["dataset"] = mapping.dataset_id;
  doc["version"] = mapping.version;
  doc["rules"] = nlohmann::ordered_json::array();
  for (const auto& rule : mapping.rules) {
    nlohmann::ordered_json r;
    r["native"] = rule.native;
    r["unified"] = std::string(to_string(rule.unified));
    r["sets"] = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < kSetNames.size(); ++k) {
      if (rule.sets.test(k)) r["sets"].push_back(std::string(kSetNames[k]));
    }
    doc["rules"].push_back(std::move(r));
  }
  return doc.dump(2);
}

Taxonomy Taxonomy::load_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail(ErrorKind::IoError, "mapping directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  Taxonomy taxonomy;
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) fail(ErrorKind::IoError, "cannot read " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    taxonomy.add(parse_mapping(ss.str()));
  }
  return taxonomy;
}

std::optional<EmotionLabel> map_label(const Taxonomy& taxonomy, std::string_view dataset_id,
                                      std::string_view native_label, const EmotionSet& set,
                                      UnknownLabelPolicy policy) {
  const LabelMapping& mapping = taxonomy.mapping(dataset_id);
  const MappingRule* hit = nullptr;
  bool named = false;
  for (const auto& rule : mapping.rules) {
    if (!glob_match(rule.native, native_label)) continue;
    named = true;
    if (!rule.applies_to(set.kind())) continue;
    if (hit != nullptr) {
      fail(ErrorKind::AmbiguousMapping, std::string(dataset_id) + ": native label '" +
                                            std::string(native_label) + "' matches rules '" +
                                            hit->native + "' and '" + rule.native + "'");
    }
    hit = &rule;
  }
  if (!named && policy == UnknownLabelPolicy::Strict) {
    fail(ErrorKind::UnknownLabel,
         std::string(dataset_id) + ": no rule for native label '" + std::string(native_label) + "'");
  }
  if (hit == nullptr || !set.contains(hit->unified)) return std::nullopt;
  return hit->unified;
}

std::vector<UtteranceRecord> project_manifest(std::span<const UtteranceRecord> records,
                                              const EmotionSet& set, const Taxonomy& taxonomy,
                                              UnknownLabelPolicy policy) {
  std::vector<UtteranceRecord> out;
  std::map<std::pair<std::string, std::string>, std::size_t> unknown;
  for (const auto& record : records) {
    if (policy == UnknownLabelPolicy::Warn) {
      const auto& rules = taxonomy.mapping(record.dataset_id).rules;
      bool named = std::any_of(rules.begin(), rules.end(), [&](const MappingRule& r) {
        return glob_match(r.native, record.native_label);
      });
      if (!named) {
        ++unknown[{record.dataset_id, record.native_label}];
        continue;
      }
    }
    auto label = map_label(taxonomy, record.dataset_id, record.native_label, set, policy);
    if (!label) continue;
    UtteranceRecord projected = record;
    projected.unified_label = label;
    out.push_back(std::move(projected));
  }
  if (!unknown.empty()) {
    auto logger = log::get("project");
    for (const auto& [key, count] : unknown) {
      logger->warn("{}: {} record(s) with unmapped native label '{}' excluded", key.first, count,
                   key.second);
    }
  }
  return out;
}

}  // namespace ser
