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

#include "ser/ingestion.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <boost/regex.hpp>
#include <nlohmann/json.hpp>

#include "ser/audio.hpp"
#include "ser/error.hpp"
#include "ser/log.hpp"

namespace ser {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::array<std::string, 3> kRecordFields = {"speaker_id", "native_label", "language"};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Replaces "{name}" with vars[name]; unknown names are a PatternError.
std::string expand(const std::string& tmpl, const std::map<std::string, std::string>& vars,
                   const std::string& dataset) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] != '{') {
      out += tmpl[i];
      continue;
    }
    const auto close = tmpl.find('}', i);
    if (close == std::string::npos) fail(ErrorKind::PatternError, dataset + ": unterminated '{' in template " + tmpl);
    const std::string name = tmpl.substr(i + 1, close - i - 1);
    auto it = vars.find(name);
    if (it == vars.end()) fail(ErrorKind::PatternError, dataset + ": template names missing group '" + name + "'");
    out += it->second;
    i = close;
  }
  return out;
}

std::vector<std::string> split_delimited(const std::string& line, char delim) {
  // Minimal RFC 4180 field splitting with quoted fields.
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

using MetadataRows = std::unordered_map<std::string, std::map<std::string, std::string>>;

MetadataRows load_metadata(const MetadataTable& table, const fs::path& root, const std::string& dataset) {
  const fs::path path = table.path.is_absolute() ? table.path : root / table.path;
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::PatternError, dataset + ": empty metadata table " + path.string());
  const auto header = split_delimited(line, table.delimiter);
  auto column_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorKind::PatternError, dataset + ": metadata column '" + name + "' missing");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t key_col = column_index(table.key_column);
  std::map<std::string, std::size_t> field_cols;
  for (const auto& [field, column] : table.columns) field_cols[field] = column_index(column);

  MetadataRows rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_delimited(line, table.delimiter);
    if (cells.size() <= key_col) continue;
    auto& row = rows[cells[key_col]];
    for (const auto& [field, col] : field_cols) {
      if (col < cells.size()) row[field] = cells[col];
    }
  }
  return rows;
}

struct CompiledRule {
  const AdapterRule* rule = nullptr;
  boost::regex regex;
  std::set<std::string> groups;
  MetadataRows metadata;
};

std::set<std::string> named_groups(const std::string& pattern) {
  static const boost::regex group_re(R"(\(\?<([A-Za-z_][A-Za-z0-9_]*)>)");
  std::set<std::string> names;
  for (boost::sregex_iterator it(pattern.begin(), pattern.end(), group_re), end; it != end; ++it) {
    names.insert((*it)[1].str());
  }
  return names;
}

CompiledRule compile(const AdapterRule& rule, const fs::path& root) {
  CompiledRule c;
  c.rule = &rule;
  c.groups = named_groups(rule.pattern);
  try {
    c.regex = boost::regex(rule.pattern, boost::regex::perl);
  } catch (const boost::regex_error& e) {
    fail(ErrorKind::PatternError, rule.dataset_id + ": invalid pattern: " + e.what());
  }
  for (const std::string field : {"speaker_id", "native_label"}) {
    const bool from_group = c.groups.count(field) > 0;
    const bool from_template = rule.fields.count(field) > 0;
    const bool from_table = rule.metadata_table && rule.metadata_table->columns.count(field) > 0;
    if (!from_group && !from_template && !from_table) {
      fail(ErrorKind::PatternError, rule.dataset_id + ": no capture group, template or metadata column for " + field);
    }
  }
  if (rule.metadata_table) c.metadata = load_metadata(*rule.metadata_table, root, rule.dataset_id);
  return c;
}

struct FileOutcome {
  std::optional<UtteranceRecord> record;
  std::optional<SkipEntry> skip;
};

FileOutcome process_file(const fs::path& root, const std::string& rel, const std::vector<CompiledRule>& rules) {
  const CompiledRule* matched = nullptr;
  boost::smatch m;
  boost::smatch best;
  for (const auto& rule : rules) {
    if (boost::regex_match(rel, m, rule.regex)) {
      if (matched != nullptr) {
        fail(ErrorKind::PatternError, rel + " matches rules for both " + matched->rule->dataset_id +
                                          " and " + rule.rule->dataset_id);
      }
      matched = &rule;
      best = m;
    }
  }
  if (matched == nullptr) return {std::nullopt, SkipEntry{rel, "no matching rule"}};
  const AdapterRule& rule = *matched->rule;

  const fs::path relpath(rel);
  std::map<std::string, std::string> vars = {
      {"stem", relpath.stem().string()}, {"name", relpath.filename().string()}, {"relpath", rel}};
  for (const auto& g : matched->groups) {
    if (best[g].matched) vars[g] = best[g].str();
  }

  std::map<std::string, std::string> values;
  values["language"] = rule.language;
  for (const auto& field : kRecordFields) {
    if (auto it = vars.find(field); it != vars.end()) values[field] = it->second;
    if (auto it = rule.fields.find(field); it != rule.fields.end()) {
      values[field] = expand(it->second, vars, rule.dataset_id);
    }
  }
  if (rule.metadata_table) {
    const std::string key = expand(rule.metadata_table->key_template, vars, rule.dataset_id);
    auto row = matched->metadata.find(key);
    if (row == matched->metadata.end()) return {std::nullopt, SkipEntry{rel, "no metadata row for key '" + key + "'"}};
    for (const auto& [field, value] : row->second) values[field] = value;
  }
  for (const auto& [field, map] : rule.value_maps) {
    auto it = values.find(field);
    if (it == values.end()) continue;
    auto mapped = map.find(it->second);
    if (mapped != map.end()) it->second = mapped->second;
  }
  if (values["native_label"].empty()) fail(ErrorKind::PatternError, rule.dataset_id + ": empty native label for " + rel);
  if (values["speaker_id"].empty()) fail(ErrorKind::PatternError, rule.dataset_id + ": empty speaker id for " + rel);

  if (rule.english_only && values["language"] != "en") {
    return {std::nullopt, SkipEntry{rel, "non-English (" + values["language"] + ")"}};
  }

  std::vector<float> samples;
  try {
    samples = decode_resample(read_bytes(root / relpath), kTargetSampleRate);
  } catch (const Error& e) {
    return {std::nullopt, SkipEntry{rel, e.what()}};
  }
  if (samples.empty()) return {std::nullopt, SkipEntry{rel, "no audio samples"}};

  UtteranceRecord r;
  r.id = rule.dataset_id + "/" + rel;
  r.dataset_id = rule.dataset_id;
  r.speaker_id = values["speaker_id"];
  r.native_label = values["native_label"];
  r.duration_s = static_cast<double>(samples.size()) / kTargetSampleRate;
  r.language = values["language"];
  r.sample_rate_hz = kTargetSampleRate;
  return {std::move(r), std::nullopt};
}

}  // namespace

std::vector<AdapterRule> parse_adapter_rules(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("adapter file: ") + e.what());
  }
  std::vector<AdapterRule> rules;
  auto parse_one = [](const json& j) {
    AdapterRule r;
    r.dataset_id = j.at("dataset").get<std::string>();
    r.pattern = j.at("pattern").get<std::string>();
    if (j.contains("fields")) r.fields = j["fields"].get<std::map<std::string, std::string>>();
    if (j.contains("value_maps")) {
      r.value_maps = j["value_maps"].get<std::map<std::string, std::map<std::string, std::string>>>();
    }
    r.language = j.value("language", std::string("en"));
    r.english_only = j.value("english_only", false);
    if (j.contains("metadata_table")) {
      const auto& t = j["metadata_table"];
      MetadataTable table;
      table.path = t.at("path").get<std::string>();
      table.key_column = t.at("key_column").get<std::string>();
      table.key_template = t.value("key", std::string("{stem}"));
      table.columns = t.at("columns").get<std::map<std::string, std::string>>();
      const auto delim = t.value("delimiter", std::string(","));
      table.delimiter = delim == "\\t" ? '\t' : delim.at(0);
      r.metadata_table = std::move(table);
    }
    return r;
  };
  try {
    if (doc.contains("rules")) {
      for (const auto& j : doc["rules"]) rules.push_back(parse_one(j));
    } else {
      rules.push_back(parse_one(doc));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("adapter file: ") + e.what());
  }
  return rules;
}

std::vector<AdapterRule> load_adapter_rules(const fs::path& path) {
  return parse_adapter_rules(read_text(path));
}

ScanResult scan_dataset(const fs::path& root, std::span<const AdapterRule> rules, unsigned jobs) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) fail(ErrorKind::IoError, "dataset root not found: " + root.string());

  std::vector<CompiledRule> compiled;
  for (const auto& rule : rules) compiled.push_back(compile(rule, root));

  std::vector<std::string> files;
  for (auto it = fs::recursive_directory_iterator(root, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    std::string ext = it->path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext != ".wav") continue;
    files.push_back(fs::relative(it->path(), root).generic_string());
  }
  if (ec) fail(ErrorKind::IoError, "cannot walk " + root.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());

  std::vector<FileOutcome> outcomes(files.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      try {
        outcomes[i] = process_file(root, files[i], compiled);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(files.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  ScanResult result;
  for (auto& o : outcomes) {
    if (o.record) result.records.push_back(std::move(*o.record));
    if (o.skip) result.skipped.push_back(std::move(*o.skip));
  }
  log::get("scan")->info("{}: {} records, {} skipped", root.string(), result.records.size(), result.skipped.size());
  return result;
}

std::vector<UtteranceRecord> duration_filter(std::span<const UtteranceRecord> records, double min_s,
                                             double max_s) {
  std::vector<UtteranceRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [&](const UtteranceRecord& r) { return r.duration_s >= min_s && r.duration_s <= max_s; });
  return out;
}

std::string record_to_json_line(const UtteranceRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["dataset_id"] = r.dataset_id;
  j["speaker_id"] = r.speaker_id;
  j["native_label"] = r.native_label;
  j["unified_label"] = r.unified_label ? json(std::string(to_string(*r.unified_label))) : json(nullptr);
  j["duration_s"] = r.duration_s;
  j["language"] = r.language;
  j["sample_rate_hz"] = r.sample_rate_hz;
  return j.dump();
}

UtteranceRecord record_from_json_line(std::string_view line) {
  UtteranceRecord r;
  try {
    const json j = json::parse(line);
    r.id = j.at("id").get<std::string>();
    r.dataset_id = j.at("dataset_id").get<std::string>();
    r.speaker_id = j.at("speaker_id").get<std::string>();
    r.native_label = j.at("native_label").get<std::string>();
    if (j.contains("unified_label") && !j["unified_label"].is_null()) {
      const auto name = j["unified_label"].get<std::string>();
      r.unified_label = parse_emotion_label(name);
      if (!r.unified_label) fail(ErrorKind::ParseError, "unknown unified label '" + name + "'");
    }
    r.duration_s = j.at("duration_s").get<double>();
    r.language = j.at("language").get<std::string>();
    r.sample_rate_hz = j.at("sample_rate_hz").get<std::uint32_t>();
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("manifest line: ") + e.what());
  }
  if (r.id.empty()) fail(ErrorKind::ParseError, "manifest record with empty id");
  if (!(r.duration_s > 0.0)) fail(ErrorKind::ParseError, r.id + ": duration_s must be positive");
  if (r.sample_rate_hz == 0) fail(ErrorKind::ParseError, r.id + ": sample_rate_hz must be positive");
  return r;
}

void write_manifest(const fs::path& path, std::span<const UtteranceRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& r : records) out << record_to_json_line(r) << '\n';
  if (!out) fail(ErrorKind::IoError, "write failed: " + path.string());
}

std::vector<UtteranceRecord> read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot read " + path.string());
  std::vector<UtteranceRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    UtteranceRecord r;
    try {
      r = record_from_json_line(line);
    } catch (const Error& e) {
      fail(e.kind(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(r.id).second) fail(ErrorKind::DuplicateId, path.string() + ": duplicate id " + r.id);
    records.push_back(std::move(r));
  }
  return records;
}

fs::path skipped_path(const fs::path& manifest_path) {
  fs::path p = manifest_path;
  p += ".skipped";
  return p;
}

void write_skip_list(const fs::path& path, std::span<const SkipEntry> skipped) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& s : skipped) out << s.path << '\t' << s.reason << '\n';
}

}  // namespace ser
