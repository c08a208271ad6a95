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

#include "ser/splits.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ser/error.hpp"
#include "ser/log.hpp"
#include "ser/rng.hpp"

namespace ser {

using nlohmann::json;

namespace {

struct SpeakerTotal {
  std::string speaker;
  double duration = 0.0;
};

/// Speakers of one dataset with their total duration, sorted by id.
std::vector<SpeakerTotal> speaker_totals(std::span<const UtteranceRecord> records, const std::string& dataset) {
  std::map<std::string, double> totals;
  for (const auto& r : records) {
    if (r.dataset_id == dataset) totals[r.speaker_id] += r.duration_s;
  }
  std::vector<SpeakerTotal> out;
  for (const auto& [s, d] : totals) out.push_back({s, d});
  return out;
}

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::string label_key(const UtteranceRecord& r) {
  return r.unified_label ? std::string(to_string(*r.unified_label)) : r.native_label;
}

/// Assembles folds from validation groups over a pool of ids.
std::vector<Fold> folds_from_groups(const std::vector<std::vector<std::string>>& groups) {
  std::vector<Fold> folds(groups.size());
  for (std::size_t f = 0; f < groups.size(); ++f) {
    folds[f].validation = sorted(groups[f]);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (g != f) folds[f].train.insert(folds[f].train.end(), groups[g].begin(), groups[g].end());
    }
    folds[f].train = sorted(std::move(folds[f].train));
  }
  return folds;
}

std::vector<std::vector<std::string>> deal_utterances(std::vector<std::string> ids, std::size_t n_folds, Rng& rng) {
  std::sort(ids.begin(), ids.end());
  rng.shuffle(ids);
  std::vector<std::vector<std::string>> groups(n_folds);
  for (std::size_t i = 0; i < ids.size(); ++i) groups[i % n_folds].push_back(ids[i]);
  return groups;
}

std::map<std::string, std::vector<std::string>> ids_by_label(std::span<const UtteranceRecord> records) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& r : records) out[label_key(r)].push_back(r.id);
  return out;
}

std::vector<std::string> json_strings(const json& j, const char* what) {
  if (!j.is_array()) fail(ErrorKind::ParseError, std::string(what) + " must be an array");
  return j.get<std::vector<std::string>>();
}

}  // namespace

std::string_view to_string(SplitRegime regime) {
  return regime == SplitRegime::Combined ? "combined" : "separate";
}

std::string_view to_string(FoldMode mode) {
  switch (mode) {
    case FoldMode::SpeakerPartition: return "speaker";
    case FoldMode::UtterancePartition: return "utterance";
    case FoldMode::Stratified: return "stratified";
  }
  return "speaker";
}

std::map<std::string, std::string> select_test_speakers(std::span<const UtteranceRecord> manifest,
                                                        const SplitPolicy& policy) {
  std::set<std::string> datasets;
  for (const auto& r : manifest) datasets.insert(r.dataset_id);
  std::map<std::string, std::string> chosen;
  for (const auto& dataset : datasets) {
    const auto speakers = speaker_totals(manifest, dataset);
    if (speakers.size() < 2) {
      fail(ErrorKind::SingleSpeakerDataset, dataset + " has " + std::to_string(speakers.size()) + " speaker(s)");
    }
    auto [lo, hi] = std::minmax_element(speakers.begin(), speakers.end(),
                                        [](const auto& a, const auto& b) { return a.duration < b.duration; });
    const double ratio = lo->duration > 0.0 ? hi->duration / lo->duration : INFINITY;
    if (ratio <= policy.balance_ratio_threshold) {
      Rng rng = stream_rng(policy.seed, "split/test_speaker/" + dataset);
      chosen[dataset] = speakers[rng.uniform_index(speakers.size())].speaker;
    } else {
      // max_element keeps the first maximum, i.e. the lexicographically smallest id on ties.
      auto most = std::max_element(speakers.begin(), speakers.end(),
                                   [](const auto& a, const auto& b) { return a.duration < b.duration; });
      chosen[dataset] = most->speaker;
    }
  }
  return chosen;
}

FoldSet build_folds(std::span<const UtteranceRecord> manifest, const std::string& dataset_id,
                    const SplitPolicy& policy) {
  if (policy.n_folds < 2) fail(ErrorKind::InvalidArgument, "n_folds must be at least 2");
  std::vector<UtteranceRecord> records;
  for (const auto& r : manifest) {
    if (r.dataset_id == dataset_id) records.push_back(r);
  }
  if (records.empty()) fail(ErrorKind::EmptyTrainingSet, dataset_id + ": no training records");

  FoldSet out;
  Rng rng = stream_rng(policy.seed, "split/folds/" + dataset_id);

  if (auto frac = policy.train_fraction.find(dataset_id); frac != policy.train_fraction.end()) {
    if (!(frac->second > 0.0 && frac->second <= 1.0)) {
      fail(ErrorKind::InvalidArgument, dataset_id + ": train fraction must lie in (0, 1]");
    }
    std::vector<std::string> pool;
    for (auto& [label, ids] : ids_by_label(records)) {
      std::sort(ids.begin(), ids.end());
      rng.shuffle(ids);
      const auto n_train = static_cast<std::size_t>(std::llround(frac->second * static_cast<double>(ids.size())));
      pool.insert(pool.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
      out.holdout.insert(out.holdout.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
    }
    out.holdout = sorted(std::move(out.holdout));
    if (pool.empty()) fail(ErrorKind::EmptyTrainingSet, dataset_id + ": training fraction selects no records");
    out.mode = FoldMode::UtterancePartition;
    out.folds = folds_from_groups(deal_utterances(std::move(pool), policy.n_folds, rng));
    return out;
  }

  auto speakers = speaker_totals(records, dataset_id);
  if (speakers.size() == 1) {
    std::vector<std::string> ids;
    for (const auto& r : records) ids.push_back(r.id);
    out.mode = FoldMode::UtterancePartition;
    out.folds = folds_from_groups(deal_utterances(std::move(ids), policy.n_folds, rng));
    return out;
  }

  std::stable_sort(speakers.begin(), speakers.end(),
                   [](const auto& a, const auto& b) { return a.duration > b.duration; });
  const std::size_t n_groups = std::min(policy.n_folds, speakers.size());
  std::map<std::string, std::size_t> group_of;
  for (std::size_t i = 0; i < speakers.size(); ++i) group_of[speakers[i].speaker] = i % n_groups;
  std::vector<std::vector<std::string>> groups(n_groups);
  for (const auto& r : records) groups[group_of.at(r.speaker_id)].push_back(r.id);
  out.mode = FoldMode::SpeakerPartition;
  out.folds = folds_from_groups(groups);
  return out;
}

std::vector<Fold> build_combined_folds(std::span<const UtteranceRecord> manifest, const SplitPolicy& policy) {
  if (policy.n_folds < 2) fail(ErrorKind::InvalidArgument, "n_folds must be at least 2");
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> strata;
  for (const auto& r : manifest) strata[{r.dataset_id, label_key(r)}].push_back(r.id);
  std::set<std::string> datasets;
  for (const auto& [key, _] : strata) datasets.insert(key.first);
  if (datasets.size() < 2) fail(ErrorKind::InvalidArgument, "combined folds need at least two datasets");

  auto logger = log::get("split");
  std::vector<std::vector<std::string>> groups(policy.n_folds);
  std::size_t cursor = 0;  // carried across strata so fold totals stay even
  for (auto& [key, ids] : strata) {
    if (ids.size() < policy.n_folds) {
      logger->warn("EmptyStratum: {}/{} has {} item(s) for {} folds", key.first, key.second, ids.size(),
                   policy.n_folds);
    }
    std::sort(ids.begin(), ids.end());
    Rng rng = stream_rng(policy.seed, "split/combined/" + key.first + "/" + key.second);
    rng.shuffle(ids);
    for (const auto& id : ids) groups[cursor++ % policy.n_folds].push_back(id);
  }
  return folds_from_groups(groups);
}

namespace {

std::vector<UtteranceRecord> without_test_speakers(std::span<const UtteranceRecord> manifest,
                                                   const std::map<std::string, std::string>& test_speakers,
                                                   std::map<std::string, std::vector<std::string>>& test_ids) {
  std::vector<UtteranceRecord> rest;
  for (const auto& r : manifest) {
    auto it = test_speakers.find(r.dataset_id);
    if (it != test_speakers.end() && it->second == r.speaker_id) {
      test_ids[r.dataset_id].push_back(r.id);
    } else {
      rest.push_back(r);
    }
  }
  for (auto& [_, ids] : test_ids) std::sort(ids.begin(), ids.end());
  return rest;
}

}  // namespace

SplitPlan plan_separate(std::span<const UtteranceRecord> manifest, const std::string& dataset_id,
                        const SplitPolicy& policy) {
  std::vector<UtteranceRecord> records;
  for (const auto& r : manifest) {
    if (r.dataset_id == dataset_id) records.push_back(r);
  }
  if (records.empty()) fail(ErrorKind::EmptyTrainingSet, dataset_id + ": no records in manifest");
  SplitPlan plan;
  plan.regime = SplitRegime::Separate;
  plan.dataset_id = dataset_id;
  plan.test_speakers = select_test_speakers(records, policy);
  const auto rest = without_test_speakers(records, plan.test_speakers, plan.test_ids);
  FoldSet folds = build_folds(rest, dataset_id, policy);
  plan.mode = folds.mode;
  plan.folds = std::move(folds.folds);
  if (!folds.holdout.empty()) plan.holdout_ids[dataset_id] = std::move(folds.holdout);
  return plan;
}

SplitPlan plan_combined(std::span<const UtteranceRecord> manifest, const SplitPolicy& policy) {
  SplitPlan plan;
  plan.regime = SplitRegime::Combined;
  plan.mode = FoldMode::Stratified;
  plan.test_speakers = select_test_speakers(manifest, policy);
  const auto rest = without_test_speakers(manifest, plan.test_speakers, plan.test_ids);
  plan.folds = build_combined_folds(rest, policy);
  return plan;
}

std::string plan_to_json(const SplitPlan& plan) {
  nlohmann::ordered_json j;
  j["regime"] = std::string(to_string(plan.regime));
  if (!plan.dataset_id.empty()) j["dataset"] = plan.dataset_id;
  j["fold_mode"] = std::string(to_string(plan.mode));
  j["meta"] = plan.meta;
  j["test_speakers"] = plan.test_speakers;
  j["test_ids"] = plan.test_ids;
  j["holdout_ids"] = plan.holdout_ids;
  j["folds"] = nlohmann::ordered_json::array();
  for (const auto& f : plan.folds) {
    nlohmann::ordered_json fj;
    fj["train"] = f.train;
    fj["validation"] = f.validation;
    j["folds"].push_back(std::move(fj));
  }
  return j.dump(1) + "\n";
}

SplitPlan plan_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("split plan: ") + e.what());
  }
  if (!j.is_object() || !j.contains("folds") || !j["folds"].is_array() || j["folds"].empty()) {
    fail(ErrorKind::ParseError, "split plan has no folds");
  }
  SplitPlan plan;
  try {
    const auto regime = j.value("regime", std::string("combined"));
    if (regime != "combined" && regime != "separate") fail(ErrorKind::ParseError, "unknown regime " + regime);
    plan.regime = regime == "combined" ? SplitRegime::Combined : SplitRegime::Separate;
    plan.dataset_id = j.value("dataset", std::string());
    const auto mode = j.value("fold_mode", std::string("stratified"));
    plan.mode = mode == "speaker" ? FoldMode::SpeakerPartition
                : mode == "utterance" ? FoldMode::UtterancePartition
                                      : FoldMode::Stratified;
    if (j.contains("meta")) plan.meta = j["meta"].get<std::map<std::string, std::string>>();
    if (j.contains("test_speakers")) plan.test_speakers = j["test_speakers"].get<std::map<std::string, std::string>>();
    if (j.contains("test_ids")) {
      for (const auto& [ds, ids] : j["test_ids"].items()) plan.test_ids[ds] = json_strings(ids, "test_ids");
    }
    if (j.contains("holdout_ids")) {
      for (const auto& [ds, ids] : j["holdout_ids"].items()) plan.holdout_ids[ds] = json_strings(ids, "holdout_ids");
    }
    for (const auto& fj : j["folds"]) {
      Fold f;
      f.train = json_strings(fj.at("train"), "train");
      f.validation = json_strings(fj.at("validation"), "validation");
      plan.folds.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("split plan: ") + e.what());
  }
  return plan;
}

void write_plan(const SplitPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out << plan_to_json(plan);
}

SplitPlan read_plan(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return plan_from_json(ss.str());
}

AuditReport audit_plan(const SplitPlan& plan, std::span<const UtteranceRecord> manifest) {
  AuditReport report;
  auto add = [&](std::string kind, const std::string& id, std::optional<std::size_t> fold, std::string msg) {
    report.violations.push_back({std::move(kind), id, fold, std::move(msg)});
  };

  // Ids that must never appear in a fold, with the reason.
  std::unordered_map<std::string, std::string> forbidden;
  for (const auto& [ds, ids] : plan.test_ids) {
    for (const auto& id : ids) forbidden.emplace(id, "test speaker utterance of " + ds);
  }
  for (const auto& [ds, ids] : plan.holdout_ids) {
    for (const auto& id : ids) forbidden.emplace(id, "holdout utterance of " + ds);
  }
  for (const auto& r : manifest) {
    auto it = plan.test_speakers.find(r.dataset_id);
    if (it != plan.test_speakers.end() && it->second == r.speaker_id) {
      forbidden.emplace(r.id, "utterance of test speaker " + r.dataset_id + "/" + r.speaker_id);
    }
  }

  std::unordered_set<std::string> leaked;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto& fold = plan.folds[f];
    for (const auto* part : {&fold.train, &fold.validation}) {
      const char* name = part == &fold.train ? "train" : "validation";
      std::unordered_set<std::string> seen;
      for (const auto& id : *part) {
        if (!seen.insert(id).second) add("duplicate", id, f, std::string("repeated in ") + name);
        if (auto it = forbidden.find(id); it != forbidden.end()) {
          add("leakage", id, f, std::string("in ") + name + ": " + it->second);
          leaked.insert(id);
        }
      }
    }
    std::unordered_set<std::string> train(fold.train.begin(), fold.train.end());
    for (const auto& id : fold.validation) {
      if (train.count(id)) add("overlap", id, f, "in both train and validation");
    }
  }

  // Coverage: every fold spans the same pool, and validation groups partition it.
  std::set<std::string> pool;
  for (const auto& fold : plan.folds) {
    for (const auto& id : fold.train) if (!leaked.count(id)) pool.insert(id);
    for (const auto& id : fold.validation) if (!leaked.count(id)) pool.insert(id);
  }
  std::unordered_map<std::string, std::size_t> validated_in;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto& fold = plan.folds[f];
    std::unordered_set<std::string> present(fold.train.begin(), fold.train.end());
    present.insert(fold.validation.begin(), fold.validation.end());
    for (const auto& id : pool) {
      if (!present.count(id)) add("coverage", id, f, "missing from fold");
    }
    for (const auto& id : fold.validation) {
      if (leaked.count(id)) continue;
      auto [it, inserted] = validated_in.emplace(id, f);
      if (!inserted) add("coverage", id, f, "also validated in fold " + std::to_string(it->second));
    }
  }
  for (const auto& id : pool) {
    if (!validated_in.count(id)) add("coverage", id, std::nullopt, "never in a validation set");
  }
  return report;
}

}  // namespace ser
