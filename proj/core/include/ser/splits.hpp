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
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ser/record.hpp"

namespace ser {

struct SplitPolicy {
  std::uint64_t seed = 0;
  /// Datasets whose max/min per-speaker duration ratio is at or below this
  /// value count as balanced and get a random test speaker.
  double balance_ratio_threshold = 1.5;
  std::size_t n_folds = 5;
  /// Datasets trained on a fixed fraction of their pool; the remainder is a
  /// separately reported holdout.
  std::map<std::string, double> train_fraction = {{"EmoFilm", 0.85}};
};

enum class SplitRegime { Separate, Combined };

/// How validation groups were formed.
enum class FoldMode { SpeakerPartition, UtterancePartition, Stratified };

std::string_view to_string(SplitRegime regime);
std::string_view to_string(FoldMode mode);

struct Fold {
  std::vector<std::string> train;       // sorted
  std::vector<std::string> validation;  // sorted

  bool operator==(const Fold&) const = default;
};

struct FoldSet {
  FoldMode mode = FoldMode::SpeakerPartition;
  std::vector<Fold> folds;
  std::vector<std::string> holdout;  // sorted; non-empty only for train_fraction datasets
};

struct SplitPlan {
  SplitRegime regime = SplitRegime::Combined;
  std::string dataset_id;  // Separate regime only
  FoldMode mode = FoldMode::Stratified;
  std::map<std::string, std::string> test_speakers;
  std::map<std::string, std::vector<std::string>> test_ids;     // per dataset, sorted
  std::map<std::string, std::vector<std::string>> holdout_ids;  // per dataset, sorted
  std::vector<Fold> folds;
  std::map<std::string, std::string> meta;  // e.g. config hash and seed

  bool operator==(const SplitPlan&) const = default;
};

/// One held-out test speaker per dataset: random (seeded) when the dataset is
/// balanced, otherwise the speaker with the most speech. Throws
/// SingleSpeakerDataset for datasets with fewer than two speakers.
std::map<std::string, std::string> select_test_speakers(std::span<const UtteranceRecord> manifest,
                                                        const SplitPolicy& policy);

/// Folds for one dataset whose test speaker is already removed.
///  - >= 2 speakers: min(n_folds, speakers) groups, dealt round-robin over
///    speakers sorted by descending duration.
///  - 1 speaker: utterance-level n_folds partition of that speaker's clips.
///  - train_fraction datasets: the fraction is carved out label-stratified,
///    the rest becomes the holdout, and the training portion gets an
///    utterance-level n_folds partition.
/// Throws EmptyTrainingSet when no records belong to the dataset.
FoldSet build_folds(std::span<const UtteranceRecord> manifest, const std::string& dataset_id,
                    const SplitPolicy& policy);

/// n_folds validation groups by dealing each (dataset, label) stratum,
/// shuffled, round-robin across folds.
std::vector<Fold> build_combined_folds(std::span<const UtteranceRecord> manifest, const SplitPolicy& policy);

SplitPlan plan_separate(std::span<const UtteranceRecord> manifest, const std::string& dataset_id,
                        const SplitPolicy& policy);
SplitPlan plan_combined(std::span<const UtteranceRecord> manifest, const SplitPolicy& policy);

std::string plan_to_json(const SplitPlan& plan);
/// Throws ParseError on malformed or empty plans.
SplitPlan plan_from_json(std::string_view text);
void write_plan(const SplitPlan& plan, const std::filesystem::path& path);
SplitPlan read_plan(const std::filesystem::path& path);

struct AuditViolation {
  std::string kind;  // "leakage", "overlap", "coverage", "duplicate"
  std::string id;
  std::optional<std::size_t> fold;
  std::string message;
};

struct AuditReport {
  std::vector<AuditViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Re-verifies the leakage and coverage invariants. With a manifest, ids of
/// any test speaker's utterances are checked too, not just the listed test ids.
AuditReport audit_plan(const SplitPlan& plan, std::span<const UtteranceRecord> manifest = {});

}  // namespace ser
