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

#include "ser/balancing.hpp"
#include "ser/classifier.hpp"
#include "ser/embedding_store.hpp"
#include "ser/metrics.hpp"
#include "ser/record.hpp"
#include "ser/splits.hpp"
#include "ser/taxonomy.hpp"

namespace ser {

struct ExperimentConfig {
  std::string experiment_id;  // defaults to "<set>-<regime>-<sampling>"
  EmotionSetKind emotion_set = EmotionSetKind::Four;
  SplitRegime regime = SplitRegime::Combined;
  std::vector<std::string> datasets;  // separate regime; empty means every dataset present
  SamplingMethod sampling = SamplingMethod::None;
  std::uint64_t seed = 0;

  std::vector<std::filesystem::path> manifests;
  std::vector<std::filesystem::path> stores;
  std::filesystem::path mappings_dir;
  std::filesystem::path output_dir = "runs";

  TrainConfig train;
  double width_multiplier = 1.0;
  std::optional<std::vector<std::size_t>> hidden;  // explicit hidden widths override the multiplier

  SplitPolicy split;
  std::size_t k_neighbors = 5;
  double adasyn_beta = 1.0;

  double min_duration_s = 2.0;
  double max_duration_s = 13.0;
  bool force_duration_filter = false;  // also filter in the separate regime

  unsigned jobs = 1;

  std::string resolved_id() const;
};

/// Parses the JSON config. Relative paths resolve against `base_dir`.
/// Unknown keys and bad values throw ConfigError.
ExperimentConfig parse_experiment_config(std::string_view json_text, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Canonical JSON of everything that affects results (paths, output dir and
/// job count excluded).
std::string canonical_config(const ExperimentConfig& cfg);

/// Digest of the canonical config plus the contents of every input file.
std::string experiment_hash(const ExperimentConfig& cfg);

/// Throws IoError for any missing manifest, store or mapping directory.
void validate_inputs(const ExperimentConfig& cfg);

/// Projected, filtered records joined with their vectors.
struct ExperimentData {
  std::vector<UtteranceRecord> records;
  EmbeddingStore store{1};
};

ExperimentData load_experiment_data(const ExperimentConfig& cfg);

/// Label order used for class indices: the set's labels that occur in `records`.
std::vector<EmotionLabel> present_labels(std::span<const UtteranceRecord> records, const EmotionSet& set);

LabeledMatrix gather(std::span<const std::string> ids, const ExperimentData& data);

Dataset to_dataset(const LabeledMatrix& m, std::span<const EmotionLabel> classes);

/// Audited split plans for the configured regime, stamped with the config
/// hash, experiment id and seed: one combined plan, or one per dataset.
std::vector<SplitPlan> build_plans(const ExperimentConfig& cfg, const ExperimentData& data, const std::string& hash);

/// "plan.json" for the combined plan, "plans/<dataset>.json" otherwise.
std::filesystem::path plan_path(const std::filesystem::path& dir, const SplitPlan& plan);

/// One training cell of a split plan: "combined" or a single dataset.
struct CellSpec {
  std::string name;
  std::vector<std::string> datasets;  // sorted
  std::vector<EmotionLabel> classes;  // class index order
  std::map<std::string, std::size_t> n_classes;  // classes each dataset contributes
  std::vector<std::size_t> layer_dims;
};

std::string cell_name(const SplitPlan& plan);
CellSpec cell_spec(const ExperimentConfig& cfg, const ExperimentData& data, const SplitPlan& plan);

/// Balances one fold's training rows and trains a fresh head with the same
/// seed streams run_experiment uses, so any fold can be regenerated alone.
TrainResult train_fold(const ExperimentConfig& cfg, const ExperimentData& data, const SplitPlan& plan,
                       const CellSpec& cell, std::size_t fold);

/// Validation then speaker-out test results per dataset of the cell; empty
/// scopes are left out.
std::vector<FoldResult> evaluate_fold(const MlpModel& model, const ExperimentData& data, const SplitPlan& plan,
                                      const CellSpec& cell, std::size_t fold);

struct ExperimentOutcome {
  std::filesystem::path directory;
  ExperimentGrid grid;
  std::vector<std::string> ledger;
  std::string config_hash;
};

/// Full run: load, split, balance the training portion of each fold, train,
/// evaluate validation and speaker-out test sets, and write the plan(s),
/// checkpoints, loss curves, ledger.jsonl, grid.md and grid.csv under
/// output_dir/<experiment id>. run.json reads "incomplete" until the end.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

/// Speaker-out ledger records regrouped into a grid; fold accuracies are
/// pooled with test-set-size weights.
ExperimentGrid grid_from_ledger(std::span<const std::string> ledger_lines);

/// Synthetic corpus: every mapped dataset with native labels taken from its
/// mapping, a manifest, and an embedding store with per-label clusters.
struct FixtureSpec {
  std::uint64_t seed = 0;
  std::uint32_t dim = 16;
  std::size_t clips_per_label = 4;  // per speaker
  double cluster_spread = 0.6;
};

struct FixturePaths {
  std::filesystem::path manifest;
  std::filesystem::path store;
};

FixturePaths write_synthetic_fixture(const std::filesystem::path& dir, const Taxonomy& taxonomy,
                                     const FixtureSpec& spec);

/// Speakers per dataset in the synthetic fixture.
std::size_t fixture_speaker_count(const std::string& dataset_id);

/// Path of the bundled data directory (mappings and adapters).
std::filesystem::path default_data_dir();

}  // namespace ser
