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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ser/balancing.hpp"
#include "ser/splits.hpp"
#include "ser/taxonomy.hpp"

namespace ser {

enum class ResultScope { Validation, SpeakerOutTest };

std::string_view to_string(ResultScope scope);

struct Prediction {
  std::string id;
  EmotionLabel predicted;
  EmotionLabel truth;
};

struct FoldResult {
  std::string dataset_id;
  std::size_t fold_index = 0;
  ResultScope scope = ResultScope::Validation;
  std::vector<Prediction> predictions;
};

/// correct / total. Throws EmptyResult.
double accuracy(const FoldResult& result);

/// Sum over classes of (n_c / N) * recall_c. Throws EmptyResult.
double weighted_accuracy(const FoldResult& result);

struct FoldScore {
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  double weighted_accuracy = 0.0;
};

/// Both accuracies, checked to agree within 1e-12 (Internal otherwise).
FoldScore score(const FoldResult& result);

/// Test-set-size weighted mean of fold accuracies. `expected_folds` is the
/// dataset's actual fold count; any other count throws FoldCountMismatch.
double aggregate_speaker_out(std::span<const FoldResult> results, std::size_t expected_folds);

struct GridColumn {
  EmotionSetKind set = EmotionSetKind::Four;
  SplitRegime regime = SplitRegime::Combined;
  SamplingMethod sampling = SamplingMethod::None;

  auto operator<=>(const GridColumn&) const = default;
};

/// Short column tag used in rendered tables: DS, UN, SM, AD.
std::string_view sampling_tag(SamplingMethod method);

/// Accuracy percentages per (dataset, column). Datasets render in insertion
/// order; missing cells render as "-".
class ExperimentGrid {
 public:
  void set(const std::string& dataset_id, GridColumn column, double percent);
  void set_class_count(const std::string& dataset_id, EmotionSetKind set, std::size_t count);

  std::optional<double> get(const std::string& dataset_id, GridColumn column) const;
  std::optional<std::size_t> class_count(const std::string& dataset_id, EmotionSetKind set) const;

  /// Unweighted mean of the column's displayed (2-decimal) dataset values, in
  /// hundredths of a percent. nullopt if the column has no cells.
  std::optional<std::int64_t> mean_hundredths(GridColumn column) const;

  const std::vector<std::string>& datasets() const { return datasets_; }
  std::vector<EmotionSetKind> emotion_sets() const;
  bool has_combined(EmotionSetKind set) const;
  /// The single "Tr. Sep." cell for a dataset: the first separate-regime cell
  /// in sampling order none, undersample, smote, adasyn.
  std::optional<double> separate(const std::string& dataset_id, EmotionSetKind set) const;

 private:
  void touch(const std::string& dataset_id);

  std::vector<std::string> datasets_;
  std::map<std::pair<std::string, GridColumn>, double> cells_;
  std::map<std::pair<std::string, EmotionSetKind>, std::size_t> class_counts_;
};

/// Percent rounded to hundredths (half away from zero).
std::int64_t to_hundredths(double percent);
/// "65.16" style text for a hundredths value.
std::string format_hundredths(std::int64_t hundredths);

enum class GridFormat { Markdown, Csv };

/// Per emotion set: class count, combined DS/UN/SM/AD (when any combined cell
/// exists for the set), then "Tr. Sep."; a "Mean" row closes the table.
std::string render_grid(const ExperimentGrid& grid, GridFormat format);

/// Identity of one experiment cell in the results ledger.
struct LedgerContext {
  std::string experiment_id;
  std::string config_hash;
  std::uint64_t seed = 0;
  EmotionSetKind emotion_set = EmotionSetKind::Four;
  SplitRegime regime = SplitRegime::Combined;
  SamplingMethod sampling = SamplingMethod::None;
  std::size_t n_classes = 0;  // emotion classes the dataset contributes
};

/// One JSON object per line, keys in fixed order.
std::string ledger_line(const LedgerContext& ctx, const FoldResult& result);

}  // namespace ser
