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

#include "ser/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ser/error.hpp"

namespace ser {

namespace {

constexpr double kIdentityTolerance = 1e-12;
constexpr SamplingMethod kSamplingOrder[] = {SamplingMethod::Undersample, SamplingMethod::None, SamplingMethod::Smote,
                                             SamplingMethod::Adasyn};
constexpr SamplingMethod kSeparatePreference[] = {SamplingMethod::None, SamplingMethod::Undersample,
                                                  SamplingMethod::Smote, SamplingMethod::Adasyn};

void require_predictions(const FoldResult& result) {
  if (result.predictions.empty()) {
    fail(ErrorKind::EmptyResult, "no predictions for " + result.dataset_id + " fold " + std::to_string(result.fold_index));
  }
}

std::string_view set_title(EmotionSetKind set) {
  switch (set) {
    case EmotionSetKind::Four: return "4-Emotions";
    case EmotionSetKind::Five: return "5-Emotions";
    case EmotionSetKind::All: return "N-Emotions";
  }
  return "?";
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string_view to_string(ResultScope scope) {
  return scope == ResultScope::Validation ? "validation" : "speaker_out_test";
}

double accuracy(const FoldResult& result) {
  require_predictions(result);
  std::size_t correct = 0;
  for (const auto& p : result.predictions) correct += p.predicted == p.truth ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(result.predictions.size());
}

double weighted_accuracy(const FoldResult& result) {
  require_predictions(result);
  std::map<EmotionLabel, std::pair<std::size_t, std::size_t>> per_class;  // support, hits
  for (const auto& p : result.predictions) {
    auto& [support, hits] = per_class[p.truth];
    ++support;
    hits += p.predicted == p.truth ? 1 : 0;
  }
  const auto total = static_cast<double>(result.predictions.size());
  double wa = 0.0;
  for (const auto& [label, counts] : per_class) {
    const auto support = static_cast<double>(counts.first);
    wa += (support / total) * (static_cast<double>(counts.second) / support);
  }
  return wa;
}

FoldScore score(const FoldResult& result) {
  FoldScore s;
  s.n = result.predictions.size();
  s.accuracy = accuracy(result);
  s.weighted_accuracy = weighted_accuracy(result);
  for (const auto& p : result.predictions) s.correct += p.predicted == p.truth ? 1 : 0;
  if (std::abs(s.accuracy - s.weighted_accuracy) > kIdentityTolerance) {
    fail(ErrorKind::Internal, "weighted accuracy diverged from accuracy for " + result.dataset_id);
  }
  return s;
}

double aggregate_speaker_out(std::span<const FoldResult> results, std::size_t expected_folds) {
  if (results.size() != expected_folds || results.empty()) {
    fail(ErrorKind::FoldCountMismatch, "got " + std::to_string(results.size()) + " fold results, expected " +
                                           std::to_string(expected_folds));
  }
  double weighted = 0.0;
  double total = 0.0;
  for (const auto& r : results) {
    if (r.scope != ResultScope::SpeakerOutTest) {
      fail(ErrorKind::InvalidArgument, "aggregate_speaker_out given a validation result");
    }
    const auto n = static_cast<double>(r.predictions.size());
    weighted += accuracy(r) * n;
    total += n;
  }
  return weighted / total;
}

std::string_view sampling_tag(SamplingMethod method) {
  switch (method) {
    case SamplingMethod::None: return "UN";
    case SamplingMethod::Undersample: return "DS";
    case SamplingMethod::Smote: return "SM";
    case SamplingMethod::Adasyn: return "AD";
  }
  return "?";
}

void ExperimentGrid::touch(const std::string& dataset_id) {
  if (std::find(datasets_.begin(), datasets_.end(), dataset_id) == datasets_.end()) datasets_.push_back(dataset_id);
}

void ExperimentGrid::set(const std::string& dataset_id, GridColumn column, double percent) {
  if (!std::isfinite(percent)) fail(ErrorKind::InvalidArgument, "grid cell must be finite");
  touch(dataset_id);
  cells_[{dataset_id, column}] = percent;
}

void ExperimentGrid::set_class_count(const std::string& dataset_id, EmotionSetKind set, std::size_t count) {
  touch(dataset_id);
  class_counts_[{dataset_id, set}] = count;
}

std::optional<double> ExperimentGrid::get(const std::string& dataset_id, GridColumn column) const {
  auto it = cells_.find({dataset_id, column});
  if (it == cells_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> ExperimentGrid::class_count(const std::string& dataset_id, EmotionSetKind set) const {
  auto it = class_counts_.find({dataset_id, set});
  if (it == class_counts_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::int64_t> ExperimentGrid::mean_hundredths(GridColumn column) const {
  std::int64_t sum = 0;
  std::int64_t n = 0;
  for (const auto& ds : datasets_) {
    std::optional<double> v = column.regime == SplitRegime::Separate ? separate(ds, column.set) : get(ds, column);
    if (!v) continue;
    sum += to_hundredths(*v);
    ++n;
  }
  if (n == 0) return std::nullopt;
  // Integer division rounding half away from zero.
  const std::int64_t q = (2 * std::llabs(sum) + n) / (2 * n);
  return sum < 0 ? -q : q;
}

std::vector<EmotionSetKind> ExperimentGrid::emotion_sets() const {
  std::vector<EmotionSetKind> sets;
  auto add = [&](EmotionSetKind s) {
    if (std::find(sets.begin(), sets.end(), s) == sets.end()) sets.push_back(s);
  };
  for (const auto& [key, v] : cells_) add(key.second.set);
  for (const auto& [key, v] : class_counts_) add(key.second);
  std::sort(sets.begin(), sets.end());
  return sets;
}

bool ExperimentGrid::has_combined(EmotionSetKind set) const {
  return std::any_of(cells_.begin(), cells_.end(), [&](const auto& kv) {
    return kv.first.second.set == set && kv.first.second.regime == SplitRegime::Combined;
  });
}

std::optional<double> ExperimentGrid::separate(const std::string& dataset_id, EmotionSetKind set) const {
  for (auto m : kSeparatePreference) {
    if (auto v = get(dataset_id, {set, SplitRegime::Separate, m})) return v;
  }
  return std::nullopt;
}

std::int64_t to_hundredths(double percent) { return std::llround(percent * 100.0); }

std::string format_hundredths(std::int64_t hundredths) {
  const std::int64_t mag = std::llabs(hundredths);
  std::ostringstream out;
  if (hundredths < 0) out << '-';
  out << mag / 100 << '.' << (mag % 100 < 10 ? "0" : "") << mag % 100;
  return out.str();
}

std::string render_grid(const ExperimentGrid& grid, GridFormat format) {
  struct Col {
    std::string header;
    std::function<std::string(const std::string&)> cell;
    std::function<std::string()> mean;
  };
  auto fmt = [](std::optional<double> v) { return v ? format_hundredths(to_hundredths(*v)) : std::string("-"); };
  auto fmt_mean = [](std::optional<std::int64_t> h) { return h ? format_hundredths(*h) : std::string("-"); };

  std::vector<Col> cols;
  for (auto set : grid.emotion_sets()) {
    const std::string title(set_title(set));
    const bool csv = format == GridFormat::Csv;
    cols.push_back({csv ? std::string(to_string(set)) + ".emo_no" : title + " Emo. No.",
                    [&grid, set](const std::string& ds) {
                      auto c = grid.class_count(ds, set);
                      return c ? std::to_string(*c) : std::string("-");
                    },
                    [] { return std::string("-"); }});
    if (grid.has_combined(set)) {
      for (auto m : kSamplingOrder) {
        GridColumn gc{set, SplitRegime::Combined, m};
        cols.push_back({csv ? std::string(to_string(set)) + ".co." + std::string(sampling_tag(m))
                            : title + " Tr. Co. " + std::string(sampling_tag(m)),
                        [&grid, gc, fmt](const std::string& ds) { return fmt(grid.get(ds, gc)); },
                        [&grid, gc, fmt_mean] { return fmt_mean(grid.mean_hundredths(gc)); }});
      }
    }
    GridColumn sep{set, SplitRegime::Separate, SamplingMethod::None};
    cols.push_back({csv ? std::string(to_string(set)) + ".sep" : title + " Tr. Sep.",
                    [&grid, set, fmt](const std::string& ds) { return fmt(grid.separate(ds, set)); },
                    [&grid, sep, fmt_mean] { return fmt_mean(grid.mean_hundredths(sep)); }});
  }

  std::ostringstream out;
  if (format == GridFormat::Csv) {
    out << "dataset";
    for (const auto& c : cols) out << ',' << csv_field(c.header);
    out << '\n';
    for (const auto& ds : grid.datasets()) {
      out << csv_field(ds);
      for (const auto& c : cols) out << ',' << c.cell(ds);
      out << '\n';
    }
    out << "Mean";
    for (const auto& c : cols) out << ',' << c.mean();
    out << '\n';
    return out.str();
  }

  out << "| Dataset |";
  for (const auto& c : cols) out << ' ' << c.header << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < cols.size(); ++i) out << "---:|";
  out << '\n';
  for (const auto& ds : grid.datasets()) {
    out << "| " << ds << " |";
    for (const auto& c : cols) out << ' ' << c.cell(ds) << " |";
    out << '\n';
  }
  out << "| **Mean** |";
  for (const auto& c : cols) out << ' ' << c.mean() << " |";
  out << '\n';
  return out.str();
}

std::string ledger_line(const LedgerContext& ctx, const FoldResult& result) {
  const FoldScore s = score(result);
  nlohmann::ordered_json j;
  j["experiment_id"] = ctx.experiment_id;
  j["config_hash"] = ctx.config_hash;
  j["seed"] = ctx.seed;
  j["emotion_set"] = to_string(ctx.emotion_set);
  j["regime"] = to_string(ctx.regime);
  j["sampling"] = to_string(ctx.sampling);
  j["dataset_id"] = result.dataset_id;
  j["n_classes"] = ctx.n_classes;
  j["fold"] = result.fold_index;
  j["scope"] = to_string(result.scope);
  j["n"] = s.n;
  j["correct"] = s.correct;
  j["accuracy"] = s.accuracy;
  j["weighted_accuracy"] = s.weighted_accuracy;
  return j.dump();
}

}  // namespace ser
