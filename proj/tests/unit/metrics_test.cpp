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

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "ser/metrics.hpp"
#include "ser/rng.hpp"
#include "test_support.hpp"

namespace ser {
namespace {

using L = EmotionLabel;

FoldResult make_result(std::vector<std::pair<L, L>> truth_pred, ResultScope scope = ResultScope::SpeakerOutTest) {
  FoldResult r;
  r.dataset_id = "D";
  r.scope = scope;
  for (std::size_t i = 0; i < truth_pred.size(); ++i) {
    r.predictions.push_back({"u" + std::to_string(i), truth_pred[i].second, truth_pred[i].first});
  }
  return r;
}

FoldResult sized_result(std::size_t n, std::size_t correct, std::size_t fold) {
  FoldResult r;
  r.dataset_id = "D";
  r.fold_index = fold;
  r.scope = ResultScope::SpeakerOutTest;
  for (std::size_t i = 0; i < n; ++i) r.predictions.push_back({"u" + std::to_string(i), i < correct ? L::sad : L::angry, L::sad});
  return r;
}

TEST(Metrics, AccuracyCountsMatches) {
  const auto r = make_result({{L::angry, L::angry}, {L::angry, L::sad}, {L::sad, L::sad}, {L::sad, L::sad}});
  EXPECT_DOUBLE_EQ(accuracy(r), 0.75);
}

TEST(Metrics, WeightedAccuracyWeighsRecallBySupport) {
  // Supports {angry: 3, sad: 1}; recalls {2/3, 1}.
  const auto r = make_result({{L::angry, L::angry}, {L::angry, L::angry}, {L::angry, L::sad}, {L::sad, L::sad}});
  EXPECT_NEAR(weighted_accuracy(r), 0.75, 1e-15);
}

TEST(Metrics, WeightedAccuracyEqualsAccuracyOnRandomResults) {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto r = testing::random_fold_result(rng, 300);
    EXPECT_NEAR(weighted_accuracy(r), accuracy(r), 1e-12);
    const auto s = score(r);
    EXPECT_EQ(s.n, r.predictions.size());
    EXPECT_DOUBLE_EQ(s.accuracy, static_cast<double>(s.correct) / static_cast<double>(s.n));
  }
}

TEST(Metrics, EmptyResultIsAnError) {
  FoldResult r;
  EXPECT_EQ(testing::kind_of([&] { accuracy(r); }), ErrorKind::EmptyResult);
  EXPECT_EQ(testing::kind_of([&] { weighted_accuracy(r); }), ErrorKind::EmptyResult);
}

TEST(Metrics, AggregateIsSizeWeighted) {
  // Four perfect folds of 10 and one half-right fold: (40 + n/2) / (40 + n).
  for (std::size_t last : {40u, 60u}) {
    std::vector<FoldResult> folds;
    for (std::size_t f = 0; f < 4; ++f) folds.push_back(sized_result(10, 10, f));
    folds.push_back(sized_result(last, last / 2, 4));
    const double n = static_cast<double>(last);
    EXPECT_NEAR(aggregate_speaker_out(folds, 5), (40.0 + n / 2) / (40.0 + n), 1e-15);
  }
  std::vector<FoldResult> equal;
  for (std::size_t f = 0; f < 5; ++f) equal.push_back(sized_result(20, 4 * f, f));
  EXPECT_NEAR(aggregate_speaker_out(equal, 5), (0.0 + 0.2 + 0.4 + 0.6 + 0.8) / 5, 1e-15);
}

TEST(Metrics, AggregateMatchesPooledComputation) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(4);
    std::vector<FoldResult> folds;
    for (std::size_t f = 0; f < k; ++f) {
      folds.push_back(testing::random_fold_result(rng, 120));
      folds.back().fold_index = f;
    }
    EXPECT_NEAR(aggregate_speaker_out(folds, k), testing::pooled_accuracy(folds), 1e-12);
  }
}

TEST(Metrics, AggregateChecksTheFoldCount) {
  std::vector<FoldResult> four;
  for (std::size_t f = 0; f < 4; ++f) four.push_back(sized_result(10, 5, f));
  EXPECT_EQ(testing::kind_of([&] { aggregate_speaker_out(four, 5); }), ErrorKind::FoldCountMismatch);
  EXPECT_DOUBLE_EQ(aggregate_speaker_out(four, 4), 0.5);  // legitimately reduced
  EXPECT_EQ(testing::kind_of([&] { aggregate_speaker_out({}, 5); }), ErrorKind::FoldCountMismatch);
  four[0].scope = ResultScope::Validation;
  EXPECT_EQ(testing::kind_of([&] { aggregate_speaker_out(four, 4); }), ErrorKind::InvalidArgument);
}

TEST(Metrics, HundredthsFormatting) {
  EXPECT_EQ(to_hundredths(79.114), 7911);
  EXPECT_EQ(to_hundredths(-0.125), -13);
  EXPECT_EQ(format_hundredths(6516), "65.16");
  EXPECT_EQ(format_hundredths(5), "0.05");
  EXPECT_EQ(format_hundredths(-1230), "-12.30");
}

TEST(Metrics, SingleDatasetGridShowsFiftyEverywhere) {
  ExperimentGrid g;
  g.set_class_count("RAVDESS", EmotionSetKind::Four, 4);
  for (auto m : {SamplingMethod::Undersample, SamplingMethod::None, SamplingMethod::Smote, SamplingMethod::Adasyn}) {
    g.set("RAVDESS", {EmotionSetKind::Four, SplitRegime::Combined, m}, 50.0);
  }
  g.set("RAVDESS", {EmotionSetKind::Four, SplitRegime::Separate, SamplingMethod::None}, 50.0);
  const auto csv = render_grid(g, GridFormat::Csv);
  EXPECT_EQ(csv,
            "dataset,four.emo_no,four.co.DS,four.co.UN,four.co.SM,four.co.AD,four.sep\n"
            "RAVDESS,4,50.00,50.00,50.00,50.00,50.00\n"
            "Mean,-,50.00,50.00,50.00,50.00,50.00\n");
  const auto md = render_grid(g, GridFormat::Markdown);
  EXPECT_NE(md.find("4-Emotions Tr. Co. DS"), std::string::npos);
  EXPECT_NE(md.find("| RAVDESS | 4 | 50.00 | 50.00 | 50.00 | 50.00 | 50.00 |"), std::string::npos);
}

TEST(Metrics, MeanRowUsesDisplayedValues) {
  ExperimentGrid g;
  const GridColumn col{EmotionSetKind::Five, SplitRegime::Combined, SamplingMethod::Smote};
  g.set("A", col, 79.11);
  g.set("B", col, 51.20);
  EXPECT_EQ(g.mean_hundredths(col), 6516);
  EXPECT_NE(render_grid(g, GridFormat::Csv).find("Mean,-,-,-,65.16,-,-"), std::string::npos);
}

TEST(Metrics, SeparateColumnTakesFirstAvailableSampling) {
  ExperimentGrid g;
  g.set("A", {EmotionSetKind::All, SplitRegime::Separate, SamplingMethod::Adasyn}, 40.0);
  g.set("A", {EmotionSetKind::All, SplitRegime::Separate, SamplingMethod::Undersample}, 30.0);
  EXPECT_EQ(g.separate("A", EmotionSetKind::All), 30.0);
  EXPECT_FALSE(g.has_combined(EmotionSetKind::All));
  // No combined cells: only the class count and separate columns render.
  EXPECT_EQ(render_grid(g, GridFormat::Csv), "dataset,all.emo_no,all.sep\nA,-,30.00\nMean,-,30.00\n");
}

TEST(Metrics, CsvRoundTripsCellValues) {
  ExperimentGrid g;
  Rng rng(1);
  std::map<std::pair<std::string, SamplingMethod>, std::int64_t> want;
  for (const char* ds : {"A", "B", "C"}) {
    g.set_class_count(ds, EmotionSetKind::Four, 4);
    for (auto m : {SamplingMethod::Undersample, SamplingMethod::None, SamplingMethod::Smote, SamplingMethod::Adasyn}) {
      const double v = 100.0 * rng.uniform01();
      g.set(ds, {EmotionSetKind::Four, SplitRegime::Combined, m}, v);
      want[{ds, m}] = to_hundredths(v);
    }
  }
  std::istringstream in(render_grid(g, GridFormat::Csv));
  std::string line;
  std::getline(in, line);
  const SamplingMethod order[] = {SamplingMethod::Undersample, SamplingMethod::None, SamplingMethod::Smote,
                                  SamplingMethod::Adasyn};
  int rows = 0;
  while (std::getline(in, line) && line.rfind("Mean", 0) != 0) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    ASSERT_EQ(f.size(), 7u);
    for (int c = 0; c < 4; ++c) {
      EXPECT_EQ(std::llround(std::stod(f[2 + c]) * 100), (want[{f[0], order[c]}]));
    }
    ++rows;
  }
  EXPECT_EQ(rows, 3);
}

TEST(Metrics, DatasetsRenderInInsertionOrder) {
  ExperimentGrid g;
  const GridColumn col{EmotionSetKind::Four, SplitRegime::Combined, SamplingMethod::None};
  g.set("zeta", col, 1.0);
  g.set("alpha", col, 2.0);
  EXPECT_EQ(g.datasets(), (std::vector<std::string>{"zeta", "alpha"}));
}

TEST(Metrics, LedgerLineHasFixedKeyOrder) {
  LedgerContext ctx{"four-combined-smote", "abc", 7, EmotionSetKind::Four, SplitRegime::Combined,
                    SamplingMethod::Smote, 4};
  auto r = make_result({{L::angry, L::angry}, {L::sad, L::angry}});
  r.fold_index = 3;
  const auto line = ledger_line(ctx, r);
  const auto j = nlohmann::ordered_json::parse(line);
  std::vector<std::string> keys;
  for (const auto& el : j.items()) keys.push_back(el.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"experiment_id", "config_hash", "seed", "emotion_set", "regime", "sampling",
                                            "dataset_id", "n_classes", "fold", "scope", "n", "correct", "accuracy",
                                            "weighted_accuracy"}));
  EXPECT_EQ(j["scope"], "speaker_out_test");
  EXPECT_EQ(j["correct"], 1);
  EXPECT_DOUBLE_EQ(j["accuracy"].get<double>(), 0.5);
  EXPECT_EQ(line.find('\n'), std::string::npos);
}

}  // namespace
}  // namespace ser
