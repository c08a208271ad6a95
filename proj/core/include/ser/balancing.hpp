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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ser/taxonomy.hpp"

namespace ser {

/// Row-major n x dim sample matrix with one label and id per row.
struct LabeledMatrix {
  std::size_t dim = 0;
  std::vector<double> x;
  std::vector<EmotionLabel> y;
  std::vector<std::string> ids;

  std::size_t rows() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
  void append(std::span<const double> values, EmotionLabel label, std::string id);

  std::map<EmotionLabel, std::size_t> class_counts() const;
};

enum class SamplingMethod { None, Undersample, Smote, Adasyn };

std::string_view to_string(SamplingMethod method);
std::optional<SamplingMethod> parse_sampling_method(std::string_view name);

struct SamplerConfig {
  SamplingMethod method = SamplingMethod::None;
  std::size_t k_neighbors = 5;
  double beta = 1.0;  // ADASYN balance degree, (0, 1]
  std::uint64_t seed = 0;
  unsigned threads = 1;  // neighbour search only; results do not depend on it
};

/// Balanced output plus, for every synthetic row, the row index of the
/// original sample it was interpolated from.
struct BalanceResult {
  LabeledMatrix data;
  std::size_t original_rows = 0;     // originals come first, in input order
  std::vector<std::size_t> synthetic_base;  // aligned with rows >= original_rows
};

/// Every class reduced to the smallest class count by seeded sampling without
/// replacement. Surviving rows keep their input order. Throws EmptyClass when
/// the data is empty or a class in `expected_classes` has no rows.
BalanceResult undersample(const LabeledMatrix& data, std::uint64_t seed,
                          std::span<const EmotionLabel> expected_classes = {});

/// Every class raised to the majority count by interpolating towards one of
/// the k nearest same-class neighbours. Throws TooFewSamples when a class that
/// needs synthesis has k or fewer rows.
BalanceResult smote(const LabeledMatrix& data, const SamplerConfig& cfg);

/// Density-adaptive variant: minority rows with more other-class neighbours
/// receive proportionally more synthetics; the final count is trimmed or
/// topped up to exactly the majority count.
BalanceResult adasyn(const LabeledMatrix& data, const SamplerConfig& cfg);

BalanceResult balance(const LabeledMatrix& data, const SamplerConfig& cfg);

/// Normalised ADASYN difficulty weights for the rows of class `label`, in row
/// order: the fraction of other-class rows among each row's k nearest
/// neighbours in the full data, divided by the class total (uniform when the
/// total is zero).
std::vector<double> adasyn_weights(const LabeledMatrix& data, EmotionLabel label, std::size_t k,
                                   unsigned threads = 1);

/// Indices of the k nearest rows to row `query` among `candidates` (excluding
/// the query itself), by Euclidean distance with ties broken by lower index.
std::vector<std::size_t> nearest_neighbors(const LabeledMatrix& data, std::size_t query,
                                           std::span<const std::size_t> candidates, std::size_t k);

}  // namespace ser
