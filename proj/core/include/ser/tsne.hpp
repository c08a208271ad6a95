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
#include <span>
#include <string>
#include <vector>

#include "ser/classifier.hpp"

namespace ser {

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t output_dims = 2;
  std::size_t iterations = 1000;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double step_size = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;
  double init_sigma = 1e-4;
  double min_gain = 0.01;
  std::uint64_t seed = 0;
  // perplexity < (n - 1) / 3 is required unless this is cleared.
  bool enforce_perplexity_bound = true;
};

using DenseMatrix = RowMatrix<double>;

/// Row-stochastic Gaussian affinities, each row calibrated by bisection on
/// the log-perplexity (at most 64 steps, tolerance 1e-5). Requires n >= 4.
/// Throws DegenerateRow when a row has zero distance to every other point.
DenseMatrix conditional_affinities(const DenseMatrix& x, double perplexity);

/// (C + C^T) / (2n), normalised to sum 1. Exactly symmetric.
DenseMatrix symmetrize(const DenseMatrix& conditional);

/// KL(P || Q) for the Student-t (one degree of freedom) kernel over `y`.
double kl_divergence(const DenseMatrix& p, const DenseMatrix& y);

/// dKL/dy.
DenseMatrix kl_gradient(const DenseMatrix& p, const DenseMatrix& y);

struct TsneResult {
  DenseMatrix embedding;
  std::vector<double> kl_trace;  // KL against the unexaggerated P after each iteration
};

/// Exact gradient descent with momentum, per-parameter gains and early
/// exaggeration. Exact duplicate rows are jittered by 1e-10 before affinities.
/// Throws NonFiniteKL.
TsneResult run_tsne(const DenseMatrix& x, const TsneConfig& cfg);

/// At most `cap` sorted indices, allocated to strata proportionally (largest
/// remainder) and drawn per stratum with a seeded shuffle.
std::vector<std::size_t> stratified_subsample(std::span<const std::string> strata, std::size_t cap,
                                              std::uint64_t seed);

struct TsnePoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  std::string dataset_id;
  std::string emotion;
};

/// "id,x,y,dataset_id,emotion" rows.
void write_tsne_csv(const std::filesystem::path& path, std::span<const TsnePoint> points);

/// 1200 x 800 scatter; colour per dataset, glyph per emotion.
std::string render_tsne_svg(std::span<const TsnePoint> points);

}  // namespace ser
