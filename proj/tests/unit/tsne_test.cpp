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

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ser/rng.hpp"
#include "ser/tsne.hpp"
#include "test_support.hpp"

namespace ser {
namespace {

DenseMatrix random_points(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  DenseMatrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

double row_entropy_bits(const DenseMatrix& c, Eigen::Index i) {
  double h = 0.0;
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    if (c(i, j) > 0.0) h -= c(i, j) * std::log2(c(i, j));
  }
  return h;
}

TEST(Tsne, SimplexRowsAreUniform) {
  const DenseMatrix x = DenseMatrix::Identity(4, 4);  // pairwise distance sqrt(2)
  for (double perplexity : {1.0, 2.0, 2.9}) {
    const auto c = conditional_affinities(x, perplexity);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) EXPECT_NEAR(c(i, j), i == j ? 0.0 : 1.0 / 3.0, 1e-12);
    }
  }
}

TEST(Tsne, RowsHitTheTargetPerplexity) {
  const auto x = random_points(60, 8, 3);
  for (double perplexity : {3.0, 10.0, 19.0}) {
    const auto c = conditional_affinities(x, perplexity);
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      EXPECT_NEAR(std::exp2(row_entropy_bits(c, i)), perplexity, 1e-3) << "row " << i;
      EXPECT_NEAR(c.row(i).sum(), 1.0, 1e-9);
      EXPECT_EQ(c(i, i), 0.0);
    }
  }
}

TEST(Tsne, DegenerateInputs) {
  const DenseMatrix same = DenseMatrix::Ones(5, 3);
  EXPECT_EQ(testing::kind_of([&] { conditional_affinities(same, 2.0); }), ErrorKind::DegenerateRow);
  auto dup = random_points(6, 3, 1);
  dup.row(1) = dup.row(0);
  EXPECT_NO_THROW(conditional_affinities(dup, 2.0));
  EXPECT_EQ(testing::kind_of([&] { conditional_affinities(random_points(3, 2, 1), 1.0); }), ErrorKind::InvalidArgument);
}

TEST(Tsne, SymmetrizeExamples) {
  DenseMatrix c2(2, 2);
  c2 << 0, 1, 1, 0;
  const auto p2 = symmetrize(c2);
  EXPECT_DOUBLE_EQ(p2(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(p2(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(p2(0, 0), 0.0);

  const auto c = conditional_affinities(random_points(20, 4, 9), 5.0);
  const auto p = symmetrize(c);
  EXPECT_NEAR(p.sum(), 1.0, 1e-9);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    EXPECT_EQ(p(i, i), 0.0);
    for (Eigen::Index j = 0; j < p.cols(); ++j) EXPECT_EQ(p(i, j), p(j, i));
  }
  // Symmetric input: P = C / n.
  const DenseMatrix sym = (DenseMatrix::Ones(4, 4) - DenseMatrix::Identity(4, 4)) / 3.0;
  const auto ps = symmetrize(sym);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(ps(i, j), sym(i, j) / 4.0, 1e-15);
  }
}

TEST(Tsne, KlMatchesDirectFormula) {
  const auto p = symmetrize(conditional_affinities(random_points(12, 5, 2), 3.0));
  const auto y = random_points(12, 2, 7);
  EXPECT_NEAR(kl_divergence(p, y), testing::kl_oracle(p, y), 1e-12);
  EXPECT_GE(kl_divergence(p, y), 0.0);
}

TEST(Tsne, GradientMatchesCentralDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = symmetrize(conditional_affinities(random_points(6, 4, seed), 1.5));
    const auto y = random_points(6, 2, 100 + seed);
    const auto check = testing::tsne_gradient_check(p, y);
    EXPECT_LE(check.max_relative_error, 1e-4) << "seed " << seed;
    EXPECT_EQ(check.checked, 12u);
  }
}

TEST(Tsne, KlIsTranslationInvariant) {
  const auto p = symmetrize(conditional_affinities(random_points(15, 3, 4), 4.0));
  const auto y = random_points(15, 2, 5);
  DenseMatrix shifted = y;
  shifted.col(0).array() += 123.5;
  shifted.col(1).array() -= 7.25;
  EXPECT_NEAR(kl_divergence(p, shifted), kl_divergence(p, y), 1e-9);
}

class TsneClusters : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    clusters_ = testing::gaussian_clusters(10, 10, 10.0, 1.0, 11);
    TsneConfig cfg;
    cfg.perplexity = 5.0;
    cfg.seed = 3;
    result_ = run_tsne(clusters_.x, cfg);
  }
  static testing::Clusters clusters_;
  static TsneResult result_;
};

testing::Clusters TsneClusters::clusters_;
TsneResult TsneClusters::result_;

TEST_F(TsneClusters, ClustersStaySeparated) {
  EXPECT_GE(testing::silhouette(result_.embedding, clusters_.labels), 0.5);
}

TEST_F(TsneClusters, KlDescendsAfterExaggeration) {
  ASSERT_EQ(result_.kl_trace.size(), 1000u);
  EXPECT_LT(result_.kl_trace[999], result_.kl_trace[249]);
  for (double kl : result_.kl_trace) {
    EXPECT_TRUE(std::isfinite(kl));
    EXPECT_GE(kl, 0.0);
  }
}

TEST_F(TsneClusters, WindowMinimaNeverRise) {
  double previous = INFINITY;
  for (std::size_t start = 250; start + 100 <= result_.kl_trace.size(); start += 100) {
    const double m = *std::min_element(result_.kl_trace.begin() + static_cast<std::ptrdiff_t>(start),
                                       result_.kl_trace.begin() + static_cast<std::ptrdiff_t>(start + 100));
    EXPECT_LE(m, previous) << "window at " << start;
    previous = m;
  }
}

TEST_F(TsneClusters, EmbeddingIsCentredAndSeeded) {
  EXPECT_NEAR(result_.embedding.col(0).mean(), 0.0, 1e-9);
  TsneConfig cfg;
  cfg.perplexity = 5.0;
  cfg.seed = 3;
  cfg.iterations = 50;
  const auto a = run_tsne(clusters_.x, cfg);
  const auto b = run_tsne(clusters_.x, cfg);
  EXPECT_EQ(a.embedding, b.embedding);
  EXPECT_EQ(a.kl_trace, b.kl_trace);
}

TEST(Tsne, SimplexEmbeddingIsNearlySymmetric) {
  // Four equidistant points cannot be equidistant in the plane; the best
  // layout is a square, whose diagonal is sqrt(2) times its side.
  TsneConfig cfg;
  cfg.perplexity = 2.0;
  cfg.enforce_perplexity_bound = false;
  const auto r = run_tsne(DenseMatrix::Identity(4, 4), cfg);
  double lo = INFINITY, hi = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      const double d = (r.embedding.row(i) - r.embedding.row(j)).norm();
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  EXPECT_LE(hi / lo, std::sqrt(2.0) * 1.1);
}

TEST(Tsne, PerplexityBoundIsEnforced) {
  TsneConfig cfg;
  cfg.perplexity = 30.0;
  EXPECT_EQ(testing::kind_of([&] { run_tsne(random_points(20, 3, 1), cfg); }), ErrorKind::InvalidArgument);
}

TEST(Tsne, DuplicatesAreJittered) {
  auto x = random_points(12, 3, 2);
  x.row(5) = x.row(4);
  TsneConfig cfg;
  cfg.perplexity = 3.0;
  cfg.iterations = 20;
  const auto r = run_tsne(x, cfg);
  EXPECT_TRUE(r.embedding.allFinite());
}

TEST(Tsne, StratifiedSubsampleIsProportional) {
  std::vector<std::string> strata;
  for (int i = 0; i < 600; ++i) strata.push_back(i % 3 == 0 ? "a" : "b");  // 200 a, 400 b
  const auto pick = stratified_subsample(strata, 90, 4);
  ASSERT_EQ(pick.size(), 90u);
  EXPECT_TRUE(std::is_sorted(pick.begin(), pick.end()));
  EXPECT_EQ(std::count_if(pick.begin(), pick.end(), [&](std::size_t i) { return strata[i] == "a"; }), 30);
  EXPECT_EQ(stratified_subsample(strata, 90, 4), pick);
  EXPECT_EQ(stratified_subsample(strata, 1000, 4).size(), 600u);
}

TEST(Tsne, CsvAndSvgOutputs) {
  const std::vector<TsnePoint> pts = {{"RAVDESS/a", 1.0, -2.0, "RAVDESS", "angry"},
                                      {"TESS/b", 0.5, 0.25, "TESS", "sad"}};
  testing::TempDir dir;
  write_tsne_csv(dir / "t.csv", pts);
  const auto csv = testing::read_file(dir / "t.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,x,y,dataset_id,emotion");
  EXPECT_NE(csv.find("RAVDESS/a,1,-2,RAVDESS,angry"), std::string::npos);
  const auto svg = render_tsne_svg(pts);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("width=\"1200\""), std::string::npos);
  EXPECT_NE(svg.find("TESS"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

}  // namespace
}  // namespace ser
