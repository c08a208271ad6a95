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

// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "ser/audio.hpp"
#include "ser/embedding_store.hpp"
#include "ser/ingestion.hpp"
#include "ser/log.hpp"
#include "ser/pipeline.hpp"
#include "test_support.hpp"

namespace ser {
namespace {

namespace t = ser::testing;
using L = EmotionLabel;

struct Outcome {
  bool ok = true;
  std::string detail;
};

/// Collects failed checks; the first few are kept for the report line.
class Checks {
 public:
  void expect(bool cond, const std::string& what) {
    if (cond) return;
    ++failures_;
    if (failures_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
  Outcome outcome() const { return {failures_ == 0, notes_}; }

 private:
  std::size_t failures_ = 0;
  std::string notes_;
};

std::string fmt3(double v) {
  std::ostringstream o;
  o.precision(3);
  o << v;
  return o.str();
}

unsigned hw_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

Outcome table_counts() {
  Checks c;
  const std::vector<L> four = {L::neutral, L::angry, L::happy, L::sad};
  const std::vector<std::size_t> four_n = {10044, 7427, 6286, 6157};
  const std::vector<L> five = {L::neutral, L::angry, L::happy, L::sad, L::surprised};
  const std::vector<std::size_t> five_n = {10044, 7427, 6286, 6157, 4056};
  auto all_equal = [](const BalanceResult& r, std::size_t n, std::size_t k) {
    const auto counts = r.data.class_counts();
    if (counts.size() != k) return false;
    for (const auto& [_, v] : counts) {
      if (v != n) return false;
    }
    return true;
  };
  SamplerConfig cfg;
  cfg.seed = 1;
  cfg.threads = hw_threads();
  for (const auto& [labels, counts, under] :
       {std::tuple{four, four_n, std::size_t{6157}}, std::tuple{five, five_n, std::size_t{4056}}}) {
    const auto data = t::random_class_matrix(labels, counts, 3, labels.size());
    const std::string tag = std::to_string(labels.size()) + "-emotion ";
    c.expect(all_equal(undersample(data, 1), under, labels.size()), tag + "undersample");
    c.expect(all_equal(smote(data, cfg), 10044, labels.size()), tag + "smote");
    c.expect(all_equal(adasyn(data, cfg), 10044, labels.size()), tag + "adasyn");
  }
  return c.outcome();
}

Outcome smote_geometry() {
  const std::vector<L> labels = {L::neutral, L::sad};
  const std::vector<std::size_t> counts = {130, 70};
  const auto data = t::gaussian_blobs(labels, counts, 3, 1.0, 17);
  SamplerConfig cfg;
  cfg.seed = 5;
  const auto r = smote(data, cfg);
  const double coverage = t::smote_segment_coverage(data, r, 5, 1e-6);
  return {coverage == 1.0 && r.data.rows() > r.original_rows,
          std::to_string(r.data.rows() - r.original_rows) + " synthetics, coverage " + fmt3(coverage)};
}

Outcome adasyn_adaptivity() {
  Checks c;
  const auto f = t::adasyn_fixture(3);
  const auto got = adasyn_weights(f.data, f.minority, 5);
  const auto want = t::adasyn_ratio_oracle(f.data, f.minority, 5);
  double max_diff = got.size() == want.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) max_diff = std::max(max_diff, std::abs(got[i] - want[i]));
  c.expect(max_diff <= 1e-12, "ratio mismatch " + fmt3(max_diff));
  SamplerConfig cfg;
  cfg.seed = 2;
  const auto r = adasyn(f.data, cfg);
  std::map<std::size_t, std::size_t> per_base;
  for (auto b : r.synthetic_base) ++per_base[b];
  std::size_t min_border = SIZE_MAX, max_interior = 0;
  for (auto b : f.border) min_border = std::min(min_border, per_base[b]);
  for (auto i : f.interior) max_interior = std::max(max_interior, per_base[i]);
  c.expect(min_border > max_interior, "border does not dominate");
  c.note("min border " + std::to_string(min_border) + " vs max interior " + std::to_string(max_interior));
  return c.outcome();
}

Outcome mlp_gradient() {
  Rng rng(5);
  double worst = 0.0;
  std::size_t skipped = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto model = Mlp<double>::initialize({5, 7, 6, 3}, 100 + static_cast<std::uint64_t>(trial));
    RowMatrix<double> x(4, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    std::vector<std::size_t> labels;
    for (int i = 0; i < 4; ++i) labels.push_back(rng.uniform_index(3));
    const auto check = t::mlp_gradient_check(model, x, labels);
    worst = std::max(worst, check.max_relative_error);
    skipped += check.skipped;
  }
  return {worst <= 1e-4, "max relative error " + fmt3(worst) + ", " + std::to_string(skipped) + " kink-straddling params skipped"};
}

Dataset clusters(std::size_t per, std::uint64_t seed) {
  const auto cl = t::gaussian_clusters(per, 16, 3.0, 1.2, seed);
  Dataset d;
  d.x = cl.x.cast<float>();
  for (int l : cl.labels) d.labels.push_back(static_cast<std::size_t>(l));
  return d;
}

Outcome training_sanity() {
  const auto train_set = clusters(100, 1);
  const auto held_out = clusters(100, 2);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 200;
  cfg.early_stop_patience.reset();
  cfg.seed = 4;
  const auto r = train(MlpModel::initialize({16, 32, 16, 8, 8, 3}, 4), train_set, Dataset{}, cfg);
  auto acc = [&](const Dataset& d) {
    const auto p = predict(r.model, d.x);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < p.size(); ++i) hit += p[i] == d.labels[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(p.size());
  };
  const double a_train = acc(train_set), a_held = acc(held_out);
  return {a_train >= 0.95 && a_held >= 0.90, "train " + fmt3(a_train) + ", held-out " + fmt3(a_held)};
}

std::vector<UtteranceRecord> uniform_dataset(const std::string& ds, std::size_t speakers, std::size_t per_label,
                                             std::span<const L> labels) {
  std::vector<UtteranceRecord> out;
  for (std::size_t s = 0; s < speakers; ++s) {
    for (auto l : labels) {
      for (std::size_t i = 0; i < per_label; ++i) {
        out.push_back(t::make_record(ds, "s" + std::to_string(s), std::string(to_string(l)) + std::to_string(i), l, 3.0));
      }
    }
  }
  return out;
}

Outcome loso_leakage() {
  Checks c;
  const auto taxonomy = t::bundled_taxonomy();
  std::size_t plans = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    t::TempDir dir;
    FixtureSpec spec;
    spec.seed = seed;
    const auto paths = write_synthetic_fixture(dir.path(), taxonomy, spec);
    const auto records = project_manifest(read_manifest(paths.manifest), EmotionSet::four(), taxonomy);
    SplitPolicy policy;
    policy.seed = seed;
    std::set<std::string> datasets;
    for (const auto& r : records) datasets.insert(r.dataset_id);
    c.expect(datasets.size() == 11, "fixture has " + std::to_string(datasets.size()) + " datasets");
    const auto combined = plan_combined(records, policy);
    c.expect(t::loso_leaks(combined, records) == 0, "combined leak at seed " + std::to_string(seed));
    ++plans;
    for (const auto& ds : datasets) {
      const auto plan = plan_separate(records, ds, policy);
      c.expect(t::loso_leaks(plan, records) == 0, ds + " leak at seed " + std::to_string(seed));
      ++plans;
    }
  }
  const std::vector<L> two = {L::angry, L::sad};
  for (std::size_t speakers : {3u, 4u, 5u}) {
    const auto plan = plan_separate(uniform_dataset("X", speakers, 3, two), "X", SplitPolicy{});
    c.expect(plan.folds.size() == speakers - 1, "fold count for " + std::to_string(speakers) + " speakers");
  }
  const std::vector<L> seven = {L::angry, L::happy, L::sad, L::neutral, L::surprised, L::fear, L::disgust};
  const auto tess = plan_separate(uniform_dataset("TESS", 2, 200, seven), "TESS", SplitPolicy{});
  bool tess_ok = tess.mode == FoldMode::UtterancePartition && tess.folds.size() == 5;
  for (const auto& f : tess.folds) tess_ok = tess_ok && f.validation.size() == 280;
  c.expect(tess_ok, "TESS utterance split");
  const std::vector<L> four = {L::angry, L::happy, L::sad, L::neutral};
  const auto emofilm = plan_separate(uniform_dataset("EmoFilm", 4, 20, four), "EmoFilm", SplitPolicy{});
  std::size_t pool = 0;
  for (const auto& f : emofilm.folds) pool += f.validation.size();
  c.expect(pool == 4 * 51 && emofilm.holdout_ids.at("EmoFilm").size() == 4 * 9, "EmoFilm 85% split");
  c.note(std::to_string(plans) + " plans, 0 leaks required");
  return c.outcome();
}

Outcome metric_identities() {
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto r = t::random_fold_result(rng, 300);
    worst = std::max(worst, std::abs(weighted_accuracy(r) - accuracy(r)));
  }
  double worst_pool = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(4);
    std::vector<FoldResult> folds;
    for (std::size_t f = 0; f < k; ++f) folds.push_back(t::random_fold_result(rng, 120));
    worst_pool = std::max(worst_pool, std::abs(aggregate_speaker_out(folds, k) - t::pooled_accuracy(folds)));
  }
  return {worst <= 1e-12 && worst_pool <= 1e-12, "identity gap " + fmt3(worst) + ", pooled gap " + fmt3(worst_pool)};
}

Outcome tsne() {
  Checks c;
  const auto cl = t::gaussian_clusters(10, 10, 10.0, 1.0, 11);
  TsneConfig cfg;
  cfg.perplexity = 5.0;
  cfg.seed = 3;
  const auto r = run_tsne(cl.x, cfg);
  const double sil = t::silhouette(r.embedding, cl.labels);
  c.expect(sil >= 0.5, "silhouette " + fmt3(sil));
  c.expect(r.kl_trace.size() == 1000 && r.kl_trace[999] < r.kl_trace[249], "KL did not descend");
  double worst = 0.0;
  Rng rng(1);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    DenseMatrix x(6, 4), y(6, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
    worst = std::max(worst, t::tsne_gradient_check(symmetrize(conditional_affinities(x, 1.5)), y).max_relative_error);
  }
  c.expect(worst <= 1e-4, "gradient error " + fmt3(worst));
  c.note("silhouette " + fmt3(sil) + ", KL " + fmt3(r.kl_trace[249]) + " -> " + fmt3(r.kl_trace.back()) +
         ", gradient error " + fmt3(worst));
  return c.outcome();
}

Outcome store_round_trip() {
  Checks c;
  Rng rng(7);
  t::TempDir dir;
  for (int trial = 0; trial < 100; ++trial) {
    const auto dim = static_cast<std::uint32_t>(1 + rng.uniform_index(512));
    const auto count = static_cast<std::size_t>(rng.uniform_index(1001));
    EmbeddingStore s(dim);
    std::vector<float> v(dim);
    for (std::size_t i = 0; i < count; ++i) {
      for (auto& x : v) {
        std::uint32_t bits;
        do {
          bits = static_cast<std::uint32_t>(rng.next_u64());
        } while (!std::isfinite(std::bit_cast<float>(bits)));
        x = std::bit_cast<float>(bits);
      }
      s.add("clip/" + std::to_string(i), v);
    }
    const auto path = dir / "s.seremb";
    write_store(s, path);
    const auto back = read_store(path);
    c.expect(back.dim() == dim && back.ids() == s.ids() &&
                 std::memcmp(back.values().data(), s.values().data(), s.values().size() * sizeof(float)) == 0,
             "trial " + std::to_string(trial) + " differs");
  }
  EmbeddingStore s(2);
  const float v[] = {1.0f, 2.0f};
  s.add("a", v);
  auto bytes = serialize_store(s);
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 1);
  c.expect(t::kind_of([&] { deserialize_store(cut); }) == ErrorKind::TruncatedFile, "truncation not detected");
  bytes[0] = 'X';
  c.expect(t::kind_of([&] { deserialize_store(bytes); }) == ErrorKind::BadMagic, "bad magic not detected");
  return c.outcome();
}

Outcome resampler() {
  auto sine = [](double f, double rate, std::size_t n) {
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(0.5 * std::sin(2 * std::numbers::pi * f * i / rate));
    return out;
  };
  const auto out = Resampler(48000, 16000).process(sine(1000.0, 48000, 48000));
  const auto want = sine(1000.0, 16000, 16000);
  double err = out.size() == want.size() ? 0.0 : INFINITY;
  for (std::size_t i = 160; i + 160 < std::min(out.size(), want.size()); ++i) {
    err = std::max(err, std::abs(static_cast<double>(out[i]) - want[i]));
  }
  const auto same = sine(1234.0, 16000, 4000);
  const bool identity = Resampler(16000, 16000).process(same) == same;
  return {err < 1e-3 && identity, "max error " + fmt3(err) + (identity ? ", 16 kHz identity" : ", 16 kHz altered")};
}

Outcome end_to_end() {
  t::TempDir dir;
  const auto paths = write_synthetic_fixture(dir / "corpus", t::bundled_taxonomy(), FixtureSpec{});
  auto run = [&](const std::string& out) {
    ExperimentConfig cfg;
    cfg.manifests = {paths.manifest};
    cfg.stores = {paths.store};
    cfg.mappings_dir = t::data_dir() / "mappings";
    cfg.output_dir = dir / out;
    cfg.sampling = SamplingMethod::Smote;
    cfg.k_neighbors = 3;
    cfg.hidden = std::vector<std::size_t>{32, 16};
    cfg.train.epochs = 5;
    cfg.train.learning_rate = 1e-3;
    cfg.jobs = 2;
    return run_experiment(cfg).directory;
  };
  const auto a = run("a");
  const auto b = run("b");
  const auto ledger = t::read_file(a / "ledger.jsonl");
  const bool same = !ledger.empty() && ledger == t::read_file(b / "ledger.jsonl") &&
                    t::read_file(a / "plan.json") == t::read_file(b / "plan.json");
  return {same, std::to_string(std::count(ledger.begin(), ledger.end(), '\n')) + " ledger records"};
}

struct Criterion {
  const char* name;
  double budget_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace ser

int main() {
  using namespace ser;
  log::set_level(spdlog::level::err);
  const std::vector<Criterion> criteria = {
      {"class-count-contracts", 10.0, table_counts},
      {"smote-geometry", 5.0, smote_geometry},
      {"adasyn-adaptivity", 0.0, adasyn_adaptivity},
      {"mlp-gradient-check", 10.0, mlp_gradient},
      {"training-sanity", 60.0, training_sanity},
      {"loso-leakage", 5.0, loso_leakage},
      {"metric-identities", 0.0, metric_identities},
      {"tsne", 30.0, tsne},
      {"embedding-store-round-trip", 0.0, store_round_trip},
      {"resampler", 0.0, resampler},
      {"end-to-end-determinism", 0.0, end_to_end},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.ok = false;
      o.detail += "; over " + fmt3(c.budget_s) + " s budget";
    }
    std::cout << (o.ok ? "PASS " : "FAIL ") << c.name << " [" << fmt3(secs) << " s] " << o.detail << std::endl;
    failed += o.ok ? 0 : 1;
  }
  std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " FAILED") << std::endl;
  return failed == 0 ? 0 : 1;
}
