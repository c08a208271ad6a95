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

#include "ser/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "ser/digest.hpp"
#include "ser/error.hpp"
#include "ser/ingestion.hpp"
#include "ser/log.hpp"
#include "ser/rng.hpp"

namespace ser {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kCombinedCell = "combined";

[[noreturn]] void config_error(const std::string& msg) { fail(ErrorKind::ConfigError, msg); }

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) config_error(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) config_error("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_as(const json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    config_error("bad value for '" + key + "' in " + where);
  }
}

fs::path resolve(const fs::path& p, const fs::path& base) { return p.is_absolute() ? p : base / p; }

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
}

RowMatrix<float> rows_as_float(const LabeledMatrix& m) {
  RowMatrix<float> x(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.dim));
  for (std::size_t i = 0; i < m.x.size(); ++i) x.data()[i] = static_cast<float>(m.x[i]);
  return x;
}

struct CellOutput {
  std::vector<FoldResult> results;  // ledger order
  std::map<std::string, std::size_t> n_classes;
  std::map<std::string, double> speaker_out;  // aggregated accuracy per dataset
};

CellOutput run_cell(const SplitPlan& plan, const ExperimentConfig& cfg, const ExperimentData& data,
                    const fs::path& dir) {
  const CellSpec cell = cell_spec(cfg, data, plan);
  CellOutput out;
  out.n_classes = cell.n_classes;

  std::map<std::string, std::vector<FoldResult>> test_results;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const TrainResult trained = train_fold(cfg, data, plan, cell, f);
    const std::string stem = "fold" + std::to_string(f);
    fs::create_directories(dir / "checkpoints" / cell.name);
    write_model(trained.model, dir / "checkpoints" / cell.name / (stem + ".sermlp"));
    write_text(dir / "curves" / cell.name / (stem + ".csv"), loss_curve_csv(trained.curve));

    for (auto& r : evaluate_fold(trained.model, data, plan, cell, f)) {
      if (r.scope == ResultScope::SpeakerOutTest) test_results[r.dataset_id].push_back(r);
      out.results.push_back(std::move(r));
    }
  }
  for (const auto& [ds, results] : test_results) {
    out.speaker_out[ds] = aggregate_speaker_out(results, plan.folds.size());
  }
  return out;
}

std::map<std::string, std::string> plan_meta(const ExperimentConfig& cfg, const std::string& hash) {
  return {{"config_hash", hash}, {"experiment_id", cfg.resolved_id()}, {"seed", std::to_string(cfg.seed)}};
}

void write_status(const fs::path& dir, const ExperimentConfig& cfg, const std::string& hash, const std::string& status) {
  ordered_json j;
  j["experiment_id"] = cfg.resolved_id();
  j["config_hash"] = hash;
  j["seed"] = cfg.seed;
  j["status"] = status;
  write_text(dir / "run.json", j.dump(1) + "\n");
}

}  // namespace

std::string ExperimentConfig::resolved_id() const {
  if (!experiment_id.empty()) return experiment_id;
  return std::string(to_string(emotion_set)) + "-" + std::string(to_string(regime)) + "-" +
         std::string(to_string(sampling));
}

ExperimentConfig parse_experiment_config(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    config_error(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"experiment_id", "emotion_set", "regime", "datasets", "sampling", "seed", "paths", "train", "split",
                 "sampler", "duration_filter", "jobs"},
             "config");
  ExperimentConfig cfg;
  if (j.contains("experiment_id")) cfg.experiment_id = get_as<std::string>(j, "experiment_id", "config");
  if (j.contains("emotion_set")) {
    auto k = parse_emotion_set_kind(get_as<std::string>(j, "emotion_set", "config"));
    if (!k) config_error("emotion_set must be four, five or all");
    cfg.emotion_set = *k;
  }
  if (j.contains("regime")) {
    const auto r = get_as<std::string>(j, "regime", "config");
    if (r == "combined") cfg.regime = SplitRegime::Combined;
    else if (r == "separate") cfg.regime = SplitRegime::Separate;
    else config_error("regime must be combined or separate");
  }
  if (j.contains("datasets")) cfg.datasets = get_as<std::vector<std::string>>(j, "datasets", "config");
  if (j.contains("sampling")) {
    auto m = parse_sampling_method(get_as<std::string>(j, "sampling", "config"));
    if (!m) config_error("sampling must be none, undersample, smote or adasyn");
    cfg.sampling = *m;
  }
  if (j.contains("seed")) cfg.seed = get_as<std::uint64_t>(j, "seed", "config");
  if (j.contains("jobs")) cfg.jobs = std::max(1u, get_as<unsigned>(j, "jobs", "config"));

  cfg.mappings_dir = default_data_dir() / "mappings";
  if (j.contains("paths")) {
    const json& p = j["paths"];
    check_keys(p, {"manifests", "stores", "mappings", "output_dir"}, "paths");
    if (p.contains("manifests")) {
      for (const auto& s : get_as<std::vector<std::string>>(p, "manifests", "paths")) cfg.manifests.push_back(resolve(s, base_dir));
    }
    if (p.contains("stores")) {
      for (const auto& s : get_as<std::vector<std::string>>(p, "stores", "paths")) cfg.stores.push_back(resolve(s, base_dir));
    }
    if (p.contains("mappings")) cfg.mappings_dir = resolve(get_as<std::string>(p, "mappings", "paths"), base_dir);
    if (p.contains("output_dir")) cfg.output_dir = resolve(get_as<std::string>(p, "output_dir", "paths"), base_dir);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t, {"learning_rate", "epochs", "batch_size", "optimizer", "early_stop_patience", "width_multiplier",
                   "hidden"},
               "train");
    if (t.contains("learning_rate")) cfg.train.learning_rate = get_as<double>(t, "learning_rate", "train");
    if (t.contains("epochs")) cfg.train.epochs = get_as<std::size_t>(t, "epochs", "train");
    if (t.contains("batch_size")) cfg.train.batch_size = get_as<std::size_t>(t, "batch_size", "train");
    if (t.contains("optimizer")) {
      const auto o = get_as<std::string>(t, "optimizer", "train");
      if (o == "adam") cfg.train.optimizer = OptimizerKind::Adam;
      else if (o == "sgd") cfg.train.optimizer = OptimizerKind::Sgd;
      else config_error("optimizer must be adam or sgd");
    }
    if (t.contains("early_stop_patience")) {
      if (t["early_stop_patience"].is_null()) cfg.train.early_stop_patience.reset();
      else cfg.train.early_stop_patience = get_as<std::size_t>(t, "early_stop_patience", "train");
    }
    if (t.contains("width_multiplier")) cfg.width_multiplier = get_as<double>(t, "width_multiplier", "train");
    if (t.contains("hidden")) cfg.hidden = get_as<std::vector<std::size_t>>(t, "hidden", "train");
  }
  if (j.contains("split")) {
    const json& s = j["split"];
    check_keys(s, {"balance_ratio_threshold", "n_folds", "train_fraction"}, "split");
    if (s.contains("balance_ratio_threshold")) cfg.split.balance_ratio_threshold = get_as<double>(s, "balance_ratio_threshold", "split");
    if (s.contains("n_folds")) cfg.split.n_folds = get_as<std::size_t>(s, "n_folds", "split");
    if (s.contains("train_fraction")) cfg.split.train_fraction = get_as<std::map<std::string, double>>(s, "train_fraction", "split");
  }
  if (j.contains("sampler")) {
    const json& s = j["sampler"];
    check_keys(s, {"k_neighbors", "beta"}, "sampler");
    if (s.contains("k_neighbors")) cfg.k_neighbors = get_as<std::size_t>(s, "k_neighbors", "sampler");
    if (s.contains("beta")) cfg.adasyn_beta = get_as<double>(s, "beta", "sampler");
  }
  if (j.contains("duration_filter")) {
    const json& d = j["duration_filter"];
    check_keys(d, {"min_s", "max_s", "force"}, "duration_filter");
    if (d.contains("min_s")) cfg.min_duration_s = get_as<double>(d, "min_s", "duration_filter");
    if (d.contains("max_s")) cfg.max_duration_s = get_as<double>(d, "max_s", "duration_filter");
    if (d.contains("force")) cfg.force_duration_filter = get_as<bool>(d, "force", "duration_filter");
  }

  if (!(cfg.train.learning_rate > 0.0)) config_error("learning_rate must be positive");
  if (cfg.train.epochs == 0) config_error("epochs must be positive");
  if (cfg.train.batch_size == 0) config_error("batch_size must be positive");
  if (cfg.split.n_folds < 2) config_error("n_folds must be at least 2");
  if (cfg.k_neighbors == 0) config_error("k_neighbors must be positive");
  if (!(cfg.adasyn_beta > 0.0 && cfg.adasyn_beta <= 1.0)) config_error("sampler beta must be in (0, 1]");
  if (!(cfg.width_multiplier > 0.0)) config_error("width_multiplier must be positive");
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), path.parent_path());
}

std::string canonical_config(const ExperimentConfig& cfg) {
  ordered_json j;
  j["experiment_id"] = cfg.resolved_id();
  j["emotion_set"] = to_string(cfg.emotion_set);
  j["regime"] = to_string(cfg.regime);
  j["datasets"] = cfg.datasets;
  j["sampling"] = to_string(cfg.sampling);
  j["seed"] = cfg.seed;
  ordered_json t;
  t["learning_rate"] = cfg.train.learning_rate;
  t["epochs"] = cfg.train.epochs;
  t["batch_size"] = cfg.train.batch_size;
  t["optimizer"] = cfg.train.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
  t["adam"] = {cfg.train.adam_beta1, cfg.train.adam_beta2, cfg.train.adam_epsilon};
  t["early_stop_patience"] = cfg.train.early_stop_patience ? ordered_json(*cfg.train.early_stop_patience) : ordered_json();
  t["width_multiplier"] = cfg.width_multiplier;
  t["hidden"] = cfg.hidden ? ordered_json(*cfg.hidden) : ordered_json();
  j["train"] = t;
  j["split"] = {{"balance_ratio_threshold", cfg.split.balance_ratio_threshold},
                {"n_folds", cfg.split.n_folds},
                {"train_fraction", cfg.split.train_fraction}};
  j["sampler"] = {{"k_neighbors", cfg.k_neighbors}, {"beta", cfg.adasyn_beta}};
  j["duration_filter"] = {{"min_s", cfg.min_duration_s}, {"max_s", cfg.max_duration_s}, {"force", cfg.force_duration_filter}};
  return j.dump();
}

std::string experiment_hash(const ExperimentConfig& cfg) {
  std::string text = canonical_config(cfg);
  for (const auto& p : cfg.manifests) text += "\nmanifest " + sha256_file(p);
  for (const auto& p : cfg.stores) text += "\nstore " + sha256_file(p);
  if (fs::is_directory(cfg.mappings_dir)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(cfg.mappings_dir)) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) text += "\nmapping " + f.filename().string() + " " + sha256_file(f);
  }
  return config_hash(text);
}

void validate_inputs(const ExperimentConfig& cfg) {
  if (cfg.manifests.empty()) fail(ErrorKind::ConfigError, "no manifests configured");
  if (cfg.stores.empty()) fail(ErrorKind::ConfigError, "no embedding stores configured");
  for (const auto& p : cfg.manifests) {
    if (!fs::is_regular_file(p)) fail(ErrorKind::IoError, "manifest not found: " + p.string());
  }
  for (const auto& p : cfg.stores) {
    if (!fs::is_regular_file(p)) fail(ErrorKind::IoError, "embedding store not found: " + p.string());
  }
  if (!fs::is_directory(cfg.mappings_dir)) fail(ErrorKind::IoError, "mapping directory not found: " + cfg.mappings_dir.string());
}

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
  validate_inputs(cfg);
  auto logger = log::get("load");
  std::vector<UtteranceRecord> raw;
  std::set<std::string> seen;
  for (const auto& p : cfg.manifests) {
    for (auto& r : read_manifest(p)) {
      if (!seen.insert(r.id).second) fail(ErrorKind::DuplicateId, "utterance id repeated across manifests: " + r.id);
      raw.push_back(std::move(r));
    }
  }
  const Taxonomy taxonomy = Taxonomy::load_directory(cfg.mappings_dir);
  std::vector<UtteranceRecord> projected = project_manifest(raw, EmotionSet::of(cfg.emotion_set), taxonomy);
  if (cfg.regime == SplitRegime::Combined || cfg.force_duration_filter) {
    const std::size_t before = projected.size();
    projected = duration_filter(projected, cfg.min_duration_s, cfg.max_duration_s);
    logger->info("duration filter kept {} of {} clips", projected.size(), before);
  }

  std::vector<EmbeddingStore> stores;
  for (const auto& p : cfg.stores) stores.push_back(read_store(p));
  ExperimentData data;
  data.store = stores.size() == 1 ? std::move(stores.front()) : merge_stores(stores);
  const JoinResult joined = join(projected, data.store);
  if (joined.manifest_only > 0) logger->warn("{} manifest records have no embedding and are dropped", joined.manifest_only);
  for (const auto& [rec, vec] : joined.pairs) data.records.push_back(rec);
  if (data.records.empty()) fail(ErrorKind::EmptyTrainingSet, "no records left after projection, filtering and join");
  logger->info("{} records across the selected emotion set", data.records.size());
  return data;
}

std::vector<EmotionLabel> present_labels(std::span<const UtteranceRecord> records, const EmotionSet& set) {
  std::set<EmotionLabel> seen;
  for (const auto& r : records) {
    if (r.unified_label && set.contains(*r.unified_label)) seen.insert(*r.unified_label);
  }
  return {seen.begin(), seen.end()};
}

LabeledMatrix gather(std::span<const std::string> ids, const ExperimentData& data) {
  std::unordered_map<std::string_view, const UtteranceRecord*> by_id;
  by_id.reserve(data.records.size());
  for (const auto& r : data.records) by_id.emplace(r.id, &r);
  LabeledMatrix m;
  m.dim = data.store.dim();
  std::vector<double> row(m.dim);
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    const std::ptrdiff_t idx = data.store.find(id);
    if (it == by_id.end() || idx < 0 || !it->second->unified_label) {
      fail(ErrorKind::UnknownLabel, "split plan references unknown or unlabeled utterance " + id);
    }
    const auto v = data.store.vector(static_cast<std::size_t>(idx));
    std::copy(v.begin(), v.end(), row.begin());
    m.append(row, *it->second->unified_label, id);
  }
  return m;
}

Dataset to_dataset(const LabeledMatrix& m, std::span<const EmotionLabel> classes) {
  Dataset d;
  d.x = rows_as_float(m);
  d.labels.reserve(m.rows());
  for (auto label : m.y) {
    auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end()) fail(ErrorKind::InvalidLabel, std::string("label outside the class list: ") + std::string(to_string(label)));
    d.labels.push_back(static_cast<std::size_t>(it - classes.begin()));
  }
  return d;
}

std::string cell_name(const SplitPlan& plan) {
  return plan.regime == SplitRegime::Combined ? std::string(kCombinedCell) : plan.dataset_id;
}

CellSpec cell_spec(const ExperimentConfig& cfg, const ExperimentData& data, const SplitPlan& plan) {
  CellSpec cell;
  cell.name = cell_name(plan);
  std::set<std::string> datasets;
  for (const auto& r : data.records) {
    if (plan.regime == SplitRegime::Combined || r.dataset_id == plan.dataset_id) datasets.insert(r.dataset_id);
  }
  if (datasets.empty()) fail(ErrorKind::UnknownDataset, cell.name + " has no records in the selected emotion set");
  cell.datasets.assign(datasets.begin(), datasets.end());

  std::vector<UtteranceRecord> cell_records;
  for (const auto& r : data.records) {
    if (datasets.count(r.dataset_id)) cell_records.push_back(r);
  }
  cell.classes = present_labels(cell_records, EmotionSet::of(cfg.emotion_set));
  if (cell.classes.size() < 2) fail(ErrorKind::EmptyTrainingSet, cell.name + ": fewer than two emotion classes present");
  for (const auto& ds : cell.datasets) {
    std::set<EmotionLabel> labels;
    for (const auto& r : cell_records) {
      if (r.dataset_id == ds) labels.insert(*r.unified_label);
    }
    cell.n_classes[ds] = labels.size();
  }

  if (cfg.hidden) {
    cell.layer_dims.push_back(data.store.dim());
    cell.layer_dims.insert(cell.layer_dims.end(), cfg.hidden->begin(), cfg.hidden->end());
    cell.layer_dims.push_back(cell.classes.size());
  } else {
    cell.layer_dims = head_layer_dims(data.store.dim(), cell.classes.size(), cfg.width_multiplier);
  }
  return cell;
}

TrainResult train_fold(const ExperimentConfig& cfg, const ExperimentData& data, const SplitPlan& plan,
                       const CellSpec& cell, std::size_t fold) {
  if (fold >= plan.folds.size()) {
    fail(ErrorKind::InvalidArgument, "fold " + std::to_string(fold) + " out of range for " + cell.name);
  }
  const Fold& f = plan.folds[fold];
  const std::string stream = cell.name + "/" + std::to_string(fold);
  const LabeledMatrix train_rows = gather(f.train, data);
  const LabeledMatrix val_rows = gather(f.validation, data);

  SamplerConfig sampler{cfg.sampling, cfg.k_neighbors, cfg.adasyn_beta, derive_seed(cfg.seed, "balance/" + stream), 1};
  const BalanceResult balanced = balance(train_rows, sampler);
  log::get("train")->info("cell {} fold {}: {} training rows ({} after {}), {} validation rows", cell.name, fold,
                          train_rows.rows(), balanced.data.rows(), to_string(cfg.sampling), val_rows.rows());

  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "train/" + stream);
  MlpModel model = MlpModel::initialize(cell.layer_dims, derive_seed(cfg.seed, "init/" + stream));
  return train(std::move(model), to_dataset(balanced.data, cell.classes), to_dataset(val_rows, cell.classes), tc);
}

std::vector<FoldResult> evaluate_fold(const MlpModel& model, const ExperimentData& data, const SplitPlan& plan,
                                      const CellSpec& cell, std::size_t fold) {
  if (fold >= plan.folds.size()) {
    fail(ErrorKind::InvalidArgument, "fold " + std::to_string(fold) + " out of range for " + cell.name);
  }
  if (model.input_dim() != data.store.dim() || model.n_classes() != cell.classes.size()) {
    fail(ErrorKind::DimMismatch, "model shape does not fit cell " + cell.name);
  }
  std::unordered_map<std::string_view, std::string_view> dataset_of;
  for (const auto& r : data.records) dataset_of.emplace(r.id, r.dataset_id);

  auto evaluate = [&](std::span<const std::string> ids, const std::string& ds, ResultScope scope) {
    FoldResult r{ds, fold, scope, {}};
    std::vector<std::string> subset;
    for (const auto& id : ids) {
      auto it = dataset_of.find(id);
      if (it != dataset_of.end() && it->second == ds) subset.push_back(id);
    }
    if (subset.empty()) return r;
    const LabeledMatrix m = gather(subset, data);
    const auto pred = predict(model, rows_as_float(m));
    for (std::size_t i = 0; i < m.rows(); ++i) r.predictions.push_back({m.ids[i], cell.classes[pred[i]], m.y[i]});
    return r;
  };

  std::vector<FoldResult> out;
  for (const auto& ds : cell.datasets) {
    FoldResult val = evaluate(plan.folds[fold].validation, ds, ResultScope::Validation);
    if (val.predictions.empty()) {
      log::get("eval")->warn("cell {} fold {}: no validation clips for {}", cell.name, fold, ds);
    } else {
      out.push_back(std::move(val));
    }
    auto tit = plan.test_ids.find(ds);
    if (tit == plan.test_ids.end()) continue;
    FoldResult test = evaluate(tit->second, ds, ResultScope::SpeakerOutTest);
    if (!test.predictions.empty()) out.push_back(std::move(test));
  }
  return out;
}

std::vector<SplitPlan> build_plans(const ExperimentConfig& cfg, const ExperimentData& data, const std::string& hash) {
  SplitPolicy policy = cfg.split;
  policy.seed = cfg.seed;
  std::vector<std::string> present;
  for (const auto& r : data.records) {
    if (std::find(present.begin(), present.end(), r.dataset_id) == present.end()) present.push_back(r.dataset_id);
  }
  std::sort(present.begin(), present.end());

  std::vector<SplitPlan> plans;
  if (cfg.regime == SplitRegime::Combined) {
    plans.push_back(plan_combined(data.records, policy));
  } else {
    for (const auto& ds : cfg.datasets.empty() ? present : cfg.datasets) {
      if (std::find(present.begin(), present.end(), ds) == present.end()) {
        fail(ErrorKind::UnknownDataset, ds + " has no records in the selected emotion set");
      }
      plans.push_back(plan_separate(data.records, ds, policy));
    }
  }
  for (auto& plan : plans) {
    plan.meta = plan_meta(cfg, hash);
    const AuditReport audit = audit_plan(plan, data.records);
    if (!audit.ok()) fail(ErrorKind::Internal, cell_name(plan) + ": generated split plan failed its audit");
  }
  return plans;
}

fs::path plan_path(const fs::path& dir, const SplitPlan& plan) {
  return plan.regime == SplitRegime::Combined ? dir / "plan.json" : dir / "plans" / (plan.dataset_id + ".json");
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  validate_inputs(cfg);
  auto logger = log::get("run");
  ExperimentOutcome outcome;
  outcome.config_hash = experiment_hash(cfg);
  outcome.directory = cfg.output_dir / cfg.resolved_id();
  const fs::path& dir = outcome.directory;
  fs::create_directories(dir);
  write_status(dir, cfg, outcome.config_hash, "incomplete");
  logger->info("experiment {} config_hash {} seed {}", cfg.resolved_id(), outcome.config_hash, cfg.seed);

  const ExperimentData data = load_experiment_data(cfg);
  const std::vector<SplitPlan> jobs = build_plans(cfg, data, outcome.config_hash);
  for (const auto& plan : jobs) {
    fs::create_directories(plan_path(dir, plan).parent_path());
    write_plan(plan, plan_path(dir, plan));
  }

  std::vector<std::optional<CellOutput>> outputs(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        outputs[i] = run_cell(jobs[i], cfg, data, dir);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> threads;
  for (unsigned t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  LedgerContext ctx{cfg.resolved_id(), outcome.config_hash, cfg.seed, cfg.emotion_set, cfg.regime, cfg.sampling, 0};
  std::string ledger_text;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const CellOutput& out = *outputs[i];
    for (const auto& r : out.results) {
      ctx.n_classes = out.n_classes.at(r.dataset_id);
      outcome.ledger.push_back(ledger_line(ctx, r));
      ledger_text += outcome.ledger.back() + "\n";
    }
    for (const auto& [ds, acc] : out.speaker_out) {
      outcome.grid.set(ds, {cfg.emotion_set, cfg.regime, cfg.sampling}, 100.0 * acc);
      outcome.grid.set_class_count(ds, cfg.emotion_set, out.n_classes.at(ds));
    }
  }
  write_text(dir / "ledger.jsonl", ledger_text);
  write_text(dir / "grid.md", "<!-- experiment " + cfg.resolved_id() + " config_hash " + outcome.config_hash + " seed " +
                                   std::to_string(cfg.seed) + " -->\n" + render_grid(outcome.grid, GridFormat::Markdown));
  write_text(dir / "grid.csv", render_grid(outcome.grid, GridFormat::Csv));
  write_status(dir, cfg, outcome.config_hash, "complete");
  logger->info("experiment {} complete: {} ledger records", cfg.resolved_id(), outcome.ledger.size());
  return outcome;
}

ExperimentGrid grid_from_ledger(std::span<const std::string> ledger_lines) {
  struct Pool {
    std::size_t correct = 0;
    std::size_t n = 0;
    std::size_t n_classes = 0;
  };
  std::vector<std::string> order;
  std::map<std::pair<std::string, GridColumn>, Pool> pools;
  for (const auto& line : ledger_lines) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorKind::ParseError, std::string("ledger line: ") + e.what());
    }
    try {
      if (j.at("scope").get<std::string>() != to_string(ResultScope::SpeakerOutTest)) continue;
      const auto ds = j.at("dataset_id").get<std::string>();
      auto set = parse_emotion_set_kind(j.at("emotion_set").get<std::string>());
      auto sampling = parse_sampling_method(j.at("sampling").get<std::string>());
      const auto regime_name = j.at("regime").get<std::string>();
      if (!set || !sampling || (regime_name != "combined" && regime_name != "separate")) {
        fail(ErrorKind::ParseError, "ledger line has unknown set, regime or sampling");
      }
      const SplitRegime regime = regime_name == "combined" ? SplitRegime::Combined : SplitRegime::Separate;
      if (std::find(order.begin(), order.end(), ds) == order.end()) order.push_back(ds);
      Pool& p = pools[{ds, GridColumn{*set, regime, *sampling}}];
      p.correct += j.at("correct").get<std::size_t>();
      p.n += j.at("n").get<std::size_t>();
      p.n_classes = j.value("n_classes", std::size_t{0});
    } catch (const json::exception& e) {
      fail(ErrorKind::ParseError, std::string("ledger line: ") + e.what());
    }
  }
  ExperimentGrid grid;
  for (const auto& ds : order) {
    for (const auto& [key, p] : pools) {
      if (key.first != ds || p.n == 0) continue;
      grid.set(ds, key.second, 100.0 * static_cast<double>(p.correct) / static_cast<double>(p.n));
      if (p.n_classes > 0) grid.set_class_count(ds, key.second.set, p.n_classes);
    }
  }
  return grid;
}

std::size_t fixture_speaker_count(const std::string& dataset_id) {
  static const std::map<std::string, std::size_t> kCounts = {
      {"TESS", 2}, {"SAVEE", 4}, {"JL-Corpus", 4}, {"EmoV-DB", 4}, {"RAVDESS", 8}, {"CREMA-D", 8}, {"IEMOCAP", 10}};
  auto it = kCounts.find(dataset_id);
  return it == kCounts.end() ? 6 : it->second;
}

FixturePaths write_synthetic_fixture(const fs::path& dir, const Taxonomy& taxonomy, const FixtureSpec& spec) {
  if (spec.dim == 0 || spec.clips_per_label == 0) fail(ErrorKind::InvalidArgument, "fixture needs dim and clips_per_label > 0");
  fs::create_directories(dir);
  Rng center_rng = stream_rng(spec.seed, "fixture/centers");
  std::map<EmotionLabel, std::vector<float>> centers;
  for (auto label : all_emotion_labels()) {
    auto& c = centers[label];
    for (std::uint32_t k = 0; k < spec.dim; ++k) c.push_back(static_cast<float>(2.0 * center_rng.normal()));
  }

  std::vector<UtteranceRecord> records;
  EmbeddingStore store(spec.dim);
  for (const auto& ds : taxonomy.datasets()) {
    Rng rng = stream_rng(spec.seed, "fixture/" + ds);
    std::vector<double> offset(spec.dim);
    for (auto& o : offset) o = 0.3 * rng.normal();
    std::vector<std::pair<std::string, EmotionLabel>> natives;
    for (const auto& rule : taxonomy.mapping(ds).rules) {
      // A concrete label for the rule's glob: drop '*', fill '?'.
      std::string native;
      for (char c : rule.native) {
        if (c != '*') native += c == '?' ? 'x' : c;
      }
      if (native.empty() || !glob_match(rule.native, native)) continue;
      if (std::none_of(natives.begin(), natives.end(), [&](const auto& n) { return n.first == native; })) {
        natives.emplace_back(native, rule.unified);
      }
    }
    const std::size_t n_speakers = fixture_speaker_count(ds);
    for (std::size_t s = 0; s < n_speakers; ++s) {
      const std::string speaker = (s + 1 < 10 ? "spk0" : "spk") + std::to_string(s + 1);
      // Speakers differ in how long they talk so balanced and unbalanced datasets both occur.
      const double scale = 1.0 + 0.25 * static_cast<double>(s % 3) * (ds.size() % 2 == 0 ? 1.0 : 0.0);
      for (const auto& [native, unified] : natives) {
        for (std::size_t k = 0; k < spec.clips_per_label; ++k) {
          UtteranceRecord r;
          r.id = ds + "/" + speaker + "/" + native + "_" + std::to_string(k) + ".wav";
          r.dataset_id = ds;
          r.speaker_id = speaker;
          r.native_label = native;
          r.duration_s = rng.uniform_index(20) == 0 ? 1.5 : std::min(12.5, (2.5 + 6.0 * rng.uniform01()) * scale);
          std::vector<float> v(spec.dim);
          for (std::uint32_t d = 0; d < spec.dim; ++d) {
            v[d] = static_cast<float>(centers[unified][d] + offset[d] + spec.cluster_spread * rng.normal());
          }
          store.add(r.id, v);
          records.push_back(std::move(r));
        }
      }
    }
  }
  FixturePaths paths{dir / "manifest.jsonl", dir / "embeddings.seremb"};
  write_manifest(paths.manifest, records);
  write_store(store, paths.store);
  return paths;
}

fs::path default_data_dir() {
  if (const char* env = std::getenv("SER_DATA_DIR"); env != nullptr && *env != '\0') return env;
  const fs::path built = SER_DEFAULT_DATA_DIR;
  if (fs::is_directory(built)) return built;
  // Installed layout: <prefix>/bin/ser beside <prefix>/share/serbench.
  std::error_code ec;
  const fs::path exe = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    const fs::path installed = exe.parent_path().parent_path() / "share" / "serbench";
    if (fs::is_directory(installed)) return installed;
  }
  return built;
}

}  // namespace ser
