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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ser/embedding_store.hpp"
#include "ser/error.hpp"
#include "ser/ingestion.hpp"
#include "ser/log.hpp"
#include "ser/pipeline.hpp"
#include "ser/rng.hpp"
#include "ser/tsne.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace ser::cli {
namespace {

// Exit statuses. Anything not listed maps to 1.
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTraining = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidArgument:
      return kExitConfig;
    case ErrorKind::InvalidLabel:
    case ErrorKind::NonFiniteLoss:
    case ErrorKind::NonFiniteKL:
      return kExitTraining;
    case ErrorKind::Internal:
      return 1;
    default:
      return kExitData;
  }
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Experiment config from an optional file, then command-line overrides.
struct ConfigFlags {
  std::string config;
  std::string emotion_set, regime, sampling, output_dir, mappings, optimizer;
  std::vector<std::string> datasets, manifests, stores;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, k_neighbors, n_folds, batch_size;
  std::optional<double> learning_rate, width_multiplier;
  std::vector<std::size_t> hidden;
  bool no_early_stop = false;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    app->add_option("--emotion-set", emotion_set, "four, five or all");
    app->add_option("--regime", regime, "combined or separate");
    app->add_option("--datasets", datasets, "Datasets for the separate regime");
    app->add_option("--sampling", sampling, "none, undersample, smote or adasyn");
    app->add_option("--seed", seed);
    app->add_option("--manifest", manifests, "Manifest (JSON Lines); repeatable");
    app->add_option("--store", stores, "Embedding store; repeatable");
    app->add_option("--mappings", mappings, "Label mapping directory");
    app->add_option("--output-dir", output_dir);
    app->add_option("--epochs", epochs);
    app->add_option("--lr", learning_rate);
    app->add_option("--batch-size", batch_size);
    app->add_option("--optimizer", optimizer, "adam or sgd");
    app->add_flag("--no-early-stop", no_early_stop);
    app->add_option("--width-multiplier", width_multiplier);
    app->add_option("--hidden", hidden, "Explicit hidden widths");
    app->add_option("--folds", n_folds);
    app->add_option("--k-neighbors", k_neighbors);
  }

  /// Overrides are spliced into the config document before parsing, so both
  /// go through the same validation.
  ExperimentConfig resolve(unsigned jobs) const {
    ordered_json j = ordered_json::object();
    fs::path base = fs::current_path();
    if (!config.empty()) {
      try {
        j = ordered_json::parse(read_text(config));
      } catch (const ordered_json::exception& e) {
        fail(ErrorKind::ConfigError, config + " is not valid JSON: " + e.what());
      }
      if (!j.is_object()) fail(ErrorKind::ConfigError, config + " must hold a JSON object");
      base = fs::absolute(config).parent_path();
    }
    const fs::path cwd = fs::current_path();
    auto abs = [&](const std::string& p) { return fs::absolute(cwd / p).string(); };
    if (!emotion_set.empty()) j["emotion_set"] = emotion_set;
    if (!regime.empty()) j["regime"] = regime;
    if (!datasets.empty()) j["datasets"] = datasets;
    if (!sampling.empty()) j["sampling"] = sampling;
    if (seed) j["seed"] = *seed;
    if (!manifests.empty()) {
      j["paths"]["manifests"] = ordered_json::array();
      for (const auto& m : manifests) j["paths"]["manifests"].push_back(abs(m));
    }
    if (!stores.empty()) {
      j["paths"]["stores"] = ordered_json::array();
      for (const auto& s : stores) j["paths"]["stores"].push_back(abs(s));
    }
    if (!mappings.empty()) j["paths"]["mappings"] = abs(mappings);
    if (!output_dir.empty()) j["paths"]["output_dir"] = abs(output_dir);
    if (epochs) j["train"]["epochs"] = *epochs;
    if (learning_rate) j["train"]["learning_rate"] = *learning_rate;
    if (batch_size) j["train"]["batch_size"] = *batch_size;
    if (!optimizer.empty()) j["train"]["optimizer"] = optimizer;
    if (no_early_stop) j["train"]["early_stop_patience"] = nullptr;
    if (width_multiplier) j["train"]["width_multiplier"] = *width_multiplier;
    if (!hidden.empty()) j["train"]["hidden"] = hidden;
    if (n_folds) j["split"]["n_folds"] = *n_folds;
    if (k_neighbors) j["sampler"]["k_neighbors"] = *k_neighbors;
    if (jobs > 0) j["jobs"] = jobs;
    return parse_experiment_config(j.dump(), base);
  }
};

struct Context {
  unsigned jobs = 0;            // 0: keep the config's value
  fs::path error_dir;           // where error.json goes on failure
};

std::vector<AdapterRule> adapter_rules(const std::string& adapter) {
  fs::path p = adapter;
  if (!fs::exists(p)) p = default_data_dir() / "adapters" / (adapter + ".json");
  if (!fs::exists(p)) fail(ErrorKind::ConfigError, "no adapter file or bundled adapter named " + adapter);
  return load_adapter_rules(p);
}

std::vector<UtteranceRecord> read_manifests(const std::vector<std::string>& paths) {
  std::vector<UtteranceRecord> out;
  for (const auto& p : paths) {
    auto records = read_manifest(p);
    out.insert(out.end(), std::make_move_iterator(records.begin()), std::make_move_iterator(records.end()));
  }
  return out;
}

EmotionSetKind emotion_set_or_fail(const std::string& name) {
  const auto kind = parse_emotion_set_kind(name);
  if (!kind) fail(ErrorKind::ConfigError, "emotion set must be four, five or all");
  return *kind;
}

void print_audit(const AuditReport& report, const std::string& what) {
  auto logger = log::get("audit");
  for (const auto& v : report.violations) {
    logger->error("{} {}{}: {}", v.kind, v.id, v.fold ? " fold " + std::to_string(*v.fold) : std::string(), v.message);
  }
  logger->info("{}: {} violation(s)", what, report.violations.size());
}

void add_scan(CLI::App& app, Context& ctx, std::function<void()>& action) {
  auto* cmd = app.add_subcommand("scan", "Build a manifest from a dataset directory");
  auto root = std::make_shared<std::string>();
  auto adapter = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  cmd->add_option("--root", *root, "Dataset root")->required();
  cmd->add_option("--adapter", *adapter, "Adapter file, or a bundled dataset id")->required();
  cmd->add_option("-o,--out", *out, "Manifest to write")->required();
  cmd->callback([&, root, adapter, out] {
    action = [&, root, adapter, out] {
      ctx.error_dir = fs::path(*out).parent_path();
      const auto rules = adapter_rules(*adapter);
      const ScanResult scan = scan_dataset(*root, rules, std::max(1u, ctx.jobs));
      ensure_parent(*out);
      write_manifest(*out, scan.records);
      write_skip_list(skipped_path(*out), scan.skipped);
      log::get("scan")->info("{} records, {} skipped", scan.records.size(), scan.skipped.size());
    };
  });
}

void add_project(CLI::App& app, Context& ctx, std::function<void()>& action) {
  auto* cmd = app.add_subcommand("project", "Map native labels onto an emotion set");
  struct Args {
    std::vector<std::string> manifests;
    std::string set = "four", mappings, out;
    bool strict = false;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--manifest", a->manifests)->required();
  cmd->add_option("--emotion-set", a->set);
  cmd->add_option("--mappings", a->mappings, "Label mapping directory (default: bundled)");
  cmd->add_flag("--strict", a->strict, "Fail on native labels no rule names");
  cmd->add_option("-o,--out", a->out)->required();
  cmd->callback([&, a] {
    action = [&, a] {
      ctx.error_dir = fs::path(a->out).parent_path();
      const auto records = read_manifests(a->manifests);
      const Taxonomy taxonomy =
          Taxonomy::load_directory(a->mappings.empty() ? default_data_dir() / "mappings" : fs::path(a->mappings));
      const auto projected =
          project_manifest(records, EmotionSet::of(emotion_set_or_fail(a->set)), taxonomy,
                           a->strict ? UnknownLabelPolicy::Strict : UnknownLabelPolicy::Warn);
      ensure_parent(a->out);
      write_manifest(a->out, projected);
      log::get("project")->info("kept {} of {} records", projected.size(), records.size());
    };
  });
}

void add_split(CLI::App& app, Context& ctx, std::function<void()>& action) {
  auto* cmd = app.add_subcommand("split", "Write the audited split plan(s) of an experiment");
  auto flags = std::make_shared<ConfigFlags>();
  auto out = std::make_shared<std::string>();
  flags->attach(cmd);
  cmd->add_option("-o,--out", *out, "Directory for plan.json or plans/<dataset>.json")->required();
  cmd->callback([&, flags, out] {
    action = [&, flags, out] {
      ctx.error_dir = *out;
      const auto cfg = flags->resolve(ctx.jobs);
      const auto data = load_experiment_data(cfg);
      for (const auto& plan : build_plans(cfg, data, experiment_hash(cfg))) {
        const fs::path path = plan_path(*out, plan);
        fs::create_directories(path.parent_path());
        write_plan(plan, path);
        log::get("split")->info("{}: {} folds", path.string(), plan.folds.size());
      }
    };
  });
}

void add_audit(CLI::App& app, Context& ctx, std::function<void()>& action, int& status) {
  auto* cmd = app.add_subcommand("audit", "Re-verify the leakage and coverage invariants of a plan");
  struct Args {
    std::string plan, out;
    std::vector<std::string> manifests;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--plan", a->plan)->required();
  cmd->add_option("--manifest", a->manifests, "Also check every clip of each test speaker");
  cmd->add_option("-o,--out", a->out, "Write the report as JSON");
  cmd->callback([&, a] {
    action = [&, a] {
      if (!a->out.empty()) ctx.error_dir = fs::path(a->out).parent_path();
      const SplitPlan plan = read_plan(a->plan);
      const auto manifest = read_manifests(a->manifests);
      const AuditReport report = audit_plan(plan, manifest);
      print_audit(report, a->plan);
      if (!a->out.empty()) {
        ordered_json j;
        j["plan"] = a->plan;
        j["ok"] = report.ok();
        j["violations"] = ordered_json::array();
        for (const auto& v : report.violations) {
          ordered_json e;
          e["kind"] = v.kind;
          e["id"] = v.id;
          e["fold"] = v.fold ? ordered_json(*v.fold) : ordered_json(nullptr);
          e["message"] = v.message;
          j["violations"].push_back(e);
        }
        write_text(a->out, j.dump(1) + "\n");
      }
      if (!report.ok()) status = kExitData;
    };
  });
}

void add_balance(CLI::App& app, Context& ctx, std::function<void()>& action) {
  auto* cmd = app.add_subcommand("balance", "Resample one dataset (or everything) and write the result");
  auto flags = std::make_shared<ConfigFlags>();
  auto dataset = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  flags->attach(cmd);
  cmd->add_option("--dataset", *dataset, "Restrict to one dataset");
  cmd->add_option("-o,--out", *out, "Output directory")->required();
  cmd->callback([&, flags, dataset, out] {
    action = [&, flags, dataset, out] {
      ctx.error_dir = *out;
      const auto cfg = flags->resolve(ctx.jobs);
      const auto data = load_experiment_data(cfg);
      std::vector<std::string> ids;
      for (const auto& r : data.records) {
        if (dataset->empty() || r.dataset_id == *dataset) ids.push_back(r.id);
      }
      if (ids.empty()) fail(ErrorKind::UnknownDataset, *dataset + " has no records in the selected emotion set");
      SamplerConfig sc{cfg.sampling, cfg.k_neighbors, cfg.adasyn_beta, derive_seed(cfg.seed, "balance/cli"), cfg.jobs};
      const BalanceResult r = balance(gather(ids, data), sc);

      EmbeddingStore store(data.store.dim());
      std::vector<float> row(data.store.dim());
      std::string labels = "id,label,base_id\n";
      for (std::size_t i = 0; i < r.data.rows(); ++i) {
        const auto v = r.data.row(i);
        for (std::size_t k = 0; k < v.size(); ++k) row[k] = static_cast<float>(v[k]);
        store.add(r.data.ids[i], row);
        const std::string base = i < r.original_rows ? "" : r.data.ids[r.synthetic_base[i - r.original_rows]];
        labels += r.data.ids[i] + "," + std::string(to_string(r.data.y[i])) + "," + base + "\n";
      }
      fs::create_directories(*out);
      write_store(store, fs::path(*out) / "balanced.seremb");
      write_text(fs::path(*out) / "labels.csv", labels);
      log::get("balance")->info("{} rows in, {} rows out ({})", r.original_rows, r.data.rows(), to_string(cfg.sampling));
    };
  });
}

struct FoldArgs {
  ConfigFlags flags;
  std::string plan, out, model;
  std::size_t fold = 0;
};

void add_train(CLI::App& app, Context& ctx, std::function<void()>& action) {
  auto* cmd = app.add_subcommand("train", "Train one fold of a split plan");
  auto a = std::make_shared<FoldArgs>();
  a->flags.attach(cmd);
  cmd->add_option("--plan", a->plan)->required()->check(CLI::ExistingFile);
  cmd->add_option("--fold", a->fold)->required();
  cmd->add_option("-o,--out", a->out, "Directory for fold<N>.sermlp and fold<N>.csv")->required();
  cmd->callback([&, a] {
    action = [&, a] {
      ctx.error_dir = a->out;
      const auto cfg = a->flags.resolve(ctx.jobs);
      const auto data = load_experiment_data(cfg);
      const SplitPlan plan = read_plan(a->plan);
      const CellSpec cell = cell_spec(cfg, data, plan);
      const TrainResult r = train_fold(cfg, data, plan, cell, a->fold);
      const fs::path stem = fs::path(a->out) / ("fold" + std::to_string(a->fold));
      fs::create_directories(a->out);
      write_model(r.model, stem.string() + ".sermlp");
      write_text(stem.string() + ".csv", loss_curve_csv(r.curve));
      log::get("train")->info("cell {} fold {}: best epoch {} of {}", cell.name, a->fold, r.best_epoch, r.curve.size());
    };
  });
}

void add_eval(CLI::App& app, Context& ctx, std::function<void()>& action) {
  auto* cmd = app.add_subcommand("eval", "Evaluate a fold checkpoint and write its ledger records");
  auto a = std::make_shared<FoldArgs>();
  a->flags.attach(cmd);
  cmd->add_option("--plan", a->plan)->required()->check(CLI::ExistingFile);
  cmd->add_option("--fold", a->fold)->required();
  cmd->add_option("--model", a->model)->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", a->out, "Ledger file (JSON Lines)")->required();
  cmd->callback([&, a] {
    action = [&, a] {
      ctx.error_dir = fs::path(a->out).parent_path();
      const auto cfg = a->flags.resolve(ctx.jobs);
      const auto data = load_experiment_data(cfg);
      const SplitPlan plan = read_plan(a->plan);
      const CellSpec cell = cell_spec(cfg, data, plan);
      const MlpModel model = read_model(a->model);
      LedgerContext lc{cfg.resolved_id(), experiment_hash(cfg), cfg.seed, cfg.emotion_set, cfg.regime, cfg.sampling, 0};
      std::string text;
      for (const auto& r : evaluate_fold(model, data, plan, cell, a->fold)) {
        lc.n_classes = cell.n_classes.at(r.dataset_id);
        text += ledger_line(lc, r) + "\n";
        const FoldScore s = score(r);
        log::get("eval")->info("{} {} fold {}: {}/{} correct", r.dataset_id, to_string(r.scope), r.fold_index,
                               s.correct, s.n);
      }
      write_text(a->out, text);
    };
  });
}

void add_report(CLI::App& app, Context& ctx, std::function<void()>& action) {
  auto* cmd = app.add_subcommand("report", "Render the accuracy grid from ledger files");
  struct Args {
    std::vector<std::string> ledgers;
    std::string format = "md", out;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--ledger", a->ledgers)->required();
  cmd->add_option("--format", a->format)->check(CLI::IsMember({"md", "csv"}));
  cmd->add_option("-o,--out", a->out, "Output file; csv goes to stdout when omitted");
  cmd->callback([&, a] {
    action = [&, a] {
      if (!a->out.empty()) ctx.error_dir = fs::path(a->out).parent_path();
      if (a->out.empty() && a->format != "csv") {
        fail(ErrorKind::ConfigError, "only --format csv may be written to stdout; pass --out");
      }
      std::vector<std::string> lines;
      for (const auto& path : a->ledgers) {
        std::istringstream in(read_text(path));
        for (std::string line; std::getline(in, line);) {
          if (!line.empty()) lines.push_back(line);
        }
      }
      const ExperimentGrid grid = grid_from_ledger(lines);
      const std::string text = render_grid(grid, a->format == "csv" ? GridFormat::Csv : GridFormat::Markdown);
      if (a->out.empty()) {
        std::cout << text << std::flush;
      } else {
        write_text(a->out, text);
      }
    };
  });
}

void add_tsne(CLI::App& app, Context& ctx, std::function<void()>& action) {
  auto* cmd = app.add_subcommand("tsne", "Two-dimensional t-SNE of an embedding store");
  struct Args {
    std::vector<std::string> manifests, stores;
    std::string mappings, set = "all", out;
    std::size_t cap = 2000;
    TsneConfig tsne;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--manifest", a->manifests)->required();
  cmd->add_option("--store", a->stores)->required();
  cmd->add_option("--mappings", a->mappings);
  cmd->add_option("--emotion-set", a->set, "Set used to name point labels");
  cmd->add_option("--cap", a->cap, "Stratified subsample size");
  cmd->add_option("--perplexity", a->tsne.perplexity);
  cmd->add_option("--iterations", a->tsne.iterations);
  cmd->add_option("--seed", a->tsne.seed);
  cmd->add_option("-o,--out", a->out, "Directory for tsne.csv, tsne.svg and kl.csv")->required();
  cmd->callback([&, a] {
    action = [&, a] {
      ctx.error_dir = a->out;
      const auto records = read_manifests(a->manifests);
      std::vector<EmbeddingStore> stores;
      for (const auto& p : a->stores) stores.push_back(read_store(p));
      const EmbeddingStore store = stores.size() == 1 ? std::move(stores.front()) : merge_stores(stores);
      const Taxonomy taxonomy =
          Taxonomy::load_directory(a->mappings.empty() ? default_data_dir() / "mappings" : fs::path(a->mappings));
      const EmotionSet set = EmotionSet::of(emotion_set_or_fail(a->set));

      const JoinResult joined = join(records, store);
      std::vector<std::string> strata;
      std::vector<std::string> emotions;
      for (const auto& [rec, _] : joined.pairs) {
        const auto label = taxonomy.has_dataset(rec.dataset_id) ? map_label(taxonomy, rec.dataset_id, rec.native_label, set)
                                                                : std::nullopt;
        emotions.push_back(label ? std::string(to_string(*label)) : rec.native_label);
        strata.push_back(rec.dataset_id + "/" + emotions.back());
      }
      const auto pick = stratified_subsample(strata, a->cap, derive_seed(a->tsne.seed, "tsne/subsample"));
      if (pick.empty()) fail(ErrorKind::EmptyResult, "no manifest record has an embedding");
      DenseMatrix x(static_cast<Eigen::Index>(pick.size()), static_cast<Eigen::Index>(store.dim()));
      for (std::size_t i = 0; i < pick.size(); ++i) {
        const auto& v = joined.pairs[pick[i]].second;
        for (std::size_t k = 0; k < v.size(); ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[k];
      }
      const TsneResult r = run_tsne(x, a->tsne);

      std::vector<TsnePoint> points;
      for (std::size_t i = 0; i < pick.size(); ++i) {
        const auto& rec = joined.pairs[pick[i]].first;
        const auto row = static_cast<Eigen::Index>(i);
        points.push_back({rec.id, r.embedding(row, 0), r.embedding(row, 1), rec.dataset_id, emotions[pick[i]]});
      }
      const fs::path dir = a->out;
      fs::create_directories(dir);
      write_tsne_csv(dir / "tsne.csv", points);
      write_text(dir / "tsne.svg", render_tsne_svg(points));
      std::string kl = "iteration,kl\n";
      for (std::size_t i = 0; i < r.kl_trace.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, r.kl_trace[i]);
        kl += buf;
      }
      write_text(dir / "kl.csv", kl);
      log::get("tsne")->info("{} points, final KL {}", points.size(), r.kl_trace.empty() ? 0.0 : r.kl_trace.back());
    };
  });
}

void add_run(CLI::App& app, Context& ctx, std::function<void()>& action) {
  auto* cmd = app.add_subcommand("run", "Full pipeline: split, balance, train, evaluate and report");
  auto flags = std::make_shared<ConfigFlags>();
  flags->attach(cmd);
  cmd->callback([&, flags] {
    action = [&, flags] {
      const auto cfg = flags->resolve(ctx.jobs);
      ctx.error_dir = cfg.output_dir / cfg.resolved_id();
      const ExperimentOutcome outcome = run_experiment(cfg);
      log::get("run")->info("results in {}", outcome.directory.string());
    };
  });
}

void add_synth(CLI::App& app, Context& ctx, std::function<void()>& action) {
  auto* cmd = app.add_subcommand("synth", "Write a synthetic corpus covering every mapped dataset");
  struct Args {
    FixtureSpec spec;
    std::string out, mappings;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--seed", a->spec.seed);
  cmd->add_option("--dim", a->spec.dim);
  cmd->add_option("--clips-per-label", a->spec.clips_per_label);
  cmd->add_option("--mappings", a->mappings);
  cmd->add_option("-o,--out", a->out)->required();
  cmd->callback([&, a] {
    action = [&, a] {
      ctx.error_dir = a->out;
      const fs::path mappings = a->mappings.empty() ? default_data_dir() / "mappings" : fs::path(a->mappings);
      const FixturePaths paths = write_synthetic_fixture(a->out, Taxonomy::load_directory(mappings), a->spec);
      ordered_json cfg;
      cfg["paths"]["manifests"] = {paths.manifest.filename().string()};
      cfg["paths"]["stores"] = {paths.store.filename().string()};
      cfg["paths"]["output_dir"] = "runs";
      write_text(fs::path(a->out) / "config.json", cfg.dump(1) + "\n");
      log::get("synth")->info("wrote {} and {}", paths.manifest.string(), paths.store.string());
    };
  });
}

void write_error_record(const fs::path& dir, const std::string& kind, const std::string& message, int code) {
  ordered_json j;
  j["status"] = "error";
  j["kind"] = kind;
  j["message"] = message;
  j["exit_code"] = code;
  std::error_code ec;
  if (!dir.empty()) fs::create_directories(dir, ec);
  if (dir.empty() || ec) {
    std::cerr << j.dump() << std::endl;
    return;
  }
  std::ofstream out(dir / "error.json", std::ios::trunc);
  out << j.dump(1) << "\n";
  if (!out) std::cerr << j.dump() << std::endl;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Speech emotion recognition experiment pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  Context ctx;
  std::string level = "info";
  app.add_option("-j,--jobs", ctx.jobs, "Parallel jobs (default: config value)");
  app.add_option("--log-level", level)->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::function<void()> action;
  int status = 0;
  add_scan(app, ctx, action);
  add_project(app, ctx, action);
  add_split(app, ctx, action);
  add_audit(app, ctx, action, status);
  add_balance(app, ctx, action);
  add_train(app, ctx, action);
  add_eval(app, ctx, action);
  add_report(app, ctx, action);
  add_tsne(app, ctx, action);
  add_run(app, ctx, action);
  add_synth(app, ctx, action);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  log::set_level(spdlog::level::from_str(level));

  try {
    action();
  } catch (const Error& e) {
    const int code = exit_code(e.kind());
    log::get("cli")->error("{}", e.what());
    write_error_record(ctx.error_dir, std::string(to_string(e.kind())), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    log::get("cli")->error("{}", e.what());
    write_error_record(ctx.error_dir, "Internal", e.what(), 1);
    return 1;
  }
  return status;
}

}  // namespace ser::cli

int main(int argc, char** argv) { return ser::cli::run_cli(argc, argv); }
