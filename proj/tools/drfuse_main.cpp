// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "drfuse/config.hpp"
#include "drfuse/errors.hpp"
#include "drfuse/eval.hpp"
#include "drfuse/reports.hpp"

namespace fs = std::filesystem;
using namespace drfuse;

namespace {

struct DatasetBundle {
  Dataset ds;
  DatasetManifest manifest;
  SplitIndices split;
};

// Loads the dataset named by the config and resolves the split, preferring
// the assignment pinned in the manifest.
DatasetBundle open_dataset(const ExperimentConfig& cfg) {
  if (cfg.manifest_path.empty())
    throw InvalidConfigError("dataset.manifest is required for this command");
  if (!fs::exists(cfg.manifest_path))
    throw IoError("dataset manifest not found: " + cfg.manifest_path);
  DatasetBundle b;
  b.manifest = load_manifest(cfg.manifest_path);
  b.ds = load_dataset(b.manifest, fs::path(cfg.manifest_path).parent_path().string());
  if (b.manifest.has_split())
    b.split = b.manifest.split;
  else
    b.split = split_dataset(b.ds, cfg.split.ratios, cfg.split.seed);
  return b;
}

void check_model_matches_dataset(const ModelConfig& mc, const DatasetManifest& m) {
  if (mc.n_classes != m.n_classes)
    throw InvalidConfigError("model.n_classes (" + std::to_string(mc.n_classes) +
                             ") does not match dataset n_classes (" +
                             std::to_string(m.n_classes) + ")");
  if (mc.n_features != m.n_features)
    throw InvalidConfigError("model.n_features (" + std::to_string(mc.n_features) +
                             ") does not match dataset n_features (" +
                             std::to_string(m.n_features) + ")");
  if (m.image_size > 0 && mc.image_size != m.image_size)
    throw InvalidConfigError("model.image_size (" + std::to_string(mc.image_size) +
                             ") does not match dataset image_size (" +
                             std::to_string(m.image_size) + ")");
}

std::string checkpoint_meta(const ExperimentConfig& cfg) {
  nlohmann::json meta;
  meta["model"] = nlohmann::json::parse(serialize_model_config(cfg.model));
  meta["training"] = nlohmann::json::parse(serialize_train_config(cfg.training));
  meta["dataset_manifest"] = cfg.manifest_path;
  return meta.dump();
}

int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 const std::string& preset, long long seed_override) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = ExperimentConfig::from_file(config_path);
  SyntheticConfig sc;
  if (!preset.empty()) {
    if (cfg.synthetic.has_value())
      throw InvalidConfigError("give either --preset or a dataset.synthetic section");
    sc = synthetic_preset(preset);
  } else if (cfg.synthetic.has_value()) {
    sc = *cfg.synthetic;
  } else {
    throw InvalidConfigError("generate needs --preset or a dataset.synthetic section");
  }
  if (seed_override >= 0) sc.seed = static_cast<std::uint64_t>(seed_override);
  sc.validate();

  Dataset ds = generate_synthetic(sc);
  SplitIndices split = split_dataset(ds, cfg.split.ratios, cfg.split.seed);

  fs::create_directories(out_dir);
  std::string records_path = (fs::path(out_dir) / "records.jsonl").string();
  write_records_jsonl(ds, records_path);

  DatasetManifest m;
  m.records_path = "records.jsonl";
  m.n_classes = ds.n_classes;
  m.n_features = ds.n_features;
  m.seq_len = sc.seq_len;
  m.image_size = sc.image_size;
  m.class_drivers = ds.class_drivers;
  m.split_seed = cfg.split.seed;
  m.split_ratios = cfg.split.ratios;
  m.split = split;
  m.generator_json = serialize_synthetic_config(sc);
  m.decoder_digest = synthetic_decoder_digest(sc);
  save_manifest(m, (fs::path(out_dir) / "manifest.json").string());

  nlohmann::json log;
  log["seed"] = sc.seed;
  log["decoder_digest"] = m.decoder_digest;
  log["n_records"] = ds.size();
  std::size_t with_cxr = 0;
  for (const auto& r : ds.records) with_cxr += r.has_cxr() ? 1 : 0;
  log["n_with_cxr"] = with_cxr;
  log["split_sizes"] = {split.train.size(), split.val.size(), split.test.size()};
  std::vector<double> prevalence(ds.n_classes, 0.0);
  for (const auto& r : ds.records)
    for (std::size_t c = 0; c < ds.n_classes; ++c) prevalence[c] += r.labels[c];
  for (auto& p : prevalence) p /= static_cast<double>(ds.size());
  log["label_prevalence"] = prevalence;
  std::ofstream lf((fs::path(out_dir) / "generate_log.json").string(), std::ios::binary);
  lf << log.dump(2) << "\n";

  std::cout << "wrote " << records_path << " (" << ds.size() << " records, " << with_cxr
            << " with CXR)\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              long long seed_override) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  if (seed_override >= 0) cfg.training.seed = static_cast<std::uint64_t>(seed_override);
  DatasetBundle data = open_dataset(cfg);
  check_model_matches_dataset(cfg.model, data.manifest);

  fs::create_directories(out_dir);
  {
    std::ofstream snap((fs::path(out_dir) / "config.resolved.json").string(),
                       std::ios::binary);
    snap << cfg.to_json_text() << "\n";
  }

  auto model = make_model(cfg.model, cfg.training.seed);
  std::string log_path = (fs::path(out_dir) / "train_log.jsonl").string();
  FitResult fr = fit(*model, data.ds, data.split.train, data.split.val, cfg.training,
                     log_path);
  std::string ck_path = (fs::path(out_dir) / "checkpoint.bin").string();
  save_checkpoint(ck_path, model->params(), checkpoint_meta(cfg));

  std::cout << "trained " << model_type_name(cfg.model.type) << " for " << fr.epochs_run
            << " epochs";
  if (!data.split.val.empty())
    std::cout << "; best val macro PRAUC " << fr.best_val_prauc << " at epoch "
              << fr.best_epoch;
  std::cout << "\nwrote " << ck_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& checkpoint_path,
                 const std::string& out_dir, bool matched_only, long long seed_override) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  if (seed_override >= 0) cfg.eval.bootstrap_seed = static_cast<std::uint64_t>(seed_override);
  if (matched_only) cfg.eval.matched_only = true;

  Checkpoint ck = load_checkpoint(checkpoint_path);
  nlohmann::json meta = nlohmann::json::parse(ck.meta_json);
  ModelConfig mc = parse_model_config_json(meta.at("model").dump());
  DatasetBundle data = open_dataset(cfg);
  check_model_matches_dataset(mc, data.manifest);
  auto model = make_model(mc, 0);
  model->params().load(ck.tensors);

  std::vector<std::size_t> test_idx = data.split.test;
  if (cfg.eval.matched_only) {
    std::vector<std::size_t> matched;
    for (std::size_t i : test_idx)
      if (data.ds.records[i].has_cxr()) matched.push_back(i);
    test_idx = std::move(matched);
  }
  if (test_idx.empty()) throw InvalidInputError("evaluate: test split is empty");

  MetricReport report = evaluate_model(*model, data.ds, test_idx, cfg.eval.bootstrap_iters,
                                       cfg.eval.bootstrap_seed);

  fs::create_directories(out_dir);
  nlohmann::json extra;
  extra["checkpoint"] = checkpoint_path;
  extra["model_type"] = model_type_name(mc.type);
  extra["matched_only"] = cfg.eval.matched_only;
  extra["bootstrap_iters"] = cfg.eval.bootstrap_iters;
  extra["bootstrap_seed"] = cfg.eval.bootstrap_seed;
  extra["split_seed"] = data.manifest.has_split() ? data.manifest.split_seed : cfg.split.seed;
  write_summary_json((fs::path(out_dir) / "summary.json").string(), report, extra);
  write_per_class_csv((fs::path(out_dir) / "per_class.csv").string(), report,
                      data.ds.class_drivers);

  if (auto* dr = dynamic_cast<DrFuseModel*>(model.get())) {
    write_alpha_csv((fs::path(out_dir) / "alpha.csv").string(),
                    export_alpha(*dr, data.ds, test_idx));
    bool factors = true;
    for (std::size_t i : test_idx) factors = factors && data.ds.records[i].has_factors();
    if (factors && !data.split.train.empty()) {
      ProbeReport probe =
          disentanglement_probe(*dr, data.ds, data.split.train, test_idx);
      write_probes_json((fs::path(out_dir) / "probes.json").string(), probe);
      write_projection_csv((fs::path(out_dir) / "projection_2d.csv").string(), *dr, data.ds,
                           test_idx);
    }
  }
  std::cout << "macro PRAUC " << report.macro << " (" << report.ci.lo << ", "
            << report.ci.hi << ") over " << test_idx.size() << " samples\n";
  std::cout << "wrote " << (fs::path(out_dir) / "summary.json").string() << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& out_dir,
               long long seed_override) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  if (seed_override >= 0) cfg.training.seed = static_cast<std::uint64_t>(seed_override);
  DatasetBundle data = open_dataset(cfg);
  check_model_matches_dataset(cfg.model, data.manifest);
  fs::create_directories(out_dir);
  {
    std::ofstream snap((fs::path(out_dir) / "config.resolved.json").string(),
                       std::ios::binary);
    snap << cfg.to_json_text() << "\n";
  }

  AblationSpec spec;
  spec.model = cfg.model;
  spec.training = cfg.training;
  spec.bootstrap_iters = cfg.eval.bootstrap_iters;
  spec.bootstrap_seed = cfg.eval.bootstrap_seed;
  spec.out_dir = out_dir;
  auto rows = run_ablations(data.ds, data.split, spec);

  nlohmann::json extra;
  extra["split_seed"] = data.manifest.has_split() ? data.manifest.split_seed : cfg.split.seed;
  extra["train_seed"] = cfg.training.seed;
  extra["split_sizes"] = {data.split.train.size(), data.split.val.size(),
                          data.split.test.size()};
  write_ablation_json((fs::path(out_dir) / "ablation_summary.json").string(), rows, extra);
  write_ablation_csv((fs::path(out_dir) / "ablation_summary.csv").string(), rows);

  for (const auto& r : rows)
    std::cout << r.name << ": matched " << r.matched.macro << ", full " << r.full.macro
              << "\n";
  std::cout << "wrote " << (fs::path(out_dir) / "ablation_summary.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disentangled multimodal fusion experiments (synthetic, desk scale)"};
  app.require_subcommand(1);

  std::string config_path, out_dir, preset, checkpoint_path;
  long long seed_override = -1;
  bool matched_only = false;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset and manifest");
  gen->add_option("--config", config_path, "Experiment config (dataset.synthetic section)");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--preset", preset, "Built-in dataset preset: default, mimic-like, smoke");
  gen->add_option("--seed", seed_override, "Override the generator seed");

  auto* train = app.add_subcommand("train", "Train a model from a config");
  train->add_option("--config", config_path, "Experiment config")->required();
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--seed", seed_override, "Override the training seed");

  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint");
  eval->add_option("--config", config_path, "Experiment config (dataset + eval)")->required();
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  eval->add_option("--out", out_dir, "Output directory")->required();
  eval->add_flag("--matched-only", matched_only, "Evaluate only CXR-present samples");
  eval->add_option("--seed", seed_override, "Override the bootstrap seed");

  auto* ablate = app.add_subcommand("ablate", "Run the four-variant ablation study");
  ablate->add_option("--config", config_path, "Experiment config")->required();
  ablate->add_option("--out", out_dir, "Output directory")->required();
  ablate->add_option("--seed", seed_override, "Override the training seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(config_path, out_dir, preset, seed_override);
    if (train->parsed()) return cmd_train(config_path, out_dir, seed_override);
    if (eval->parsed())
      return cmd_evaluate(config_path, checkpoint_path, out_dir, matched_only, seed_override);
    if (ablate->parsed()) return cmd_ablate(config_path, out_dir, seed_override);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
