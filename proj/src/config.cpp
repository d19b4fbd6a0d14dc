// SPDX-License-Identifier: Apache-2.0
#include "drfuse/config.hpp"

#include <fstream>

#include "drfuse/errors.hpp"
#include "drfuse/json_util.hpp"

namespace drfuse {

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfigError(std::string("experiment config: parse error: ") + e.what());
  }
  check_known_keys(j, {"dataset", "model", "training", "eval", "split"}, "experiment config");

  ExperimentConfig cfg;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_known_keys(d, {"manifest", "synthetic"}, "dataset section");
    if (d.contains("manifest") && d.contains("synthetic"))
      throw InvalidConfigError("dataset section: give either manifest or synthetic, not both");
    if (d.contains("manifest")) cfg.manifest_path = d.at("manifest").get<std::string>();
    if (d.contains("synthetic"))
      cfg.synthetic = parse_synthetic_config_json(d.at("synthetic").dump());
  }
  if (j.contains("model")) cfg.model = parse_model_config_json(j.at("model").dump());
  if (j.contains("training")) cfg.training = parse_train_config_json(j.at("training").dump());
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    check_known_keys(e, {"bootstrap_iters", "bootstrap_seed", "matched_only"}, "eval section");
    cfg.eval.bootstrap_iters =
        json_get<std::size_t>(e, "bootstrap_iters", cfg.eval.bootstrap_iters);
    cfg.eval.bootstrap_seed =
        json_get<std::uint64_t>(e, "bootstrap_seed", cfg.eval.bootstrap_seed);
    cfg.eval.matched_only = json_get<bool>(e, "matched_only", cfg.eval.matched_only);
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    check_known_keys(s, {"ratios", "seed"}, "split section");
    auto ratios = json_get<std::vector<double>>(
        s, "ratios", {cfg.split.ratios[0], cfg.split.ratios[1], cfg.split.ratios[2]});
    if (ratios.size() != 3)
      throw InvalidConfigError("split section: ratios must have 3 entries");
    cfg.split.ratios = {ratios[0], ratios[1], ratios[2]};
    cfg.split.seed = json_get<std::uint64_t>(s, "seed", cfg.split.seed);
  }
  return cfg;
}

std::string ExperimentConfig::to_json_text() const {
  nlohmann::json j;
  nlohmann::json d;
  if (!manifest_path.empty()) d["manifest"] = manifest_path;
  if (synthetic.has_value())
    d["synthetic"] = nlohmann::json::parse(serialize_synthetic_config(*synthetic));
  j["dataset"] = std::move(d);
  j["model"] = nlohmann::json::parse(serialize_model_config(model));
  j["training"] = nlohmann::json::parse(serialize_train_config(training));
  nlohmann::json e;
  e["bootstrap_iters"] = eval.bootstrap_iters;
  e["bootstrap_seed"] = eval.bootstrap_seed;
  e["matched_only"] = eval.matched_only;
  j["eval"] = std::move(e);
  nlohmann::json s;
  s["ratios"] = split.ratios;
  s["seed"] = split.seed;
  j["split"] = std::move(s);
  return j.dump(2);
}

SyntheticConfig synthetic_preset(const std::string& name) {
  SyntheticConfig cfg;  // defaults are the "default" preset
  if (name == "default") return cfg;
  if (name == "mimic-like") {
    cfg.n_samples = 2000;
    cfg.n_classes = 25;
    cfg.n_features = 17;
    cfg.seq_len = 48;
    return cfg;
  }
  if (name == "smoke") {
    cfg.n_samples = 200;
    cfg.n_classes = 4;
    cfg.n_features = 6;
    cfg.seq_len = 8;
    cfg.image_size = 8;
    return cfg;
  }
  throw InvalidConfigError("unknown preset: " + name +
                           " (expected default, mimic-like, or smoke)");
}

}  // namespace drfuse
