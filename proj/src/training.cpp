// SPDX-License-Identifier: Apache-2.0
#include "drfuse/training.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "drfuse/errors.hpp"
#include "drfuse/eval.hpp"
#include "drfuse/json_util.hpp"

namespace drfuse {

void TrainConfig::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0)
    throw InvalidConfigError("training: lambdas must be nonnegative");
  if (epsilon < 0.0) throw InvalidConfigError("training: epsilon must be nonnegative");
  if (!(lr > 0.0)) throw InvalidConfigError("training: lr must be positive");
  if (batch_size < 1) throw InvalidConfigError("training: batch_size must be >= 1");
  if (max_epochs < 1) throw InvalidConfigError("training: max_epochs must be >= 1");
  if (!(modality_dropout >= 0.0 && modality_dropout <= 1.0))
    throw InvalidConfigError("training: modality_dropout must be in [0, 1]");
  if (!(clip_norm > 0.0)) throw InvalidConfigError("training: clip_norm must be positive");
}

std::string serialize_train_config(const TrainConfig& cfg) {
  nlohmann::json j;
  j["lambda1"] = cfg.lambda1;
  j["lambda2"] = cfg.lambda2;
  j["lambda3"] = cfg.lambda3;
  j["epsilon"] = cfg.epsilon;
  j["lr"] = cfg.lr;
  j["batch_size"] = cfg.batch_size;
  j["max_epochs"] = cfg.max_epochs;
  j["patience"] = cfg.patience;
  j["modality_dropout"] = cfg.modality_dropout;
  j["clip_norm"] = cfg.clip_norm;
  j["seed"] = cfg.seed;
  return j.dump();
}

TrainConfig parse_train_config_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfigError(std::string("train config: parse error: ") + e.what());
  }
  check_known_keys(j,
                   {"lambda1", "lambda2", "lambda3", "epsilon", "lr", "batch_size",
                    "max_epochs", "patience", "modality_dropout", "clip_norm", "seed"},
                   "train config");
  TrainConfig cfg;
  cfg.lambda1 = json_get<double>(j, "lambda1", cfg.lambda1);
  cfg.lambda2 = json_get<double>(j, "lambda2", cfg.lambda2);
  cfg.lambda3 = json_get<double>(j, "lambda3", cfg.lambda3);
  cfg.epsilon = json_get<double>(j, "epsilon", cfg.epsilon);
  cfg.lr = json_get<double>(j, "lr", cfg.lr);
  cfg.batch_size = json_get<std::size_t>(j, "batch_size", cfg.batch_size);
  cfg.max_epochs = json_get<std::size_t>(j, "max_epochs", cfg.max_epochs);
  cfg.patience = json_get<std::size_t>(j, "patience", cfg.patience);
  cfg.modality_dropout = json_get<double>(j, "modality_dropout", cfg.modality_dropout);
  cfg.clip_norm = json_get<double>(j, "clip_norm", cfg.clip_norm);
  cfg.seed = json_get<std::uint64_t>(j, "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

std::vector<SampleRecord> apply_modality_dropout(std::vector<SampleRecord> batch,
                                                 double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0))
    throw InvalidConfigError("modality_dropout rate must be in [0, 1]");
  for (auto& rec : batch)
    if (rec.has_cxr() && rng.bernoulli(rate)) rec.cxr.reset();
  return batch;
}

LossBreakdown compute_loss(Model& model, const std::vector<SampleRecord>& batch,
                           const TrainConfig& cfg) {
  if (batch.empty()) throw InvalidInputError("compute_loss: empty batch");
  LossWeights w = cfg.weights();
  LossBreakdown mean;
  for (const auto& rec : batch) {
    Tape tape;
    SampleGraph sg = model.forward_loss(tape, rec, w);
    if (const char* term = sg.parts.first_non_finite())
      throw TrainingDivergenceError(std::string("non-finite loss term '") + term +
                                    "' for record " + rec.id);
    mean.add(sg.parts);
  }
  mean.scale(1.0 / static_cast<double>(batch.size()));
  return mean;
}

AdamOptimizer::AdamOptimizer(ParamStore& params, double lr, double beta1, double beta2,
                             double eps)
    : params_(&params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, p] : *params_) {
    if (!p->trainable) continue;
    auto mit = m_.find(name);
    if (mit == m_.end()) {
      mit = m_.emplace(name, Tensor(p->value.shape())).first;
      v_.emplace(name, Tensor(p->value.shape()));
    }
    Tensor& m = mit->second;
    Tensor& v = v_.at(name);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double g = p->grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p->value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

double clip_global_norm(ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (auto& [name, p] : params) {
    if (!p->trainable) continue;
    for (std::size_t i = 0; i < p->grad.size(); ++i) sq += p->grad[i] * p->grad[i];
  }
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double s = max_norm / norm;
    for (auto& [name, p] : params) {
      if (!p->trainable) continue;
      for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= s;
    }
  }
  return norm;
}

void write_epoch_log_line(std::ostream& out, const EpochLog& e, bool has_val) {
  nlohmann::json train;
  train["epoch"] = e.epoch;
  train["split"] = "train";
  train["pred"] = e.train_loss.pred;
  train["jsd"] = e.train_loss.jsd;
  train["orth_ehr"] = e.train_loss.orth_ehr;
  train["orth_cxr"] = e.train_loss.orth_cxr;
  train["attn"] = e.train_loss.attn;
  train["aux"] = e.train_loss.aux;
  train["total"] = e.train_loss.total;
  out << train.dump() << "\n";
  if (has_val) {
    nlohmann::json val;
    val["epoch"] = e.epoch;
    val["split"] = "val";
    val["macro_prauc"] = e.val_prauc;
    val["improved"] = e.improved;
    out << val.dump() << "\n";
  }
}

FitResult fit(Model& model, const Dataset& ds, const std::vector<std::size_t>& train_idx,
              const std::vector<std::size_t>& val_idx, const TrainConfig& cfg,
              const std::string& log_path) {
  cfg.validate();
  if (train_idx.empty()) throw InvalidInputError("fit: empty training set");
  const bool has_val = !val_idx.empty();

  model.fit_scaler(ds, train_idx);
  AdamOptimizer opt(model.params(), cfg.lr);
  Rng shuffle_rng = Rng::derive(cfg.seed, 0x10);
  Rng dropout_rng = Rng::derive(cfg.seed, 0x20);
  LossWeights w = cfg.weights();

  std::ofstream log_out;
  if (!log_path.empty()) {
    log_out.open(log_path, std::ios::binary);
    if (!log_out) throw IoError("cannot open training log for writing: " + log_path);
  }

  FitResult result;
  result.best_val_prauc = std::numeric_limits<double>::quiet_NaN();
  std::map<std::string, Tensor> best_params = model.params().snapshot();
  double best = -std::numeric_limits<double>::infinity();
  std::size_t since_improved = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    shuffle_rng.shuffle(order);

    LossBreakdown epoch_sum;
    std::size_t n_seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<SampleRecord> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) batch.push_back(ds.records[order[k]]);
      batch = apply_modality_dropout(std::move(batch), cfg.modality_dropout, dropout_rng);

      model.params().zero_grads();
      double inv_b = 1.0 / static_cast<double>(batch.size());
      for (const auto& rec : batch) {
        Tape tape;
        SampleGraph sg = model.forward_loss(tape, rec, w);
        if (const char* term = sg.parts.first_non_finite())
          throw TrainingDivergenceError(std::string("training diverged: non-finite '") +
                                        term + "' at epoch " + std::to_string(epoch) +
                                        ", record " + rec.id);
        tape.backward(sg.loss, inv_b);
        epoch_sum.add(sg.parts);
        ++n_seen;
      }
      clip_global_norm(model.params(), cfg.clip_norm);
      opt.step();
    }

    EpochLog el;
    el.epoch = epoch;
    el.train_loss = epoch_sum;
    el.train_loss.scale(1.0 / static_cast<double>(n_seen));
    el.val_prauc = std::numeric_limits<double>::quiet_NaN();

    if (has_val) {
      std::vector<std::vector<double>> scores;
      std::vector<std::vector<double>> labels;
      scores.reserve(val_idx.size());
      for (std::size_t i : val_idx) {
        scores.push_back(model.predict(ds.records[i]));
        labels.push_back(ds.records[i].labels);
      }
      el.val_prauc = macro_prauc(scores, labels).value;
      if (el.val_prauc > best) {
        best = el.val_prauc;
        best_params = model.params().snapshot();
        result.best_epoch = epoch;
        result.best_val_prauc = el.val_prauc;
        since_improved = 0;
        el.improved = true;
      } else {
        ++since_improved;
      }
    }

    result.log.push_back(el);
    result.epochs_run = epoch;
    if (log_out.is_open()) write_epoch_log_line(log_out, el, has_val);

    if (has_val && cfg.patience > 0 && since_improved >= cfg.patience) break;
  }

  if (has_val) model.params().load(best_params);
  return result;
}

}  // namespace drfuse
