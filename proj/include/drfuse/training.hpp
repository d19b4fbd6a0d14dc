// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "drfuse/model.hpp"

namespace drfuse {

struct TrainConfig {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 0.5;
  double epsilon = 0.1;   // ranking margin
  double lr = 1e-4;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;  // 0 disables early stopping
  double modality_dropout = 0.30;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;

  LossWeights weights() const { return {lambda1, lambda2, lambda3, epsilon}; }
  void validate() const;
};

std::string serialize_train_config(const TrainConfig& cfg);
TrainConfig parse_train_config_json(const std::string& json_text);

// Each CXR-bearing sample independently loses its image with the given
// probability; labels and EHR are untouched.
std::vector<SampleRecord> apply_modality_dropout(std::vector<SampleRecord> batch,
                                                 double rate, Rng& rng);

// Forward a batch and average every loss component over its samples.
// Throws TrainingDivergenceError naming the first non-finite term.
LossBreakdown compute_loss(Model& model, const std::vector<SampleRecord>& batch,
                           const TrainConfig& cfg);

class AdamOptimizer {
 public:
  AdamOptimizer(ParamStore& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step();

 private:
  ParamStore* params_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

// Scales all trainable gradients so their global L2 norm is at most max_norm;
// returns the pre-clip norm.
double clip_global_norm(ParamStore& params, double max_norm);

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown train_loss;  // means over training samples
  double val_prauc = 0.0;    // NaN when there is no validation split
  bool improved = false;
};

struct FitResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;   // 1-based; 0 when no validation split
  double best_val_prauc = 0.0;  // NaN when no validation split
  std::size_t epochs_run = 0;
};

// Gradient descent over the training split with per-epoch validation macro
// PRAUC, early stopping, and best-checkpoint restoration. When log_path is
// non-empty, one structured record per epoch and split is appended there.
FitResult fit(Model& model, const Dataset& ds, const std::vector<std::size_t>& train_idx,
              const std::vector<std::size_t>& val_idx, const TrainConfig& cfg,
              const std::string& log_path = "");

void write_epoch_log_line(std::ostream& out, const EpochLog& e, bool has_val);

}  // namespace drfuse
