// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "drfuse/graph.hpp"
#include "drfuse/ops.hpp"

namespace drfuse {

enum class PoolingMode { kLogitPool, kMeanPool };

// Graph handles for the four disentangled representations of one sample.
// has_cxr is true iff both CXR vars are non-null.
struct BundleVars {
  Var h_shared_ehr = nullptr;
  Var h_distinct_ehr = nullptr;
  Var h_shared_cxr = nullptr;
  Var h_distinct_cxr = nullptr;
  bool has_cxr = false;
};

struct FusionConfig {
  std::size_t d_model = 64;
  std::size_t n_classes = 1;
  PoolingMode pooling = PoolingMode::kLogitPool;
};

// Graph handles produced by the fusion pipeline.
struct FusionGraph {
  Var h_shared = nullptr;            // 1 x d pooled shared representation
  Var stacked = nullptr;             // 3 x d row stack [dist_ehr; shared; dist_cxr]
  std::vector<Var> alpha;            // per class, 1 x 3
  Var alpha_mat = nullptr;           // |C| x 3
  std::vector<Var> h_tilde;          // per class, 1 x d
  Var h_tilde_mat = nullptr;         // |C| x d
  Var y_hat = nullptr;               // 1 x |C| probabilities
  std::array<Var, 3> y_aux{nullptr, nullptr, nullptr};  // each 1 x |C|; [2] null if absent
  std::vector<double> mask;          // additive mask used for the attention
};

// Plain-value view of a fused forward pass.
struct FusionOutput {
  std::vector<double> h_shared;  // d
  Tensor stacked;                // 3 x d
  Tensor alpha;                  // |C| x 3; third column exactly 0 without CXR
  Tensor h_tilde;                // |C| x d
  std::vector<double> y_hat;     // |C|
  Tensor y_aux;                  // 3 x |C|; third row is 0.5 placeholders without CXR
  bool has_cxr = false;
};

// Per-target scaled attention over the three-representation stack, with the
// third row masked out whenever CXR is missing, plus the auxiliary heads.
class FusionHead {
 public:
  FusionHead(const FusionConfig& cfg, ParamStore& store, Rng& rng,
             const std::string& prefix = "fusion");

  // LogitPool(h_shared_ehr, h_shared_cxr) when CXR is present, the EHR shared
  // representation unchanged otherwise. Mean pooling under the ablation mode.
  Var pool_shared(Tape& t, const BundleVars& b) const;

  // Mean of the available representations, then the W_Q projection.
  Var build_query(Tape& t, const BundleVars& b, Var h_shared) const;

  // Attention over an explicit 3 x d stack. Split out so tests can verify the
  // output never depends on the contents of the masked row.
  void attend(Tape& t, FusionGraph& g, Var query) const;

  std::array<Var, 3> aux_predict(Tape& t, const BundleVars& b, Var h_shared) const;

  // Full pipeline: pool, query, stack (zero row when CXR absent), attention,
  // prediction heads, auxiliary heads.
  FusionGraph fuse(Tape& t, const BundleVars& b) const;

  static FusionOutput extract(const FusionGraph& g);

  static std::vector<double> mask_for(bool has_cxr);

  const FusionConfig& config() const { return cfg_; }

 private:
  FusionConfig cfg_;
  Parameter* w_q_;
  std::vector<Parameter*> w_k_;  // one d x d projection per prediction target
  Parameter* w_v_;
  Parameter *psi_w_, *psi_b_;    // per-class linear heads, |C| x d and 1 x |C|
  struct AuxHead {
    Parameter *w1, *b1, *w2, *b2;
  };
  std::array<AuxHead, 3> aux_;
};

}  // namespace drfuse
