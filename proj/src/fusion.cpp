// SPDX-License-Identifier: Apache-2.0
#include "drfuse/fusion.hpp"

#include <cmath>
#include <limits>

#include "drfuse/errors.hpp"

namespace drfuse {

FusionHead::FusionHead(const FusionConfig& cfg, ParamStore& store, Rng& rng,
                       const std::string& prefix)
    : cfg_(cfg) {
  if (cfg.n_classes < 1) throw InvalidConfigError("fusion: n_classes must be >= 1");
  std::size_t d = cfg.d_model;
  w_q_ = &store.create_xavier(prefix + ".wq", d, d, rng);
  w_k_.reserve(cfg.n_classes);
  for (std::size_t c = 0; c < cfg.n_classes; ++c)
    w_k_.push_back(&store.create_xavier(prefix + ".wk." + std::to_string(c), d, d, rng));
  w_v_ = &store.create_xavier(prefix + ".wv", d, d, rng);
  psi_w_ = &store.create_xavier(prefix + ".psi.w", cfg.n_classes, d, rng);
  psi_b_ = &store.create(prefix + ".psi.b", {1, cfg.n_classes});
  std::size_t hidden = std::max<std::size_t>(1, d / 2);
  for (std::size_t i = 0; i < 3; ++i) {
    std::string p = prefix + ".aux" + std::to_string(i + 1);
    aux_[i].w1 = &store.create_xavier(p + ".w1", d, hidden, rng);
    aux_[i].b1 = &store.create(p + ".b1", {1, hidden});
    aux_[i].w2 = &store.create_xavier(p + ".w2", hidden, cfg.n_classes, rng);
    aux_[i].b2 = &store.create(p + ".b2", {1, cfg.n_classes});
  }
}

std::vector<double> FusionHead::mask_for(bool has_cxr) {
  double inf = std::numeric_limits<double>::infinity();
  return {0.0, 0.0, has_cxr ? 0.0 : -inf};
}

Var FusionHead::pool_shared(Tape& t, const BundleVars& b) const {
  if (!b.has_cxr) return b.h_shared_ehr;
  if (cfg_.pooling == PoolingMode::kMeanPool)
    return ops::scale(t, ops::add(t, b.h_shared_ehr, b.h_shared_cxr), 0.5);
  return ops::logit_pool(t, b.h_shared_ehr, b.h_shared_cxr);
}

Var FusionHead::build_query(Tape& t, const BundleVars& b, Var h_shared) const {
  Var sum = ops::add(t, b.h_distinct_ehr, h_shared);
  double inv = 0.5;
  if (b.has_cxr) {
    sum = ops::add(t, sum, b.h_distinct_cxr);
    inv = 1.0 / 3.0;
  }
  return ops::matmul(t, ops::scale(t, sum, inv), t.leaf(*w_q_));
}

void FusionHead::attend(Tape& t, FusionGraph& g, Var query) const {
  Var values = ops::matmul(t, g.stacked, t.leaf(*w_v_));
  g.alpha.clear();
  g.h_tilde.clear();
  for (std::size_t c = 0; c < cfg_.n_classes; ++c) {
    Var keys = ops::matmul(t, g.stacked, t.leaf(*w_k_[c]));
    Var scores = ops::matmul_nt(t, query, keys);
    Var alpha_c = ops::masked_attention(t, scores, g.mask, cfg_.d_model);
    g.alpha.push_back(alpha_c);
    g.h_tilde.push_back(ops::attend_rows(t, alpha_c, values, g.mask));
  }
  g.alpha_mat = ops::stack_rows(t, g.alpha);
  g.h_tilde_mat = ops::stack_rows(t, g.h_tilde);
  Var logits = ops::add(t, ops::rows_dot(t, g.h_tilde_mat, t.leaf(*psi_w_)), t.leaf(*psi_b_));
  g.y_hat = ops::sigmoid(t, logits);
}

std::array<Var, 3> FusionHead::aux_predict(Tape& t, const BundleVars& b, Var h_shared) const {
  auto head = [&](const AuxHead& h, Var in) -> Var {
    Var hid = ops::relu(t, ops::add_rowvec(t, ops::matmul(t, in, t.leaf(*h.w1)), t.leaf(*h.b1)));
    return ops::sigmoid(t, ops::add_rowvec(t, ops::matmul(t, hid, t.leaf(*h.w2)), t.leaf(*h.b2)));
  };
  std::array<Var, 3> out{nullptr, nullptr, nullptr};
  out[0] = head(aux_[0], b.h_distinct_ehr);
  out[1] = head(aux_[1], h_shared);
  if (b.has_cxr) out[2] = head(aux_[2], b.h_distinct_cxr);
  return out;
}

FusionGraph FusionHead::fuse(Tape& t, const BundleVars& b) const {
  std::size_t d = cfg_.d_model;
  FusionGraph g;
  g.mask = mask_for(b.has_cxr);
  g.h_shared = pool_shared(t, b);
  Var query = build_query(t, b, g.h_shared);
  // The zero fill for the missing row is immaterial: the -inf mask keeps it
  // out of every downstream value.
  Var third = b.has_cxr ? b.h_distinct_cxr : t.constant(Tensor({1, d}));
  g.stacked = ops::stack_rows(t, {b.h_distinct_ehr, g.h_shared, third});
  attend(t, g, query);
  g.y_aux = aux_predict(t, b, g.h_shared);
  return g;
}

FusionOutput FusionHead::extract(const FusionGraph& g) {
  FusionOutput out;
  if (g.h_shared) out.h_shared = g.h_shared->value.to_vector();
  if (g.stacked) out.stacked = g.stacked->value;
  out.alpha = g.alpha_mat->value;
  out.h_tilde = g.h_tilde_mat->value;
  out.y_hat = g.y_hat->value.to_vector();
  std::size_t n_classes = out.y_hat.size();
  out.y_aux = Tensor({3, n_classes});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < n_classes; ++c)
      out.y_aux.at(i, c) = g.y_aux[i] ? g.y_aux[i]->value[c] : 0.5;
  out.has_cxr = g.y_aux[2] != nullptr;
  return out;
}

}  // namespace drfuse
