// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "drfuse/tensor.hpp"

namespace drfuse::kernels {

// Probability floor: probabilities are clamped to [kProbClamp, 1 - kProbClamp]
// before any logarithm.
inline constexpr double kProbClamp = 1e-7;

double clamp_prob(double p);

// Elementwise standard logistic, clamped to [1e-7, 1-1e-7].
// Throws InvalidInputError on non-finite input.
std::vector<double> sigmoid(std::span<const double> h);
double sigmoid_scalar(double h);

// Elementwise ln(p / (1-p)). Input must lie in [0, 1]; values are clamped to
// the probability floor first, making this the inverse of sigmoid() up to
// clamping. Throws InvalidInputError for entries outside [0, 1].
std::vector<double> logit(std::span<const double> p);
double logit_scalar(double p);

// Elementwise logit pooling: sigma^-1((sigma(h1)+sigma(h2))/2), evaluated in a
// log-sum-exp-stable form. Symmetric in its arguments bit-for-bit.
std::vector<double> logit_pool(std::span<const double> h1, std::span<const double> h2);
double logit_pool_scalar(double h1, double h2);
// d/dh of the pooled value for one coordinate: {d/dh1, d/dh2}.
std::pair<double, double> logit_pool_grad_scalar(double h1, double h2);

// Jensen-Shannon divergence between the Bernoulli distributions induced by two
// logit vectors, averaged over dimensions. Probabilities are clamped at 1e-7
// before the logs, so the result is exactly 0 whenever the clamped
// probabilities agree. Range [0, ln 2].
double jsd_from_logits(std::span<const double> h1, std::span<const double> h2);
// Gradients w.r.t. h1 and h2.
std::pair<std::vector<double>, std::vector<double>> jsd_from_logits_grad(
    std::span<const double> h1, std::span<const double> h2);

// |<h1,h2>| / (||h1|| * ||h2|| + 1e-12). The epsilon keeps a zero-norm input
// from dividing by zero.
double orthogonality_penalty(std::span<const double> h1, std::span<const double> h2);
std::pair<std::vector<double>, std::vector<double>> orthogonality_penalty_grad(
    std::span<const double> h1, std::span<const double> h2);

// softmax((scores + mask) / sqrt(d)) over a 3-entry stack. Mask entries are 0
// (visible) or -inf (masked); masked outputs are exactly 0. Throws
// InvalidMaskError when every entry is masked.
std::vector<double> masked_scaled_attention(std::span<const double> scores,
                                            std::span<const double> mask, std::size_t d);
// Pullback: given dL/dalpha, returns dL/dscores.
std::vector<double> masked_scaled_attention_vjp(std::span<const double> alpha,
                                                std::span<const double> mask, std::size_t d,
                                                std::span<const double> grad_alpha);

// Margin ranking loss over attention weights (|C| x 3) against per-class
// auxiliary losses (|C| x 3, treated as constants):
//   1/(2|C|) * sum_c sum_i sum_{j != i} [l_ci < l_cj] * max(0, a_cj - a_ci + eps)
// Pairs whose indicator is 0 contribute nothing; ties activate no pair.
double margin_rank_attn_loss(const Tensor& alpha, const Tensor& aux_losses, double epsilon);
// Gradient w.r.t. alpha (aux_losses carry no gradient).
Tensor margin_rank_attn_loss_grad(const Tensor& alpha, const Tensor& aux_losses,
                                  double epsilon);

// Per-class binary cross-entropy, lower is better:
//   l_c = -[y_c ln yhat_c + (1-y_c) ln(1-yhat_c)]
// with yhat clamped to the probability floor.
std::vector<double> binary_cross_entropy(std::span<const double> y,
                                         std::span<const double> y_hat);
// d l_c / d yhat_c; exactly 0 where the clamp is active.
std::vector<double> binary_cross_entropy_grad(std::span<const double> y,
                                              std::span<const double> y_hat);

// ln(1 + e^x) without overflow.
double softplus(double x);

}  // namespace drfuse::kernels
