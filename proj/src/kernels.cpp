// SPDX-License-Identifier: Apache-2.0
#include "drfuse/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "drfuse/errors.hpp"

namespace drfuse::kernels {

namespace {

double sigmoid_raw(double h) {
  return h >= 0.0 ? 1.0 / (1.0 + std::exp(-h)) : std::exp(h) / (1.0 + std::exp(h));
}

void require_finite(std::span<const double> v, const char* who) {
  for (double x : v)
    if (!std::isfinite(x)) throw InvalidInputError(std::string(who) + ": non-finite input");
}

void require_same_length(std::span<const double> a, std::span<const double> b,
                         const char* who) {
  if (a.size() != b.size()) throw ShapeError(std::string(who) + ": length mismatch");
}

bool is_masked(double m) { return std::isinf(m) && m < 0.0; }

}  // namespace

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid_scalar(double h) { return clamp_prob(sigmoid_raw(h)); }

std::vector<double> sigmoid(std::span<const double> h) {
  require_finite(h, "sigmoid");
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = sigmoid_scalar(h[i]);
  return out;
}

double logit_scalar(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidInputError("logit: input outside [0, 1]");
  p = clamp_prob(p);
  return std::log(p / (1.0 - p));
}

std::vector<double> logit(std::span<const double> p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = logit_scalar(p[i]);
  return out;
}

double logit_pool_scalar(double h1, double h2) {
  // log((2 e^{h1+h2} + e^{h1} + e^{h2}) / (2 + e^{h1} + e^{h2})), each side via
  // log-sum-exp. The pairwise sums commute, so the result is symmetric in
  // (h1, h2) bit-for-bit.
  double s = h1 + h2;
  double mn = std::max(s, std::max(h1, h2));
  double num = 2.0 * std::exp(s - mn) + (std::exp(h1 - mn) + std::exp(h2 - mn));
  double md = std::max(0.0, std::max(h1, h2));
  double den = 2.0 * std::exp(-md) + (std::exp(h1 - md) + std::exp(h2 - md));
  return (mn + std::log(num)) - (md + std::log(den));
}

std::vector<double> logit_pool(std::span<const double> h1, std::span<const double> h2) {
  require_same_length(h1, h2, "logit_pool");
  require_finite(h1, "logit_pool");
  require_finite(h2, "logit_pool");
  std::vector<double> out(h1.size());
  for (std::size_t i = 0; i < h1.size(); ++i) out[i] = logit_pool_scalar(h1[i], h2[i]);
  return out;
}

std::pair<double, double> logit_pool_grad_scalar(double h1, double h2) {
  // d sigma^-1(m) / dh_k = sigma'(h_k) / (2 m (1-m)); both m and 1-m are
  // assembled from stable sigmoids of +/-h.
  double p1 = 1.0 / (1.0 + std::exp(-h1));
  double p2 = 1.0 / (1.0 + std::exp(-h2));
  double c1 = 1.0 / (1.0 + std::exp(h1));
  double c2 = 1.0 / (1.0 + std::exp(h2));
  double m = 0.5 * (p1 + p2);
  double mc = 0.5 * (c1 + c2);
  double denom = 2.0 * m * mc;
  if (denom < 1e-300) denom = 1e-300;
  return {p1 * c1 / denom, p2 * c2 / denom};
}

double jsd_from_logits(std::span<const double> h1, std::span<const double> h2) {
  require_same_length(h1, h2, "jsd_from_logits");
  require_finite(h1, "jsd_from_logits");
  require_finite(h2, "jsd_from_logits");
  if (h1.empty()) throw ShapeError("jsd_from_logits: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < h1.size(); ++i) {
    double p = sigmoid_scalar(h1[i]);
    double q = sigmoid_scalar(h2[i]);
    double m = 0.5 * (p + q);
    double pc = 1.0 - p, qc = 1.0 - q, mc = 1.0 - m;
    double kl_pm = p * std::log(p / m) + pc * std::log(pc / mc);
    double kl_qm = q * std::log(q / m) + qc * std::log(qc / mc);
    total += 0.5 * (kl_pm + kl_qm);
  }
  return total / static_cast<double>(h1.size());
}

std::pair<std::vector<double>, std::vector<double>> jsd_from_logits_grad(
    std::span<const double> h1, std::span<const double> h2) {
  require_same_length(h1, h2, "jsd_from_logits_grad");
  std::size_t d = h1.size();
  std::vector<double> g1(d), g2(d);
  double inv_d = 1.0 / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i) {
    double raw_p = sigmoid_raw(h1[i]);
    double raw_q = sigmoid_raw(h2[i]);
    double p = clamp_prob(raw_p);
    double q = clamp_prob(raw_q);
    double m = 0.5 * (p + q);
    double lm = std::log(m / (1.0 - m));
    // d JSD_dim / dp = (logit(p) - logit(m)) / 2; the clamp zeroes the
    // gradient where it saturates.
    double gp = (raw_p == p) ? 0.5 * (std::log(p / (1.0 - p)) - lm) * p * (1.0 - p) : 0.0;
    double gq = (raw_q == q) ? 0.5 * (std::log(q / (1.0 - q)) - lm) * q * (1.0 - q) : 0.0;
    g1[i] = gp * inv_d;
    g2[i] = gq * inv_d;
  }
  return {std::move(g1), std::move(g2)};
}

double orthogonality_penalty(std::span<const double> h1, std::span<const double> h2) {
  require_same_length(h1, h2, "orthogonality_penalty");
  require_finite(h1, "orthogonality_penalty");
  require_finite(h2, "orthogonality_penalty");
  double s = 0.0, na2 = 0.0, nb2 = 0.0;
  for (std::size_t i = 0; i < h1.size(); ++i) {
    s += h1[i] * h2[i];
    na2 += h1[i] * h1[i];
    nb2 += h2[i] * h2[i];
  }
  return std::abs(s) / (std::sqrt(na2) * std::sqrt(nb2) + 1e-12);
}

std::pair<std::vector<double>, std::vector<double>> orthogonality_penalty_grad(
    std::span<const double> h1, std::span<const double> h2) {
  require_same_length(h1, h2, "orthogonality_penalty_grad");
  std::size_t d = h1.size();
  double s = 0.0, na2 = 0.0, nb2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    s += h1[i] * h2[i];
    na2 += h1[i] * h1[i];
    nb2 += h2[i] * h2[i];
  }
  double na = std::sqrt(na2), nb = std::sqrt(nb2);
  double den = na * nb + 1e-12;
  double sg = (s > 0.0) ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
  double f = std::abs(s) / den;
  std::vector<double> g1(d), g2(d);
  double ca = (na > 1e-300) ? f * nb / (den * na) : 0.0;
  double cb = (nb > 1e-300) ? f * na / (den * nb) : 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    g1[i] = sg * h2[i] / den - ca * h1[i];
    g2[i] = sg * h1[i] / den - cb * h2[i];
  }
  return {std::move(g1), std::move(g2)};
}

std::vector<double> masked_scaled_attention(std::span<const double> scores,
                                            std::span<const double> mask, std::size_t d) {
  require_same_length(scores, mask, "masked_scaled_attention");
  require_finite(scores, "masked_scaled_attention");
  if (d == 0) throw InvalidConfigError("masked_scaled_attention: d must be positive");
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  double mx = -std::numeric_limits<double>::infinity();
  bool any_visible = false;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (mask[i] == 0.0) {
      any_visible = true;
      mx = std::max(mx, scores[i] * inv_sqrt_d);
    } else if (!is_masked(mask[i])) {
      throw InvalidMaskError("masked_scaled_attention: mask entries must be 0 or -inf");
    }
  }
  if (!any_visible) throw InvalidMaskError("masked_scaled_attention: all entries masked");
  std::vector<double> out(scores.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (mask[i] == 0.0) {
      out[i] = std::exp(scores[i] * inv_sqrt_d - mx);
      z += out[i];
    }
  }
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (mask[i] == 0.0) out[i] /= z;
  return out;
}

std::vector<double> masked_scaled_attention_vjp(std::span<const double> alpha,
                                                std::span<const double> mask, std::size_t d,
                                                std::span<const double> grad_alpha) {
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  double inner = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (mask[i] == 0.0) inner += alpha[i] * grad_alpha[i];
  std::vector<double> gs(alpha.size(), 0.0);
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (mask[i] == 0.0) gs[i] = alpha[i] * (grad_alpha[i] - inner) * inv_sqrt_d;
  return gs;
}

double margin_rank_attn_loss(const Tensor& alpha, const Tensor& aux_losses, double epsilon) {
  if (epsilon < 0.0) throw InvalidConfigError("margin_rank_attn_loss: epsilon must be >= 0");
  if (alpha.rank() != 2 || !alpha.same_shape(aux_losses))
    throw ShapeError("margin_rank_attn_loss: alpha/aux_losses shape mismatch");
  std::size_t n_classes = alpha.rows(), n_reps = alpha.cols();
  double total = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < n_reps; ++i) {
      for (std::size_t j = 0; j < n_reps; ++j) {
        if (j == i) continue;
        // Strict inequality: ties establish no ordering and impose no penalty.
        if (aux_losses.at(c, i) < aux_losses.at(c, j))
          total += std::max(0.0, alpha.at(c, j) - alpha.at(c, i) + epsilon);
      }
    }
  }
  return total / (2.0 * static_cast<double>(n_classes));
}

Tensor margin_rank_attn_loss_grad(const Tensor& alpha, const Tensor& aux_losses,
                                  double epsilon) {
  if (epsilon < 0.0) throw InvalidConfigError("margin_rank_attn_loss: epsilon must be >= 0");
  if (alpha.rank() != 2 || !alpha.same_shape(aux_losses))
    throw ShapeError("margin_rank_attn_loss: alpha/aux_losses shape mismatch");
  std::size_t n_classes = alpha.rows(), n_reps = alpha.cols();
  Tensor g(alpha.shape());
  double w = 1.0 / (2.0 * static_cast<double>(n_classes));
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < n_reps; ++i) {
      for (std::size_t j = 0; j < n_reps; ++j) {
        if (j == i) continue;
        if (aux_losses.at(c, i) < aux_losses.at(c, j) &&
            alpha.at(c, j) - alpha.at(c, i) + epsilon > 0.0) {
          g.at(c, j) += w;
          g.at(c, i) -= w;
        }
      }
    }
  }
  return g;
}

std::vector<double> binary_cross_entropy(std::span<const double> y,
                                         std::span<const double> y_hat) {
  require_same_length(y, y_hat, "binary_cross_entropy");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double p = clamp_prob(y_hat[i]);
    out[i] = -(y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p));
  }
  return out;
}

std::vector<double> binary_cross_entropy_grad(std::span<const double> y,
                                              std::span<const double> y_hat) {
  require_same_length(y, y_hat, "binary_cross_entropy_grad");
  std::vector<double> g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double p = clamp_prob(y_hat[i]);
    g[i] = (p == y_hat[i]) ? (-y[i] / p + (1.0 - y[i]) / (1.0 - p)) : 0.0;
  }
  return g;
}

}  // namespace drfuse::kernels
