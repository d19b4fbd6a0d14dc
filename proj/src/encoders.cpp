// SPDX-License-Identifier: Apache-2.0
#include "drfuse/encoders.hpp"

#include <cmath>

#include "drfuse/errors.hpp"

namespace drfuse {

Tensor positional_encoding(std::size_t seq_len, std::size_t d_model) {
  if (seq_len < 1) throw InvalidInputError("positional_encoding: seq_len must be >= 1");
  if (d_model % 2 != 0) throw InvalidConfigError("positional_encoding: d_model must be even");
  Tensor table({seq_len, d_model});
  for (std::size_t t = 0; t < seq_len; ++t) {
    for (std::size_t k = 0; 2 * k < d_model; ++k) {
      double freq = std::pow(10000.0, -static_cast<double>(2 * k) /
                                          static_cast<double>(d_model));
      double angle = static_cast<double>(t) * freq;
      table.at(t, 2 * k) = std::sin(angle);
      table.at(t, 2 * k + 1) = std::cos(angle);
    }
  }
  return table;
}

TransformerLayer::TransformerLayer(const std::string& prefix, std::size_t d_model,
                                   std::size_t n_heads, std::size_t ff_dim,
                                   ParamStore& store, Rng& rng)
    : d_(d_model), heads_(n_heads), head_dim_(d_model / n_heads) {
  if (d_model % n_heads != 0)
    throw InvalidConfigError("transformer: n_heads must divide d_model");
  wq_ = &store.create_xavier(prefix + ".wq", d_, d_, rng);
  bq_ = &store.create(prefix + ".bq", {1, d_});
  wk_ = &store.create_xavier(prefix + ".wk", d_, d_, rng);
  bk_ = &store.create(prefix + ".bk", {1, d_});
  wv_ = &store.create_xavier(prefix + ".wv", d_, d_, rng);
  bv_ = &store.create(prefix + ".bv", {1, d_});
  wo_ = &store.create_xavier(prefix + ".wo", d_, d_, rng);
  bo_ = &store.create(prefix + ".bo", {1, d_});
  ln1_g_ = &store.create_constant(prefix + ".ln1.gamma", {1, d_}, 1.0);
  ln1_b_ = &store.create(prefix + ".ln1.beta", {1, d_});
  ln2_g_ = &store.create_constant(prefix + ".ln2.gamma", {1, d_}, 1.0);
  ln2_b_ = &store.create(prefix + ".ln2.beta", {1, d_});
  ff1_w_ = &store.create_xavier(prefix + ".ff1.w", d_, ff_dim, rng);
  ff1_b_ = &store.create(prefix + ".ff1.b", {1, ff_dim});
  ff2_w_ = &store.create_xavier(prefix + ".ff2.w", ff_dim, d_, rng);
  ff2_b_ = &store.create(prefix + ".ff2.b", {1, d_});
}

std::vector<Parameter*> TransformerLayer::parameters() const {
  return {wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_, ln1_g_, ln1_b_, ln2_g_, ln2_b_,
          ff1_w_, ff1_b_, ff2_w_, ff2_b_};
}

Var TransformerLayer::apply(Tape& t, Var x) const {
  Var q = ops::add_rowvec(t, ops::matmul(t, x, t.leaf(*wq_)), t.leaf(*bq_));
  Var k = ops::add_rowvec(t, ops::matmul(t, x, t.leaf(*wk_)), t.leaf(*bk_));
  Var v = ops::add_rowvec(t, ops::matmul(t, x, t.leaf(*wv_)), t.leaf(*bv_));

  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim_));
  std::vector<Var> ctx;
  ctx.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    std::size_t c0 = h * head_dim_, c1 = (h + 1) * head_dim_;
    Var qh = ops::slice_cols(t, q, c0, c1);
    Var kh = ops::slice_cols(t, k, c0, c1);
    Var vh = ops::slice_cols(t, v, c0, c1);
    Var scores = ops::scale(t, ops::matmul_nt(t, qh, kh), inv_sqrt);
    Var attn = ops::softmax_rows(t, scores);
    ctx.push_back(ops::matmul(t, attn, vh));
  }
  Var merged = heads_ == 1 ? ctx[0] : ops::concat_cols(t, ctx);
  Var attn_out = ops::add_rowvec(t, ops::matmul(t, merged, t.leaf(*wo_)), t.leaf(*bo_));
  Var x1 = ops::layer_norm(t, ops::add(t, x, attn_out), t.leaf(*ln1_g_), t.leaf(*ln1_b_));

  Var ff = ops::relu(t, ops::add_rowvec(t, ops::matmul(t, x1, t.leaf(*ff1_w_)), t.leaf(*ff1_b_)));
  Var ff_out = ops::add_rowvec(t, ops::matmul(t, ff, t.leaf(*ff2_w_)), t.leaf(*ff2_b_));
  return ops::layer_norm(t, ops::add(t, x1, ff_out), t.leaf(*ln2_g_), t.leaf(*ln2_b_));
}

EhrEncoder::EhrEncoder(const EhrEncoderConfig& cfg, ParamStore& store, Rng& rng,
                       const std::string& prefix)
    : cfg_(cfg) {
  emb_w_ = &store.create_xavier(prefix + ".embed.w", cfg.n_features, cfg.d_model, rng);
  emb_b_ = &store.create(prefix + ".embed.b", {1, cfg.d_model});
  layer1_ = std::make_unique<TransformerLayer>(prefix + ".layer1", cfg.d_model, cfg.n_heads,
                                               cfg.ff_dim, store, rng);
  shared_l2_ = std::make_unique<TransformerLayer>(prefix + ".shared_l2", cfg.d_model,
                                                  cfg.n_heads, cfg.ff_dim, store, rng);
  if (cfg.two_branch)
    distinct_l2_ = std::make_unique<TransformerLayer>(prefix + ".distinct_l2", cfg.d_model,
                                                      cfg.n_heads, cfg.ff_dim, store, rng);
}

Var EhrEncoder::embed(Tape& t, const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != cfg_.n_features)
    throw ShapeError("encode_ehr: expected T x " + std::to_string(cfg_.n_features));
  if (x.rows() == 0) throw InvalidInputError("encode_ehr: empty sequence (T = 0)");
  if (!x.all_finite()) throw InvalidInputError("encode_ehr: non-finite input");

  const Tensor* input = &x;
  Tensor truncated;
  if (x.rows() > cfg_.max_seq_len) {
    // keep the first max_seq_len steps
    truncated = Tensor({cfg_.max_seq_len, x.cols()});
    for (std::size_t i = 0; i < cfg_.max_seq_len; ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) truncated.at(i, j) = x.at(i, j);
    input = &truncated;
  }
  Var xv = t.constant(*input);
  Var emb = ops::add_rowvec(t, ops::matmul(t, xv, t.leaf(*emb_w_)), t.leaf(*emb_b_));
  if (cfg_.use_positional)
    emb = ops::add(t, emb, t.constant(positional_encoding(input->rows(), cfg_.d_model)));
  return emb;
}

std::pair<Var, Var> EhrEncoder::encode(Tape& t, const Tensor& x) const {
  if (!cfg_.two_branch) throw InvalidConfigError("encode: encoder built without branches");
  Var low = layer1_->apply(t, embed(t, x));
  Var h_shared = ops::mean_rows(t, shared_l2_->apply(t, low));
  Var h_distinct = ops::mean_rows(t, distinct_l2_->apply(t, low));
  return {h_shared, h_distinct};
}

Var EhrEncoder::encode_single(Tape& t, const Tensor& x) const {
  Var low = layer1_->apply(t, embed(t, x));
  return ops::mean_rows(t, shared_l2_->apply(t, low));
}

ConvImageEncoder::ConvImageEncoder(const ImageEncoderConfig& cfg, ParamStore& store,
                                   Rng& rng, const std::string& prefix)
    : cfg_(cfg) {
  auto he_std = [](std::size_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); };
  std::size_t c0 = cfg.channels, c1 = cfg.conv_channels[0], c2 = cfg.conv_channels[1],
              c3 = cfg.conv_channels[2];
  w1_ = &store.create_gaussian(prefix + ".conv1.w", {c1, c0, 3, 3}, he_std(c0 * 9), rng);
  b1_ = &store.create(prefix + ".conv1.b", {c1});
  w2_ = &store.create_gaussian(prefix + ".conv2.w", {c2, c1, 3, 3}, he_std(c1 * 9), rng);
  b2_ = &store.create(prefix + ".conv2.b", {c2});
  w3_ = &store.create_gaussian(prefix + ".conv3.w", {c3, c2, 3, 3}, he_std(c2 * 9), rng);
  b3_ = &store.create(prefix + ".conv3.b", {c3});
  head_sh_w_ = &store.create_xavier(prefix + ".head_shared.w", c3, cfg.d_model, rng);
  head_sh_b_ = &store.create(prefix + ".head_shared.b", {1, cfg.d_model});
  if (cfg.two_heads) {
    head_di_w_ = &store.create_xavier(prefix + ".head_distinct.w", c3, cfg.d_model, rng);
    head_di_b_ = &store.create(prefix + ".head_distinct.b", {1, cfg.d_model});
  } else {
    head_di_w_ = nullptr;
    head_di_b_ = nullptr;
  }
}

Var ConvImageEncoder::encode_trunk(Tape& t, const Tensor& image) const {
  const Tensor* img = &image;
  Tensor reshaped;
  if (image.rank() == 2) {
    reshaped = Tensor({1, image.shape()[0], image.shape()[1]}, image.to_vector());
    img = &reshaped;
  }
  if (img->rank() != 3 || img->shape()[0] != cfg_.channels ||
      img->shape()[1] != cfg_.image_size || img->shape()[2] != cfg_.image_size)
    throw InvalidInputError("encode_image: malformed grid");
  if (!img->all_finite()) throw InvalidInputError("encode_image: non-finite input");

  Var x = t.constant(*img);
  x = ops::relu(t, ops::conv2d(t, x, t.leaf(*w1_), t.leaf(*b1_), 2, 1));
  x = ops::relu(t, ops::conv2d(t, x, t.leaf(*w2_), t.leaf(*b2_), 2, 1));
  x = ops::relu(t, ops::conv2d(t, x, t.leaf(*w3_), t.leaf(*b3_), 2, 1));
  return ops::global_avg_pool(t, x);
}

std::optional<std::pair<Var, Var>> ConvImageEncoder::encode(
    Tape& t, const std::optional<Tensor>& image) const {
  if (!image.has_value()) return std::nullopt;  // missing modality passes through
  if (!cfg_.two_heads) throw InvalidConfigError("encode: encoder built with one head");
  Var feat = encode_trunk(t, *image);
  Var h_shared =
      ops::add_rowvec(t, ops::matmul(t, feat, t.leaf(*head_sh_w_)), t.leaf(*head_sh_b_));
  Var h_distinct =
      ops::add_rowvec(t, ops::matmul(t, feat, t.leaf(*head_di_w_)), t.leaf(*head_di_b_));
  return std::make_pair(h_shared, h_distinct);
}

}  // namespace drfuse
