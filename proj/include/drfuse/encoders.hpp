// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drfuse/graph.hpp"
#include "drfuse/ops.hpp"

namespace drfuse {

// Standard sinusoidal table: entry (t, 2k) = sin(t / 10000^(2k/d)),
// entry (t, 2k+1) = cos(t / 10000^(2k/d)). d_model must be even.
Tensor positional_encoding(std::size_t seq_len, std::size_t d_model);

struct EhrEncoderConfig {
  std::size_t n_features = 17;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t ff_dim = 128;
  std::size_t max_seq_len = 256;
  bool two_branch = true;       // false: single trunk for unimodal baselines
  bool use_positional = true;   // diagnostic switch for pooling tests
};

// Post-norm transformer encoder layer with ReLU feedforward.
class TransformerLayer {
 public:
  TransformerLayer(const std::string& prefix, std::size_t d_model, std::size_t n_heads,
                   std::size_t ff_dim, ParamStore& store, Rng& rng);

  Var apply(Tape& t, Var x) const;  // T x d -> T x d

  std::vector<Parameter*> parameters() const;

 private:
  std::size_t d_, heads_, head_dim_;
  Parameter *wq_, *bq_, *wk_, *bk_, *wv_, *bv_, *wo_, *bo_;
  Parameter *ln1_g_, *ln1_b_, *ln2_g_, *ln2_b_;
  Parameter *ff1_w_, *ff1_b_, *ff2_w_, *ff2_b_;
};

// Two encoders over one token stream: a shared embedding, a first transformer
// layer common to both branches, then one branch layer per representation.
// Sequence output becomes a vector by mean over time positions.
class EhrEncoder {
 public:
  EhrEncoder(const EhrEncoderConfig& cfg, ParamStore& store, Rng& rng,
             const std::string& prefix = "ehr");

  // (h_shared, h_distinct), each 1 x d. Requires two_branch.
  std::pair<Var, Var> encode(Tape& t, const Tensor& x) const;

  // Single pooled representation through the shared-branch stack.
  Var encode_single(Tape& t, const Tensor& x) const;

  const TransformerLayer& first_layer() const { return *layer1_; }
  const EhrEncoderConfig& config() const { return cfg_; }

 private:
  Var embed(Tape& t, const Tensor& x) const;

  EhrEncoderConfig cfg_;
  Parameter *emb_w_, *emb_b_;
  std::unique_ptr<TransformerLayer> layer1_;
  std::unique_ptr<TransformerLayer> shared_l2_;
  std::unique_ptr<TransformerLayer> distinct_l2_;
};

struct ImageEncoderConfig {
  std::size_t image_size = 16;
  std::size_t channels = 1;
  std::array<std::size_t, 3> conv_channels{8, 16, 32};
  std::size_t d_model = 64;
  bool two_heads = true;
};

// Contract for image backbones; a larger residual network can plug in here
// without touching the rest of the model.
class ImageEncoderIface {
 public:
  virtual ~ImageEncoderIface() = default;
  // ABSENT in -> ABSENT out. Present input yields (h_shared, h_distinct).
  virtual std::optional<std::pair<Var, Var>> encode(
      Tape& t, const std::optional<Tensor>& image) const = 0;
};

// Three strided 3x3 conv blocks, global average pooling, two linear heads.
class ConvImageEncoder : public ImageEncoderIface {
 public:
  ConvImageEncoder(const ImageEncoderConfig& cfg, ParamStore& store, Rng& rng,
                   const std::string& prefix = "cxr");

  std::optional<std::pair<Var, Var>> encode(Tape& t,
                                            const std::optional<Tensor>& image) const override;

  // Trunk features only (1 x conv_channels[2]); used by unimodal baselines.
  Var encode_trunk(Tape& t, const Tensor& image) const;

  const ImageEncoderConfig& config() const { return cfg_; }

 private:
  ImageEncoderConfig cfg_;
  Parameter *w1_, *b1_, *w2_, *b2_, *w3_, *b3_;
  Parameter *head_sh_w_, *head_sh_b_, *head_di_w_, *head_di_b_;
};

}  // namespace drfuse
