// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "drfuse/data.hpp"
#include "drfuse/encoders.hpp"
#include "drfuse/fusion.hpp"

namespace drfuse {

enum class AlignmentMode { kJsd, kMse };
enum class ModelType { kDrFuse, kEhrOnly, kCxrOnly, kConcat };

// Ablation switches. "w/o disentangled" is expressed through the loss weights
// (lambda1 = lambda2 = 0), the other two variants through these flags.
struct ModelVariant {
  AlignmentMode alignment = AlignmentMode::kJsd;
  PoolingMode pooling = PoolingMode::kLogitPool;
  bool attn_ranking = true;
};

struct ModelConfig {
  ModelType type = ModelType::kDrFuse;
  std::size_t n_classes = 8;
  std::size_t n_features = 12;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t ff_dim = 128;
  std::size_t max_seq_len = 256;
  std::size_t image_size = 16;
  std::size_t image_channels = 1;
  std::array<std::size_t, 3> conv_channels{8, 16, 32};
  ModelVariant variant;

  void validate() const;
};

std::string serialize_model_config(const ModelConfig& cfg);
ModelConfig parse_model_config_json(const std::string& json_text);

// Loss multipliers of the overall objective plus the ranking margin.
struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 0.5;
  double epsilon = 0.1;
};

// Every term of the objective for one sample (or averaged over a batch).
// total = pred + l1*jsd + l2*(orth_ehr + orth_cxr) + l3*(attn + aux); the
// CXR-dependent terms are exactly 0 for partial samples.
struct LossBreakdown {
  double pred = 0.0;
  double jsd = 0.0;
  double orth_ehr = 0.0;
  double orth_cxr = 0.0;
  double attn = 0.0;
  double aux = 0.0;
  double total = 0.0;

  void add(const LossBreakdown& o);
  void scale(double s);
  // name of the first non-finite component, or nullptr if all finite
  const char* first_non_finite() const;
};

struct SampleGraph {
  Var loss = nullptr;  // scalar; backward through this
  LossBreakdown parts;
  std::vector<double> y_hat;
  std::optional<FusionOutput> fusion;
};

class Model {
 public:
  virtual ~Model() = default;

  virtual SampleGraph forward_loss(Tape& t, const SampleRecord& rec,
                                   const LossWeights& w) = 0;
  virtual std::vector<double> predict(const SampleRecord& rec) = 0;

  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const ModelConfig& config() const { return cfg_; }

  // Per-feature z-scoring statistics, fit on the training split and stored
  // with the checkpoint.
  void fit_scaler(const Dataset& ds, const std::vector<std::size_t>& train_indices);
  Tensor scale_ehr(const Tensor& x) const;

 protected:
  Model(const ModelConfig& cfg);
  ModelConfig cfg_;
  ParamStore store_;
  Parameter* scaler_mean_;
  Parameter* scaler_std_;
};

class DrFuseModel : public Model {
 public:
  DrFuseModel(const ModelConfig& cfg, std::uint64_t init_seed);

  SampleGraph forward_loss(Tape& t, const SampleRecord& rec, const LossWeights& w) override;
  std::vector<double> predict(const SampleRecord& rec) override;

  BundleVars encode_bundle(Tape& t, const SampleRecord& rec) const;

  struct EvalOutputs {
    std::vector<double> y_hat;
    FusionOutput fusion;
    std::vector<double> h_shared_ehr, h_distinct_ehr;
    std::optional<std::vector<double>> h_shared_cxr, h_distinct_cxr;
  };
  EvalOutputs evaluate_sample(const SampleRecord& rec);

  const EhrEncoder& ehr_encoder() const { return *ehr_; }
  const ConvImageEncoder& image_encoder() const { return *cxr_; }
  const FusionHead& fusion_head() const { return *fusion_; }

  static constexpr const char* kImageParamPrefix = "cxr.";

 private:
  std::unique_ptr<EhrEncoder> ehr_;
  std::unique_ptr<ConvImageEncoder> cxr_;
  std::unique_ptr<FusionHead> fusion_;
};

// Unimodal transformer trunk + linear head; never reads the image field.
class EhrOnlyModel : public Model {
 public:
  EhrOnlyModel(const ModelConfig& cfg, std::uint64_t init_seed);
  SampleGraph forward_loss(Tape& t, const SampleRecord& rec, const LossWeights& w) override;
  std::vector<double> predict(const SampleRecord& rec) override;

 private:
  Var forward(Tape& t, const SampleRecord& rec);
  std::unique_ptr<EhrEncoder> ehr_;
  Parameter *head_w_, *head_b_;
};

// Unimodal conv trunk + linear head; 0.5 for every class when CXR is absent.
class CxrOnlyModel : public Model {
 public:
  CxrOnlyModel(const ModelConfig& cfg, std::uint64_t init_seed);
  SampleGraph forward_loss(Tape& t, const SampleRecord& rec, const LossWeights& w) override;
  std::vector<double> predict(const SampleRecord& rec) override;

 private:
  std::unique_ptr<ConvImageEncoder> cxr_;
  Parameter *head_w_, *head_b_;
};

// Naive fusion: EHR trunk and image trunk features concatenated (zero-filled
// when the image is absent), then a two-layer head.
class ConcatModel : public Model {
 public:
  ConcatModel(const ModelConfig& cfg, std::uint64_t init_seed);
  SampleGraph forward_loss(Tape& t, const SampleRecord& rec, const LossWeights& w) override;
  std::vector<double> predict(const SampleRecord& rec) override;

 private:
  Var forward(Tape& t, const SampleRecord& rec);
  std::unique_ptr<EhrEncoder> ehr_;
  std::unique_ptr<ConvImageEncoder> cxr_;
  Parameter *mix_w_, *mix_b_, *head_w_, *head_b_;
};

std::unique_ptr<Model> make_model(const ModelConfig& cfg, std::uint64_t init_seed);

std::string model_type_name(ModelType t);
ModelType model_type_from_name(const std::string& name);

// Checkpoint: binary container of all parameter tensors keyed by module path,
// with a JSON metadata blob (model/train config) up front.
void save_checkpoint(const std::string& path, const ParamStore& params,
                     const std::string& meta_json);

struct Checkpoint {
  std::string meta_json;
  std::map<std::string, Tensor> tensors;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace drfuse
