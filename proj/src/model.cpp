// SPDX-License-Identifier: Apache-2.0
#include "drfuse/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "drfuse/errors.hpp"
#include "drfuse/json_util.hpp"
#include "drfuse/kernels.hpp"

namespace drfuse {

void ModelConfig::validate() const {
  if (n_classes < 1) throw InvalidConfigError("model: n_classes must be >= 1");
  if (n_features < 1) throw InvalidConfigError("model: n_features must be >= 1");
  if (d_model < 2 || d_model % 2 != 0)
    throw InvalidConfigError("model: d_model must be even and >= 2");
  if (n_heads < 1 || d_model % n_heads != 0)
    throw InvalidConfigError("model: n_heads must divide d_model");
  if (image_size < 4) throw InvalidConfigError("model: image_size must be >= 4");
}

std::string serialize_model_config(const ModelConfig& cfg) {
  nlohmann::json j;
  j["type"] = model_type_name(cfg.type);
  j["n_classes"] = cfg.n_classes;
  j["n_features"] = cfg.n_features;
  j["d_model"] = cfg.d_model;
  j["n_heads"] = cfg.n_heads;
  j["ff_dim"] = cfg.ff_dim;
  j["max_seq_len"] = cfg.max_seq_len;
  j["image_size"] = cfg.image_size;
  j["image_channels"] = cfg.image_channels;
  j["conv_channels"] = cfg.conv_channels;
  nlohmann::json v;
  v["alignment"] = cfg.variant.alignment == AlignmentMode::kJsd ? "jsd" : "mse";
  v["pooling"] = cfg.variant.pooling == PoolingMode::kLogitPool ? "logit" : "mean";
  v["attn_ranking"] = cfg.variant.attn_ranking;
  j["variant"] = std::move(v);
  return j.dump();
}

ModelConfig parse_model_config_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfigError(std::string("model config: parse error: ") + e.what());
  }
  check_known_keys(j,
                   {"type", "n_classes", "n_features", "d_model", "n_heads", "ff_dim",
                    "max_seq_len", "image_size", "image_channels", "conv_channels",
                    "variant"},
                   "model config");
  ModelConfig cfg;
  cfg.type = model_type_from_name(json_get<std::string>(j, "type", "drfuse"));
  cfg.n_classes = json_get<std::size_t>(j, "n_classes", cfg.n_classes);
  cfg.n_features = json_get<std::size_t>(j, "n_features", cfg.n_features);
  cfg.d_model = json_get<std::size_t>(j, "d_model", cfg.d_model);
  cfg.n_heads = json_get<std::size_t>(j, "n_heads", cfg.n_heads);
  cfg.ff_dim = json_get<std::size_t>(j, "ff_dim", cfg.ff_dim);
  cfg.max_seq_len = json_get<std::size_t>(j, "max_seq_len", cfg.max_seq_len);
  cfg.image_size = json_get<std::size_t>(j, "image_size", cfg.image_size);
  cfg.image_channels = json_get<std::size_t>(j, "image_channels", cfg.image_channels);
  auto cc = json_get<std::vector<std::size_t>>(
      j, "conv_channels",
      {cfg.conv_channels[0], cfg.conv_channels[1], cfg.conv_channels[2]});
  if (cc.size() != 3) throw InvalidConfigError("model: conv_channels must have 3 entries");
  cfg.conv_channels = {cc[0], cc[1], cc[2]};
  if (j.contains("variant")) {
    const auto& v = j.at("variant");
    check_known_keys(v, {"alignment", "pooling", "attn_ranking"}, "model variant");
    std::string a = json_get<std::string>(v, "alignment", "jsd");
    if (a == "jsd")
      cfg.variant.alignment = AlignmentMode::kJsd;
    else if (a == "mse")
      cfg.variant.alignment = AlignmentMode::kMse;
    else
      throw InvalidConfigError("model variant: alignment must be jsd or mse");
    std::string p = json_get<std::string>(v, "pooling", "logit");
    if (p == "logit")
      cfg.variant.pooling = PoolingMode::kLogitPool;
    else if (p == "mean")
      cfg.variant.pooling = PoolingMode::kMeanPool;
    else
      throw InvalidConfigError("model variant: pooling must be logit or mean");
    cfg.variant.attn_ranking = json_get<bool>(v, "attn_ranking", true);
  }
  cfg.validate();
  return cfg;
}

void LossBreakdown::add(const LossBreakdown& o) {
  pred += o.pred;
  jsd += o.jsd;
  orth_ehr += o.orth_ehr;
  orth_cxr += o.orth_cxr;
  attn += o.attn;
  aux += o.aux;
  total += o.total;
}

void LossBreakdown::scale(double s) {
  pred *= s;
  jsd *= s;
  orth_ehr *= s;
  orth_cxr *= s;
  attn *= s;
  aux *= s;
  total *= s;
}

const char* LossBreakdown::first_non_finite() const {
  if (!std::isfinite(pred)) return "pred";
  if (!std::isfinite(jsd)) return "jsd";
  if (!std::isfinite(orth_ehr)) return "orth_ehr";
  if (!std::isfinite(orth_cxr)) return "orth_cxr";
  if (!std::isfinite(attn)) return "attn";
  if (!std::isfinite(aux)) return "aux";
  if (!std::isfinite(total)) return "total";
  return nullptr;
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  scaler_mean_ = &store_.create_constant("scaler.mean", {1, cfg.n_features}, 0.0, false);
  scaler_std_ = &store_.create_constant("scaler.std", {1, cfg.n_features}, 1.0, false);
}

void Model::fit_scaler(const Dataset& ds, const std::vector<std::size_t>& train_indices) {
  std::size_t J = cfg_.n_features;
  std::vector<double> sum(J, 0.0), sum2(J, 0.0);
  std::size_t n_rows = 0;
  for (std::size_t i : train_indices) {
    const Tensor& x = ds.records.at(i).ehr;
    for (std::size_t t = 0; t < x.rows(); ++t) {
      for (std::size_t j = 0; j < J; ++j) {
        sum[j] += x.at(t, j);
        sum2[j] += x.at(t, j) * x.at(t, j);
      }
      ++n_rows;
    }
  }
  if (n_rows == 0) throw InvalidInputError("fit_scaler: empty training split");
  for (std::size_t j = 0; j < J; ++j) {
    double mean = sum[j] / static_cast<double>(n_rows);
    double var = sum2[j] / static_cast<double>(n_rows) - mean * mean;
    scaler_mean_->value[j] = mean;
    scaler_std_->value[j] = std::sqrt(std::max(var, 1e-12));
  }
}

Tensor Model::scale_ehr(const Tensor& x) const {
  Tensor out = x;
  for (std::size_t t = 0; t < out.rows(); ++t)
    for (std::size_t j = 0; j < out.cols(); ++j)
      out.at(t, j) = (out.at(t, j) - scaler_mean_->value[j]) /
                     std::max(scaler_std_->value[j], 1e-6);
  return out;
}

namespace {

EhrEncoderConfig ehr_config_of(const ModelConfig& cfg, bool two_branch) {
  EhrEncoderConfig e;
  e.n_features = cfg.n_features;
  e.d_model = cfg.d_model;
  e.n_heads = cfg.n_heads;
  e.ff_dim = cfg.ff_dim;
  e.max_seq_len = cfg.max_seq_len;
  e.two_branch = two_branch;
  return e;
}

ImageEncoderConfig image_config_of(const ModelConfig& cfg, bool two_heads) {
  ImageEncoderConfig c;
  c.image_size = cfg.image_size;
  c.channels = cfg.image_channels;
  c.conv_channels = cfg.conv_channels;
  c.d_model = cfg.d_model;
  c.two_heads = two_heads;
  return c;
}

}  // namespace

DrFuseModel::DrFuseModel(const ModelConfig& cfg, std::uint64_t init_seed) : Model(cfg) {
  Rng rng = Rng::derive(init_seed, 0x5EED);
  ehr_ = std::make_unique<EhrEncoder>(ehr_config_of(cfg, true), store_, rng, "ehr");
  cxr_ = std::make_unique<ConvImageEncoder>(image_config_of(cfg, true), store_, rng, "cxr");
  FusionConfig fc;
  fc.d_model = cfg.d_model;
  fc.n_classes = cfg.n_classes;
  fc.pooling = cfg.variant.pooling;
  fusion_ = std::make_unique<FusionHead>(fc, store_, rng, "fusion");
}

BundleVars DrFuseModel::encode_bundle(Tape& t, const SampleRecord& rec) const {
  BundleVars b;
  auto [h_se, h_de] = ehr_->encode(t, scale_ehr(rec.ehr));
  b.h_shared_ehr = h_se;
  b.h_distinct_ehr = h_de;
  auto img = cxr_->encode(t, rec.cxr);
  if (img.has_value()) {
    b.h_shared_cxr = img->first;
    b.h_distinct_cxr = img->second;
    b.has_cxr = true;
  }
  return b;
}

SampleGraph DrFuseModel::forward_loss(Tape& t, const SampleRecord& rec,
                                      const LossWeights& w) {
  if (rec.labels.size() != cfg_.n_classes)
    throw ShapeError("forward_loss: labels length does not match n_classes");
  SampleGraph sg;
  BundleVars b = encode_bundle(t, rec);
  FusionGraph fg = fusion_->fuse(t, b);
  Var pred = ops::bce_sum(t, fg.y_hat, rec.labels);
  sg.parts.pred = pred->value[0];

  std::vector<Var> terms{pred};
  std::vector<double> weights{1.0};
  if (b.has_cxr) {
    Var align = cfg_.variant.alignment == AlignmentMode::kJsd
                    ? ops::jsd_loss(t, b.h_shared_ehr, b.h_shared_cxr)
                    : ops::mse_loss(t, b.h_shared_ehr, b.h_shared_cxr);
    Var orth_e = ops::orth_loss(t, b.h_shared_ehr, b.h_distinct_ehr);
    Var orth_c = ops::orth_loss(t, b.h_shared_cxr, b.h_distinct_cxr);
    Var aux = ops::add_scalars(t, {ops::bce_sum(t, fg.y_aux[0], rec.labels),
                                   ops::bce_sum(t, fg.y_aux[1], rec.labels),
                                   ops::bce_sum(t, fg.y_aux[2], rec.labels)});
    sg.parts.jsd = align->value[0];
    sg.parts.orth_ehr = orth_e->value[0];
    sg.parts.orth_cxr = orth_c->value[0];
    sg.parts.aux = aux->value[0];
    terms.push_back(align);
    weights.push_back(w.lambda1);
    terms.push_back(orth_e);
    weights.push_back(w.lambda2);
    terms.push_back(orth_c);
    weights.push_back(w.lambda2);
    if (cfg_.variant.attn_ranking) {
      // per-class, per-representation auxiliary losses enter as constants
      Tensor ell({cfg_.n_classes, 3});
      for (std::size_t c = 0; c < cfg_.n_classes; ++c)
        for (std::size_t i = 0; i < 3; ++i) {
          double y = rec.labels[c];
          double p = kernels::clamp_prob(fg.y_aux[i]->value[c]);
          ell.at(c, i) = -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        }
      Var attn = ops::margin_rank(t, fg.alpha_mat, ell, w.epsilon);
      sg.parts.attn = attn->value[0];
      terms.push_back(attn);
      weights.push_back(w.lambda3);
    }
    terms.push_back(aux);
    weights.push_back(w.lambda3);
  } else {
    Var orth_e = ops::orth_loss(t, b.h_shared_ehr, b.h_distinct_ehr);
    sg.parts.orth_ehr = orth_e->value[0];
    terms.push_back(orth_e);
    weights.push_back(w.lambda2);
  }
  sg.loss = ops::scalar_weighted_sum(t, terms, weights);
  sg.parts.total = sg.loss->value[0];
  sg.y_hat = fg.y_hat->value.to_vector();
  sg.fusion = FusionHead::extract(fg);
  return sg;
}

std::vector<double> DrFuseModel::predict(const SampleRecord& rec) {
  Tape t;
  BundleVars b = encode_bundle(t, rec);
  FusionGraph fg = fusion_->fuse(t, b);
  return fg.y_hat->value.to_vector();
}

DrFuseModel::EvalOutputs DrFuseModel::evaluate_sample(const SampleRecord& rec) {
  Tape t;
  BundleVars b = encode_bundle(t, rec);
  FusionGraph fg = fusion_->fuse(t, b);
  EvalOutputs out;
  out.y_hat = fg.y_hat->value.to_vector();
  out.fusion = FusionHead::extract(fg);
  out.h_shared_ehr = b.h_shared_ehr->value.to_vector();
  out.h_distinct_ehr = b.h_distinct_ehr->value.to_vector();
  if (b.has_cxr) {
    out.h_shared_cxr = b.h_shared_cxr->value.to_vector();
    out.h_distinct_cxr = b.h_distinct_cxr->value.to_vector();
  }
  return out;
}

EhrOnlyModel::EhrOnlyModel(const ModelConfig& cfg, std::uint64_t init_seed) : Model(cfg) {
  Rng rng = Rng::derive(init_seed, 0x5EED);
  ehr_ = std::make_unique<EhrEncoder>(ehr_config_of(cfg, false), store_, rng, "ehr");
  head_w_ = &store_.create_xavier("head.w", cfg.d_model, cfg.n_classes, rng);
  head_b_ = &store_.create("head.b", {1, cfg.n_classes});
}

Var EhrOnlyModel::forward(Tape& t, const SampleRecord& rec) {
  Var h = ehr_->encode_single(t, scale_ehr(rec.ehr));
  return ops::sigmoid(
      t, ops::add_rowvec(t, ops::matmul(t, h, t.leaf(*head_w_)), t.leaf(*head_b_)));
}

SampleGraph EhrOnlyModel::forward_loss(Tape& t, const SampleRecord& rec,
                                       const LossWeights&) {
  SampleGraph sg;
  Var y_hat = forward(t, rec);
  sg.loss = ops::bce_sum(t, y_hat, rec.labels);
  sg.parts.pred = sg.loss->value[0];
  sg.parts.total = sg.parts.pred;
  sg.y_hat = y_hat->value.to_vector();
  return sg;
}

std::vector<double> EhrOnlyModel::predict(const SampleRecord& rec) {
  Tape t;
  return forward(t, rec)->value.to_vector();
}

CxrOnlyModel::CxrOnlyModel(const ModelConfig& cfg, std::uint64_t init_seed) : Model(cfg) {
  Rng rng = Rng::derive(init_seed, 0x5EED);
  cxr_ = std::make_unique<ConvImageEncoder>(image_config_of(cfg, false), store_, rng, "cxr");
  head_w_ = &store_.create_xavier("head.w", cfg.conv_channels[2], cfg.n_classes, rng);
  head_b_ = &store_.create("head.b", {1, cfg.n_classes});
}

SampleGraph CxrOnlyModel::forward_loss(Tape& t, const SampleRecord& rec,
                                       const LossWeights&) {
  if (!rec.has_cxr())
    throw InvalidInputError("cxr_only: training sample is missing the image modality");
  SampleGraph sg;
  Var feat = cxr_->encode_trunk(t, *rec.cxr);
  Var y_hat = ops::sigmoid(
      t, ops::add_rowvec(t, ops::matmul(t, feat, t.leaf(*head_w_)), t.leaf(*head_b_)));
  sg.loss = ops::bce_sum(t, y_hat, rec.labels);
  sg.parts.pred = sg.loss->value[0];
  sg.parts.total = sg.parts.pred;
  sg.y_hat = y_hat->value.to_vector();
  return sg;
}

std::vector<double> CxrOnlyModel::predict(const SampleRecord& rec) {
  if (!rec.has_cxr()) return std::vector<double>(cfg_.n_classes, 0.5);
  Tape t;
  Var feat = cxr_->encode_trunk(t, *rec.cxr);
  Var y_hat = ops::sigmoid(
      t, ops::add_rowvec(t, ops::matmul(t, feat, t.leaf(*head_w_)), t.leaf(*head_b_)));
  return y_hat->value.to_vector();
}

ConcatModel::ConcatModel(const ModelConfig& cfg, std::uint64_t init_seed) : Model(cfg) {
  Rng rng = Rng::derive(init_seed, 0x5EED);
  ehr_ = std::make_unique<EhrEncoder>(ehr_config_of(cfg, false), store_, rng, "ehr");
  cxr_ = std::make_unique<ConvImageEncoder>(image_config_of(cfg, false), store_, rng, "cxr");
  std::size_t joint = cfg.d_model + cfg.conv_channels[2];
  mix_w_ = &store_.create_xavier("mix.w", joint, cfg.d_model, rng);
  mix_b_ = &store_.create("mix.b", {1, cfg.d_model});
  head_w_ = &store_.create_xavier("head.w", cfg.d_model, cfg.n_classes, rng);
  head_b_ = &store_.create("head.b", {1, cfg.n_classes});
}

Var ConcatModel::forward(Tape& t, const SampleRecord& rec) {
  Var h_ehr = ehr_->encode_single(t, scale_ehr(rec.ehr));
  Var h_img = rec.has_cxr() ? cxr_->encode_trunk(t, *rec.cxr)
                            : t.constant(Tensor({1, cfg_.conv_channels[2]}));  // zero fill
  Var joint = ops::concat_cols(t, {h_ehr, h_img});
  Var mixed = ops::relu(
      t, ops::add_rowvec(t, ops::matmul(t, joint, t.leaf(*mix_w_)), t.leaf(*mix_b_)));
  return ops::sigmoid(
      t, ops::add_rowvec(t, ops::matmul(t, mixed, t.leaf(*head_w_)), t.leaf(*head_b_)));
}

SampleGraph ConcatModel::forward_loss(Tape& t, const SampleRecord& rec, const LossWeights&) {
  SampleGraph sg;
  Var y_hat = forward(t, rec);
  sg.loss = ops::bce_sum(t, y_hat, rec.labels);
  sg.parts.pred = sg.loss->value[0];
  sg.parts.total = sg.parts.pred;
  sg.y_hat = y_hat->value.to_vector();
  return sg;
}

std::vector<double> ConcatModel::predict(const SampleRecord& rec) {
  Tape t;
  return forward(t, rec)->value.to_vector();
}

std::unique_ptr<Model> make_model(const ModelConfig& cfg, std::uint64_t init_seed) {
  switch (cfg.type) {
    case ModelType::kDrFuse:
      return std::make_unique<DrFuseModel>(cfg, init_seed);
    case ModelType::kEhrOnly:
      return std::make_unique<EhrOnlyModel>(cfg, init_seed);
    case ModelType::kCxrOnly:
      return std::make_unique<CxrOnlyModel>(cfg, init_seed);
    case ModelType::kConcat:
      return std::make_unique<ConcatModel>(cfg, init_seed);
  }
  throw InvalidConfigError("make_model: unknown model type");
}

std::string model_type_name(ModelType t) {
  switch (t) {
    case ModelType::kDrFuse:
      return "drfuse";
    case ModelType::kEhrOnly:
      return "ehr_only";
    case ModelType::kCxrOnly:
      return "cxr_only";
    case ModelType::kConcat:
      return "concat";
  }
  return "drfuse";
}

ModelType model_type_from_name(const std::string& name) {
  if (name == "drfuse") return ModelType::kDrFuse;
  if (name == "ehr_only") return ModelType::kEhrOnly;
  if (name == "cxr_only") return ModelType::kCxrOnly;
  if (name == "concat") return ModelType::kConcat;
  throw InvalidConfigError("unknown model type: " + name);
}

namespace {
constexpr char kMagic[4] = {'D', 'R', 'F', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw IoError("truncated checkpoint: " + path);
  return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const std::string& meta_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(meta_json.size()));
  out.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
  std::uint64_t n = 0;
  for (auto it = params.begin(); it != params.end(); ++it) ++n;
  write_pod(out, n);
  for (auto it = params.begin(); it != params.end(); ++it) {
    const Parameter& p = *it->second;
    write_pod(out, static_cast<std::uint64_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod(out, static_cast<std::uint64_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) write_pod(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not a checkpoint file: " + path);
  auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion) throw IoError("unsupported checkpoint version in " + path);
  auto meta_len = read_pod<std::uint64_t>(in, path);
  Checkpoint ck;
  ck.meta_json.resize(meta_len);
  in.read(ck.meta_json.data(), static_cast<std::streamsize>(meta_len));
  auto n = read_pod<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto name_len = read_pod<std::uint64_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    auto rank = read_pod<std::uint64_t>(in, path);
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(read_pod<std::uint64_t>(in, path));
      numel *= d;
    }
    std::vector<double> data(numel);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint: " + path);
    ck.tensors.emplace(std::move(name), Tensor(shape, std::move(data)));
  }
  return ck;
}

}  // namespace drfuse
