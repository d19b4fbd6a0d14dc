// SPDX-License-Identifier: Apache-2.0
#include "drfuse/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "drfuse/errors.hpp"
#include "drfuse/json_util.hpp"
#include "drfuse/kernels.hpp"
#include "drfuse/rng.hpp"

namespace drfuse {

namespace {

constexpr std::uint64_t kTagEhrDecoder = 1;
constexpr std::uint64_t kTagImageDecoder = 2;
constexpr std::uint64_t kTagLabels = 3;
constexpr std::uint64_t kTagRecordBase = 1000;

constexpr std::size_t kImageBases = 8;
constexpr double kLabelWeightScale = 3.0;

struct EhrDecoder {
  Tensor w1, b1, w2, b2;                // z -> hidden -> per-feature base level
  std::vector<double> freq, phase;      // temporal modulation per feature
};

struct ImageDecoder {
  Tensor coef_w, coef_b;                // z -> basis coefficients
  std::vector<Tensor> basis;            // fixed smooth grids
};

struct LabelModel {
  std::vector<std::vector<double>> w;   // per class, over its factor group
  std::vector<double> bias;
  std::vector<int> group;               // 0 shared, 1 ehr, 2 cxr
};

Tensor random_gaussian_tensor(Rng& rng, std::vector<std::size_t> shape, double stddev) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian(0.0, stddev);
  return t;
}

EhrDecoder make_ehr_decoder(const SyntheticConfig& cfg) {
  Rng rng = Rng::derive(cfg.seed, kTagEhrDecoder);
  std::size_t in = cfg.d_shared + cfg.d_ehr_distinct;
  std::size_t hidden = 2 * in;
  EhrDecoder d;
  d.w1 = random_gaussian_tensor(rng, {in, hidden}, 1.5 / std::sqrt(static_cast<double>(in)));
  d.b1 = random_gaussian_tensor(rng, {hidden}, 0.3);
  d.w2 = random_gaussian_tensor(rng, {hidden, cfg.n_features},
                                1.5 / std::sqrt(static_cast<double>(hidden)));
  d.b2 = random_gaussian_tensor(rng, {cfg.n_features}, 0.3);
  d.freq.resize(cfg.n_features);
  d.phase.resize(cfg.n_features);
  for (std::size_t j = 0; j < cfg.n_features; ++j) {
    d.freq[j] = rng.uniform(0.3, 1.2);
    d.phase[j] = rng.uniform(0.0, 2.0 * M_PI);
  }
  return d;
}

ImageDecoder make_image_decoder(const SyntheticConfig& cfg) {
  Rng rng = Rng::derive(cfg.seed, kTagImageDecoder);
  std::size_t in = cfg.d_shared + cfg.d_cxr_distinct;
  ImageDecoder d;
  d.coef_w = random_gaussian_tensor(rng, {in, kImageBases},
                                    1.2 / std::sqrt(static_cast<double>(in)));
  d.coef_b = random_gaussian_tensor(rng, {kImageBases}, 0.2);
  std::size_t s = cfg.image_size;
  for (std::size_t m = 0; m < kImageBases; ++m) {
    double fy = 1.0 + static_cast<double>(rng.next_below(3));
    double fx = 1.0 + static_cast<double>(rng.next_below(3));
    double py = rng.uniform(0.0, 2.0 * M_PI);
    double px = rng.uniform(0.0, 2.0 * M_PI);
    Tensor g({s, s});
    for (std::size_t y = 0; y < s; ++y)
      for (std::size_t x = 0; x < s; ++x)
        g.at(y, x) = std::sin(M_PI * fy * (y + 0.5) / s + py) *
                     std::sin(M_PI * fx * (x + 0.5) / s + px);
    d.basis.push_back(std::move(g));
  }
  return d;
}

LabelModel make_label_model(const SyntheticConfig& cfg) {
  Rng rng = Rng::derive(cfg.seed, kTagLabels);
  LabelModel m;
  m.w.resize(cfg.n_classes);
  m.bias.resize(cfg.n_classes);
  m.group.resize(cfg.n_classes);
  std::size_t dims[3] = {cfg.d_shared, cfg.d_ehr_distinct, cfg.d_cxr_distinct};
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    int g = static_cast<int>(c % 3);
    m.group[c] = g;
    std::size_t k = dims[g];
    std::vector<double> w(k);
    double norm2 = 0.0;
    for (auto& v : w) {
      v = rng.gaussian();
      norm2 += v * v;
    }
    double inv = kLabelWeightScale / std::sqrt(std::max(norm2, 1e-12));
    for (auto& v : w) v *= inv;
    m.w[c] = std::move(w);
    double target_prev = rng.uniform(0.15, 0.45);
    // probit-style correction so the marginal prevalence lands near target
    double s2 = kLabelWeightScale * kLabelWeightScale;
    m.bias[c] = std::log(target_prev / (1.0 - target_prev)) * std::sqrt(1.0 + M_PI * s2 / 8.0);
  }
  return m;
}

void fnv_mix(std::uint64_t& h, const Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint64_t bits;
    double v = t[i];
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  }
}

std::string record_id(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "s%06zu", i);
  return std::string(buf);
}

nlohmann::json record_to_json(const SampleRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  nlohmann::json ehr = nlohmann::json::array();
  for (std::size_t t = 0; t < r.ehr.rows(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t f = 0; f < r.ehr.cols(); ++f) row.push_back(r.ehr.at(t, f));
    ehr.push_back(std::move(row));
  }
  j["ehr"] = std::move(ehr);
  if (r.cxr.has_value()) {
    nlohmann::json c;
    c["shape"] = r.cxr->shape();
    c["data"] = r.cxr->to_vector();
    j["cxr"] = std::move(c);
  } else {
    j["cxr"] = nullptr;
  }
  j["labels"] = r.labels;
  if (r.has_factors()) {
    nlohmann::json f;
    f["shared"] = r.z_shared;
    f["ehr"] = r.z_ehr;
    f["cxr"] = r.z_cxr;
    j["factors"] = std::move(f);
  }
  return j;
}

SampleRecord record_from_json(const nlohmann::json& j, std::size_t n_classes,
                              std::size_t n_features, std::size_t line_no) {
  std::string where = "record at line " + std::to_string(line_no);
  check_known_keys(j, {"id", "ehr", "cxr", "labels", "factors"}, where);
  SampleRecord r;
  r.id = json_require<std::string>(j, "id", where);
  where = "record '" + r.id + "'";
  if (!j.contains("ehr")) throw IoError(where + ": missing field 'ehr'");
  if (!j.contains("cxr")) throw IoError(where + ": missing field 'cxr'");
  if (!j.contains("labels")) throw IoError(where + ": missing field 'labels'");

  const auto& ehr = j.at("ehr");
  if (!ehr.is_array() || ehr.empty())
    throw IoError(where + ": field 'ehr' must be a non-empty array of rows");
  std::size_t t_len = ehr.size();
  Tensor x({t_len, n_features});
  for (std::size_t t = 0; t < t_len; ++t) {
    const auto& row = ehr.at(t);
    if (!row.is_array() || row.size() != n_features)
      throw IoError(where + ": field 'ehr' row " + std::to_string(t) + " must have " +
                    std::to_string(n_features) + " entries");
    for (std::size_t f = 0; f < n_features; ++f) {
      double v = row.at(f).get<double>();
      if (!std::isfinite(v)) throw IoError(where + ": field 'ehr' has non-finite value");
      x.at(t, f) = v;
    }
  }
  r.ehr = std::move(x);

  const auto& cxr = j.at("cxr");
  if (!cxr.is_null()) {
    check_known_keys(cxr, {"shape", "data"}, where + " field 'cxr'");
    auto shape = json_require<std::vector<std::size_t>>(cxr, "shape", where);
    auto data = json_require<std::vector<double>>(cxr, "data", where);
    std::size_t numel = 1;
    for (auto s : shape) numel *= s;
    if (shape.empty() || numel != data.size())
      throw IoError(where + ": field 'cxr' shape does not match data length");
    for (double v : data)
      if (!(v >= 0.0 && v <= 1.0))
        throw IoError(where + ": field 'cxr' must be normalized to [0, 1]");
    if (shape.size() == 2) shape.insert(shape.begin(), 1);
    if (shape.size() != 3) throw IoError(where + ": field 'cxr' must be 2-d or 3-d");
    r.cxr = Tensor(shape, std::move(data));
  }

  r.labels = json_require<std::vector<double>>(j, "labels", where);
  if (r.labels.size() != n_classes)
    throw IoError(where + ": field 'labels' has length " + std::to_string(r.labels.size()) +
                  ", expected " + std::to_string(n_classes));
  for (double y : r.labels)
    if (y != 0.0 && y != 1.0) throw IoError(where + ": field 'labels' entries must be 0 or 1");

  if (j.contains("factors")) {
    const auto& f = j.at("factors");
    check_known_keys(f, {"shared", "ehr", "cxr"}, where + " field 'factors'");
    r.z_shared = json_get<std::vector<double>>(f, "shared", {});
    r.z_ehr = json_get<std::vector<double>>(f, "ehr", {});
    r.z_cxr = json_get<std::vector<double>>(f, "cxr", {});
  }
  return r;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (n_samples < 1) throw InvalidConfigError("synthetic: n_samples must be >= 1");
  if (n_classes < 1) throw InvalidConfigError("synthetic: n_classes must be >= 1");
  if (d_shared < 1 || d_ehr_distinct < 1 || d_cxr_distinct < 1)
    throw InvalidConfigError("synthetic: factor dimensions must be >= 1");
  if (seq_len < 1 || n_features < 1 || image_size < 4)
    throw InvalidConfigError("synthetic: bad shape configuration");
  if (!(missing_rate >= 0.0 && missing_rate <= 1.0))
    throw InvalidConfigError("synthetic: missing_rate must be in [0, 1]");
  if (!(label_noise >= 0.0 && label_noise <= 1.0))
    throw InvalidConfigError("synthetic: label_noise must be in [0, 1]");
}

Dataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  EhrDecoder ehr_dec = make_ehr_decoder(cfg);
  ImageDecoder img_dec = make_image_decoder(cfg);
  LabelModel labels = make_label_model(cfg);

  Dataset ds;
  ds.n_classes = cfg.n_classes;
  ds.n_features = cfg.n_features;
  static const char* kGroupNames[3] = {"shared", "ehr", "cxr"};
  for (std::size_t c = 0; c < cfg.n_classes; ++c)
    ds.class_drivers.push_back(kGroupNames[labels.group[c]]);

  double logit_rate = cfg.missing_rate <= 0.0   ? -1e9
                      : cfg.missing_rate >= 1.0 ? 1e9
                      : std::log(cfg.missing_rate / (1.0 - cfg.missing_rate));

  ds.records.reserve(cfg.n_samples);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    Rng rng = Rng::derive(cfg.seed, kTagRecordBase + i);
    SampleRecord rec;
    rec.id = record_id(i);
    rec.z_shared.resize(cfg.d_shared);
    rec.z_ehr.resize(cfg.d_ehr_distinct);
    rec.z_cxr.resize(cfg.d_cxr_distinct);
    for (auto& v : rec.z_shared) v = rng.gaussian();
    for (auto& v : rec.z_ehr) v = rng.gaussian();
    for (auto& v : rec.z_cxr) v = rng.gaussian();

    // EHR: static severity per feature from a fixed two-layer decoder,
    // modulated over time, plus observation noise.
    std::size_t in_e = cfg.d_shared + cfg.d_ehr_distinct;
    std::size_t hidden = 2 * in_e;
    std::vector<double> z_e(in_e);
    for (std::size_t k = 0; k < cfg.d_shared; ++k) z_e[k] = rec.z_shared[k];
    for (std::size_t k = 0; k < cfg.d_ehr_distinct; ++k) z_e[cfg.d_shared + k] = rec.z_ehr[k];
    std::vector<double> hid(hidden);
    for (std::size_t hh = 0; hh < hidden; ++hh) {
      double acc = ehr_dec.b1[hh];
      for (std::size_t k = 0; k < in_e; ++k) acc += z_e[k] * ehr_dec.w1.at(k, hh);
      hid[hh] = std::tanh(acc);
    }
    std::vector<double> base(cfg.n_features);
    for (std::size_t j = 0; j < cfg.n_features; ++j) {
      double acc = ehr_dec.b2[j];
      for (std::size_t hh = 0; hh < hidden; ++hh) acc += hid[hh] * ehr_dec.w2.at(hh, j);
      base[j] = std::tanh(acc);
    }
    rec.ehr = Tensor({cfg.seq_len, cfg.n_features});
    for (std::size_t t = 0; t < cfg.seq_len; ++t)
      for (std::size_t j = 0; j < cfg.n_features; ++j)
        rec.ehr.at(t, j) = base[j] * (1.0 + 0.5 * std::sin(ehr_dec.freq[j] * t +
                                                           ehr_dec.phase[j])) +
                           0.1 * rng.gaussian();

    // image: fixed smooth bases weighted by a nonlinear map of [z_shared, z_cxr]
    std::size_t in_c = cfg.d_shared + cfg.d_cxr_distinct;
    std::vector<double> z_c(in_c);
    for (std::size_t k = 0; k < cfg.d_shared; ++k) z_c[k] = rec.z_shared[k];
    for (std::size_t k = 0; k < cfg.d_cxr_distinct; ++k) z_c[cfg.d_shared + k] = rec.z_cxr[k];
    std::vector<double> coef(kImageBases);
    for (std::size_t m = 0; m < kImageBases; ++m) {
      double acc = img_dec.coef_b[m];
      for (std::size_t k = 0; k < in_c; ++k) acc += z_c[k] * img_dec.coef_w.at(k, m);
      coef[m] = std::tanh(acc);
    }
    std::size_t s = cfg.image_size;
    Tensor img({1, s, s});
    double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(kImageBases));
    for (std::size_t y = 0; y < s; ++y)
      for (std::size_t x = 0; x < s; ++x) {
        double acc = 0.0;
        for (std::size_t m = 0; m < kImageBases; ++m) acc += coef[m] * img_dec.basis[m].at(y, x);
        double v = 0.5 + 0.45 * acc * inv_sqrt_m + 0.02 * rng.gaussian();
        img.at(0, y, x) = std::clamp(v, 0.0, 1.0);
      }

    // labels from the class's designated factor group
    rec.labels.resize(cfg.n_classes);
    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
      const std::vector<double>* zg = labels.group[c] == 0   ? &rec.z_shared
                                      : labels.group[c] == 1 ? &rec.z_ehr
                                                             : &rec.z_cxr;
      double act = labels.bias[c];
      for (std::size_t k = 0; k < labels.w[c].size(); ++k) act += labels.w[c][k] * (*zg)[k];
      bool y = rng.bernoulli(kernels::sigmoid_scalar(act));
      if (cfg.label_noise > 0.0 && rng.bernoulli(cfg.label_noise)) y = !y;
      rec.labels[c] = y ? 1.0 : 0.0;
    }

    // missingness
    bool drop;
    if (cfg.missing_mechanism == MissingMechanism::kMCAR) {
      drop = rng.bernoulli(cfg.missing_rate);
    } else {
      double n2 = 0.0;
      for (double v : rec.z_ehr) n2 += v * v;
      double de = static_cast<double>(cfg.d_ehr_distinct);
      double u = (n2 - de) / std::sqrt(2.0 * de);
      drop = rng.bernoulli(kernels::sigmoid_scalar(2.5 * u + 1.6 * logit_rate));
    }
    if (!drop) rec.cxr = std::move(img);

    ds.records.push_back(std::move(rec));
  }
  return ds;
}

std::string synthetic_decoder_digest(const SyntheticConfig& cfg) {
  EhrDecoder e = make_ehr_decoder(cfg);
  ImageDecoder im = make_image_decoder(cfg);
  LabelModel lm = make_label_model(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv_mix(h, e.w1);
  fnv_mix(h, e.b1);
  fnv_mix(h, e.w2);
  fnv_mix(h, e.b2);
  fnv_mix(h, Tensor({e.freq.size()}, e.freq));
  fnv_mix(h, Tensor({e.phase.size()}, e.phase));
  fnv_mix(h, im.coef_w);
  fnv_mix(h, im.coef_b);
  for (const auto& b : im.basis) fnv_mix(h, b);
  for (std::size_t c = 0; c < lm.w.size(); ++c) {
    fnv_mix(h, Tensor({lm.w[c].size()}, lm.w[c]));
    fnv_mix(h, Tensor::scalar(lm.bias[c]));
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

void write_records_jsonl(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& r : ds.records) out << record_to_json(r).dump() << "\n";
  if (!out) throw IoError("write failed: " + path);
}

Dataset load_records_jsonl(const std::string& path, std::size_t n_classes,
                           std::size_t n_features) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open record file: " + path);
  Dataset ds;
  ds.n_classes = n_classes;
  ds.n_features = n_features;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("record file " + path + " line " + std::to_string(line_no) +
                    ": parse error: " + e.what());
    }
    ds.records.push_back(record_from_json(j, n_classes, n_features, line_no));
  }
  return ds;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  nlohmann::json j;
  j["records"] = m.records_path;
  j["n_classes"] = m.n_classes;
  j["n_features"] = m.n_features;
  j["seq_len"] = m.seq_len;
  j["image_size"] = m.image_size;
  if (!m.class_drivers.empty()) j["class_drivers"] = m.class_drivers;
  nlohmann::json split;
  split["seed"] = m.split_seed;
  split["ratios"] = m.split_ratios;
  if (m.has_split()) {
    split["train"] = m.split.train;
    split["val"] = m.split.val;
    split["test"] = m.split.test;
  }
  j["split"] = std::move(split);
  if (!m.generator_json.empty()) j["generator"] = nlohmann::json::parse(m.generator_json);
  if (!m.decoder_digest.empty()) j["decoder_digest"] = m.decoder_digest;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest " + path + ": parse error: " + e.what());
  }
  check_known_keys(j,
                   {"records", "n_classes", "n_features", "seq_len", "image_size",
                    "class_drivers", "split", "generator", "decoder_digest"},
                   "manifest");
  DatasetManifest m;
  m.records_path = json_require<std::string>(j, "records", "manifest");
  m.n_classes = json_require<std::size_t>(j, "n_classes", "manifest");
  m.n_features = json_require<std::size_t>(j, "n_features", "manifest");
  m.seq_len = json_get<std::size_t>(j, "seq_len", 0);
  m.image_size = json_get<std::size_t>(j, "image_size", 0);
  m.class_drivers = json_get<std::vector<std::string>>(j, "class_drivers", {});
  if (j.contains("split")) {
    const auto& s = j.at("split");
    check_known_keys(s, {"seed", "ratios", "train", "val", "test"}, "manifest split");
    m.split_seed = json_get<std::uint64_t>(s, "seed", 0);
    auto ratios = json_get<std::vector<double>>(s, "ratios", {0.7, 0.1, 0.2});
    if (ratios.size() != 3) throw InvalidConfigError("manifest split ratios must have 3 entries");
    m.split_ratios = {ratios[0], ratios[1], ratios[2]};
    m.split.train = json_get<std::vector<std::size_t>>(s, "train", {});
    m.split.val = json_get<std::vector<std::size_t>>(s, "val", {});
    m.split.test = json_get<std::vector<std::size_t>>(s, "test", {});
  }
  if (j.contains("generator")) m.generator_json = j.at("generator").dump();
  m.decoder_digest = json_get<std::string>(j, "decoder_digest", "");
  return m;
}

Dataset load_dataset(const DatasetManifest& m, const std::string& manifest_dir) {
  std::filesystem::path rec(m.records_path);
  if (rec.is_relative()) rec = std::filesystem::path(manifest_dir) / rec;
  Dataset ds = load_records_jsonl(rec.string(), m.n_classes, m.n_features);
  ds.class_drivers = m.class_drivers;
  for (const auto& ix : {m.split.train, m.split.val, m.split.test})
    for (std::size_t i : ix)
      if (i >= ds.records.size())
        throw InvalidConfigError("manifest split references record index out of range");
  return ds;
}

Dataset load_dataset(const std::string& manifest_path) {
  DatasetManifest m = load_manifest(manifest_path);
  return load_dataset(m, std::filesystem::path(manifest_path).parent_path().string());
}

SplitIndices split_dataset(const Dataset& ds, const std::array<double, 3>& ratios,
                           std::uint64_t seed) {
  for (double r : ratios)
    if (!(r > 0.0)) throw InvalidConfigError("split: ratios must be positive");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw InvalidConfigError("split: ratios must sum to 1");
  if (ds.size() < 3) throw InvalidInputError("split: dataset smaller than 3 records");

  std::vector<std::size_t> matched, partial;
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    (ds.records[i].has_cxr() ? matched : partial).push_back(i);

  SplitIndices out;
  auto cut = [&](std::vector<std::size_t>& stratum, std::uint64_t tag) {
    if (stratum.empty()) return;
    Rng rng = Rng::derive(seed, tag);
    rng.shuffle(stratum);
    std::size_t n = stratum.size();
    auto c1 = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
    auto c2 = static_cast<std::size_t>(
        std::llround((ratios[0] + ratios[1]) * static_cast<double>(n)));
    c1 = std::min(c1, n);
    c2 = std::clamp(c2, c1, n);
    out.train.insert(out.train.end(), stratum.begin(), stratum.begin() + c1);
    out.val.insert(out.val.end(), stratum.begin() + c1, stratum.begin() + c2);
    out.test.insert(out.test.end(), stratum.begin() + c2, stratum.end());
  };
  cut(matched, 0xAA);
  cut(partial, 0xBB);
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::string serialize_synthetic_config(const SyntheticConfig& cfg) {
  nlohmann::json j;
  j["n_samples"] = cfg.n_samples;
  j["n_classes"] = cfg.n_classes;
  j["d_shared"] = cfg.d_shared;
  j["d_ehr_distinct"] = cfg.d_ehr_distinct;
  j["d_cxr_distinct"] = cfg.d_cxr_distinct;
  j["seq_len"] = cfg.seq_len;
  j["n_features"] = cfg.n_features;
  j["image_size"] = cfg.image_size;
  j["missing_rate"] = cfg.missing_rate;
  j["missing_mechanism"] = cfg.missing_mechanism == MissingMechanism::kMCAR ? "MCAR" : "MNAR";
  j["label_noise"] = cfg.label_noise;
  j["seed"] = cfg.seed;
  return j.dump();
}

SyntheticConfig parse_synthetic_config_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfigError(std::string("synthetic config: parse error: ") + e.what());
  }
  check_known_keys(j,
                   {"n_samples", "n_classes", "d_shared", "d_ehr_distinct", "d_cxr_distinct",
                    "seq_len", "n_features", "image_size", "missing_rate",
                    "missing_mechanism", "label_noise", "seed"},
                   "synthetic config");
  SyntheticConfig cfg;
  cfg.n_samples = json_get<std::size_t>(j, "n_samples", cfg.n_samples);
  cfg.n_classes = json_get<std::size_t>(j, "n_classes", cfg.n_classes);
  cfg.d_shared = json_get<std::size_t>(j, "d_shared", cfg.d_shared);
  cfg.d_ehr_distinct = json_get<std::size_t>(j, "d_ehr_distinct", cfg.d_ehr_distinct);
  cfg.d_cxr_distinct = json_get<std::size_t>(j, "d_cxr_distinct", cfg.d_cxr_distinct);
  cfg.seq_len = json_get<std::size_t>(j, "seq_len", cfg.seq_len);
  cfg.n_features = json_get<std::size_t>(j, "n_features", cfg.n_features);
  cfg.image_size = json_get<std::size_t>(j, "image_size", cfg.image_size);
  cfg.missing_rate = json_get<double>(j, "missing_rate", cfg.missing_rate);
  std::string mech = json_get<std::string>(j, "missing_mechanism", "MCAR");
  if (mech == "MCAR")
    cfg.missing_mechanism = MissingMechanism::kMCAR;
  else if (mech == "MNAR")
    cfg.missing_mechanism = MissingMechanism::kMNAR;
  else
    throw InvalidConfigError("synthetic config: missing_mechanism must be MCAR or MNAR");
  cfg.label_noise = json_get<double>(j, "label_noise", cfg.label_noise);
  cfg.seed = json_get<std::uint64_t>(j, "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

}  // namespace drfuse
