// SPDX-License-Identifier: Apache-2.0
#include "drfuse/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "drfuse/errors.hpp"
#include "drfuse/kernels.hpp"

namespace drfuse {

double prauc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw ShapeError("prauc: length mismatch");
  std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t n_pos = 0;
  for (double y : labels) n_pos += y == 1.0 ? 1 : 0;
  if (n_pos == 0) throw UndefinedMetricError("prauc: no positive labels");
  double acc = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (labels[order[k]] == 1.0) {
      ++hits;
      acc += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return acc / static_cast<double>(n_pos);
}

MacroPrauc macro_prauc(const std::vector<std::vector<double>>& scores,
                       const std::vector<std::vector<double>>& labels) {
  if (scores.empty() || scores.size() != labels.size())
    throw ShapeError("macro_prauc: bad inputs");
  std::size_t n_classes = scores[0].size();
  MacroPrauc out;
  out.per_class.assign(n_classes, std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  std::size_t used = 0;
  std::vector<double> s(scores.size()), y(scores.size());
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      s[i] = scores[i][c];
      y[i] = labels[i][c];
    }
    try {
      out.per_class[c] = prauc(s, y);
      sum += out.per_class[c];
      ++used;
    } catch (const UndefinedMetricError&) {
      ++out.n_skipped;
    }
  }
  if (used == 0) throw UndefinedMetricError("macro_prauc: no class has a positive label");
  out.value = sum / static_cast<double>(used);
  return out;
}

namespace {
double percentile(std::vector<double>& sorted_values, double p) {
  std::size_t n = sorted_values.size();
  if (n == 1) return sorted_values[0];
  double h = p * static_cast<double>(n - 1);
  auto lo = static_cast<std::size_t>(std::floor(h));
  auto hi = std::min(lo + 1, n - 1);
  double frac = h - static_cast<double>(lo);
  return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}
}  // namespace

BootstrapCi bootstrap_ci(const std::vector<std::vector<double>>& scores,
                         const std::vector<std::vector<double>>& labels,
                         const SampleMetric& metric, std::size_t n_iter, double level,
                         std::uint64_t seed) {
  if (scores.empty()) throw InvalidInputError("bootstrap_ci: empty test set");
  std::size_t n = scores.size();
  BootstrapCi out;
  std::vector<double> values;
  values.reserve(n_iter);
  std::vector<std::vector<double>> rs(n), rl(n);
  for (std::size_t it = 0; it < n_iter; ++it) {
    Rng rng = Rng::derive(seed, 0xB00 + it);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = static_cast<std::size_t>(rng.next_below(n));
      rs[i] = scores[j];
      rl[i] = labels[j];
    }
    try {
      values.push_back(metric(rs, rl));
    } catch (const UndefinedMetricError&) {
      ++out.n_degenerate;  // resample with no scorable class: skip iteration
    }
  }
  if (values.empty()) throw UndefinedMetricError("bootstrap_ci: every iteration degenerate");
  std::sort(values.begin(), values.end());
  double tail = (1.0 - level) / 2.0;
  out.lo = percentile(values, tail);
  out.hi = percentile(values, 1.0 - tail);
  return out;
}

BootstrapCi bootstrap_ci(const std::vector<std::vector<double>>& scores,
                         const std::vector<std::vector<double>>& labels,
                         std::size_t n_iter, double level, std::uint64_t seed) {
  return bootstrap_ci(
      scores, labels,
      [](const std::vector<std::vector<double>>& s,
         const std::vector<std::vector<double>>& y) { return macro_prauc(s, y).value; },
      n_iter, level, seed);
}

double auroc(std::span<const double> scores, std::span<const double> labels) {
  std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // midranks
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (labels[k] == 1.0) {
      pos_rank_sum += rank[k];
      ++n_pos;
    }
  }
  std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("auroc: one-class input");
  double u = pos_rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<double> ridge_predict(const std::vector<std::vector<double>>& x_train,
                                  const std::vector<double>& y_train,
                                  const std::vector<std::vector<double>>& x_test,
                                  double lambda) {
  if (x_train.empty() || x_train.size() != y_train.size())
    throw ShapeError("ridge_predict: bad inputs");
  std::size_t n = x_train.size(), d = x_train[0].size();

  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (const auto& row : x_train)
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  for (auto& m : mean) m /= static_cast<double>(n);
  for (const auto& row : x_train)
    for (std::size_t j = 0; j < d; ++j) sd[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
  for (auto& s : sd) s = std::max(std::sqrt(s / static_cast<double>(n)), 1e-9);
  double y_mean = std::accumulate(y_train.begin(), y_train.end(), 0.0) /
                  static_cast<double>(n);

  // normal equations on standardized features
  Tensor a({d, d});
  std::vector<double> b(d, 0.0), z(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) z[j] = (x_train[r][j] - mean[j]) / sd[j];
    double yc = y_train[r] - y_mean;
    for (std::size_t j = 0; j < d; ++j) {
      b[j] += z[j] * yc;
      for (std::size_t k = j; k < d; ++k) a.at(j, k) += z[j] * z[k];
    }
  }
  double reg = lambda * static_cast<double>(n);
  for (std::size_t j = 0; j < d; ++j) {
    a.at(j, j) += reg;
    for (std::size_t k = 0; k < j; ++k) a.at(j, k) = a.at(k, j);
  }
  // Cholesky solve
  Tensor l({d, d});
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k <= j; ++k) {
      double s = a.at(j, k);
      for (std::size_t m = 0; m < k; ++m) s -= l.at(j, m) * l.at(k, m);
      if (j == k)
        l.at(j, j) = std::sqrt(std::max(s, 1e-12));
      else
        l.at(j, k) = s / l.at(k, k);
    }
  }
  std::vector<double> w(d);
  for (std::size_t j = 0; j < d; ++j) {
    double s = b[j];
    for (std::size_t m = 0; m < j; ++m) s -= l.at(j, m) * w[m];
    w[j] = s / l.at(j, j);
  }
  for (std::size_t jj = d; jj-- > 0;) {
    double s = w[jj];
    for (std::size_t m = jj + 1; m < d; ++m) s -= l.at(m, jj) * w[m];
    w[jj] = s / l.at(jj, jj);
  }

  std::vector<double> preds(x_test.size());
  for (std::size_t r = 0; r < x_test.size(); ++r) {
    double pred = y_mean;
    for (std::size_t j = 0; j < d; ++j) pred += w[j] * (x_test[r][j] - mean[j]) / sd[j];
    preds[r] = pred;
  }
  return preds;
}

double ridge_r2(const std::vector<std::vector<double>>& x_train,
                const std::vector<double>& y_train,
                const std::vector<std::vector<double>>& x_test,
                const std::vector<double>& y_test, double lambda) {
  if (x_test.size() != y_test.size()) throw ShapeError("ridge_r2: bad inputs");
  std::vector<double> preds = ridge_predict(x_train, y_train, x_test, lambda);
  double ss_res = 0.0, ss_tot = 0.0;
  double yt_mean = 0.0;
  for (double y : y_test) yt_mean += y;
  yt_mean /= static_cast<double>(std::max<std::size_t>(1, y_test.size()));
  for (std::size_t r = 0; r < y_test.size(); ++r) {
    ss_res += (y_test[r] - preds[r]) * (y_test[r] - preds[r]);
    ss_tot += (y_test[r] - yt_mean) * (y_test[r] - yt_mean);
  }
  if (ss_tot < 1e-12) return 0.0;
  return 1.0 - ss_res / ss_tot;
}

MetricReport evaluate_model(Model& model, const Dataset& ds,
                            const std::vector<std::size_t>& idx,
                            std::size_t bootstrap_iters, std::uint64_t bootstrap_seed) {
  if (idx.empty()) throw InvalidInputError("evaluate_model: empty evaluation split");
  std::vector<std::vector<double>> scores, labels;
  scores.reserve(idx.size());
  for (std::size_t i : idx) {
    scores.push_back(model.predict(ds.records[i]));
    labels.push_back(ds.records[i].labels);
  }
  MacroPrauc mp = macro_prauc(scores, labels);
  MetricReport r;
  r.macro = mp.value;
  r.per_class = mp.per_class;
  r.n_skipped = mp.n_skipped;
  r.n_samples = idx.size();
  std::size_t n_classes = labels[0].size();
  r.prevalence.assign(n_classes, 0.0);
  for (const auto& y : labels)
    for (std::size_t c = 0; c < n_classes; ++c) r.prevalence[c] += y[c];
  for (auto& p : r.prevalence) p /= static_cast<double>(labels.size());
  if (bootstrap_iters > 0)
    r.ci = bootstrap_ci(scores, labels, bootstrap_iters, 0.95, bootstrap_seed);
  else
    r.ci = {r.macro, r.macro, 0};
  return r;
}

std::vector<AlphaRow> export_alpha(DrFuseModel& model, const Dataset& ds,
                                   const std::vector<std::size_t>& idx) {
  std::vector<AlphaRow> rows;
  rows.reserve(idx.size() * model.config().n_classes);
  for (std::size_t i : idx) {
    auto out = model.evaluate_sample(ds.records[i]);
    for (std::size_t c = 0; c < model.config().n_classes; ++c) {
      AlphaRow row;
      row.id = ds.records[i].id;
      row.class_idx = c;
      row.alpha = {out.fusion.alpha.at(c, 0), out.fusion.alpha.at(c, 1),
                   out.fusion.alpha.at(c, 2)};
      row.has_cxr = out.fusion.has_cxr;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {

// representation matrix rows for the probe; paired samples only
struct ProbeData {
  std::array<std::vector<std::vector<double>>, 4> reps;
  std::vector<std::vector<double>> pooled;
  std::array<std::vector<std::vector<double>>, 3> factors;  // per factor, per sample
  std::vector<double> jsd_values;
};

ProbeData collect_probe_data(DrFuseModel& model, const Dataset& ds,
                             const std::vector<std::size_t>& idx) {
  ProbeData out;
  for (std::size_t i : idx) {
    const SampleRecord& rec = ds.records[i];
    if (!rec.has_cxr() || !rec.has_factors()) continue;
    auto ev = model.evaluate_sample(rec);
    out.reps[0].push_back(ev.h_shared_ehr);
    out.reps[1].push_back(ev.h_distinct_ehr);
    out.reps[2].push_back(*ev.h_shared_cxr);
    out.reps[3].push_back(*ev.h_distinct_cxr);
    out.pooled.push_back(ev.fusion.h_shared);
    out.factors[0].push_back(rec.z_shared);
    out.factors[1].push_back(rec.z_ehr);
    out.factors[2].push_back(rec.z_cxr);
    out.jsd_values.push_back(kernels::jsd_from_logits(ev.h_shared_ehr, *ev.h_shared_cxr));
  }
  return out;
}

// mean R^2 across the dimensions of one factor
double probe_r2(const std::vector<std::vector<double>>& x_train,
                const std::vector<std::vector<double>>& f_train,
                const std::vector<std::vector<double>>& x_test,
                const std::vector<std::vector<double>>& f_test) {
  std::size_t k = f_train[0].size();
  double acc = 0.0;
  std::vector<double> yt(x_train.size()), ye(x_test.size());
  for (std::size_t dim = 0; dim < k; ++dim) {
    for (std::size_t i = 0; i < x_train.size(); ++i) yt[i] = f_train[i][dim];
    for (std::size_t i = 0; i < x_test.size(); ++i) ye[i] = f_test[i][dim];
    acc += ridge_r2(x_train, yt, x_test, ye);
  }
  return acc / static_cast<double>(k);
}

}  // namespace

ProbeReport disentanglement_probe(DrFuseModel& model, const Dataset& ds,
                                  const std::vector<std::size_t>& train_idx,
                                  const std::vector<std::size_t>& test_idx,
                                  std::uint64_t control_seed) {
  ProbeData train = collect_probe_data(model, ds, train_idx);
  ProbeData test = collect_probe_data(model, ds, test_idx);
  if (train.reps[0].size() < 8 || test.reps[0].size() < 8)
    throw InvalidInputError("disentanglement_probe: too few paired samples with factors");

  ProbeReport rep;
  rep.n_paired_train = train.reps[0].size();
  rep.n_paired_test = test.reps[0].size();
  // Shuffled-target controls average three shuffles: a single small-n shuffle
  // can retain correlation ~1/sqrt(n) with the original pairing, which R^2
  // amplifies to ~2/sqrt(n).
  auto control = [&](const std::vector<std::vector<double>>& x_train,
                     const std::vector<std::vector<double>>& f_train,
                     const std::vector<std::vector<double>>& x_test,
                     const std::vector<std::vector<double>>& f_test, std::uint64_t tag) {
    double acc = 0.0;
    for (std::uint64_t k = 0; k < 3; ++k) {
      Rng rng = Rng::derive(control_seed, tag + 100 * k);
      auto shuffled = f_train;
      rng.shuffle(shuffled);
      acc += probe_r2(x_train, shuffled, x_test, f_test);
    }
    return acc / 3.0;
  };
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t f = 0; f < 3; ++f) {
      rep.r2[r][f] = probe_r2(train.reps[r], train.factors[f], test.reps[r], test.factors[f]);
      rep.r2_control[r][f] =
          control(train.reps[r], train.factors[f], test.reps[r], test.factors[f], r * 3 + f);
    }
  }
  for (std::size_t f = 0; f < 3; ++f) {
    rep.r2_pooled[f] = probe_r2(train.pooled, train.factors[f], test.pooled, test.factors[f]);
    rep.r2_pooled_control[f] =
        control(train.pooled, train.factors[f], test.pooled, test.factors[f], 12 + f);
  }
  double jsd_sum = 0.0;
  for (double v : test.jsd_values) jsd_sum += v;
  rep.mean_jsd_shared = jsd_sum / static_cast<double>(test.jsd_values.size());
  return rep;
}

double attention_agreement(DrFuseModel& model, const Dataset& ds,
                           const std::vector<std::size_t>& idx) {
  std::size_t hits = 0, total = 0;
  for (std::size_t i : idx) {
    const SampleRecord& rec = ds.records[i];
    if (!rec.has_cxr()) continue;
    auto ev = model.evaluate_sample(rec);
    for (std::size_t c = 0; c < model.config().n_classes; ++c) {
      std::size_t argmax_alpha = 0, argmin_loss = 0;
      double best_a = -1.0, best_l = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < 3; ++r) {
        if (ev.fusion.alpha.at(c, r) > best_a) {
          best_a = ev.fusion.alpha.at(c, r);
          argmax_alpha = r;
        }
        double y = rec.labels[c];
        double p = kernels::clamp_prob(ev.fusion.y_aux.at(r, c));
        double l = -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        if (l < best_l) {
          best_l = l;
          argmin_loss = r;
        }
      }
      hits += argmax_alpha == argmin_loss ? 1 : 0;
      ++total;
    }
  }
  if (total == 0) throw InvalidInputError("attention_agreement: no paired samples");
  return static_cast<double>(hits) / static_cast<double>(total);
}

double mean_shared_jsd(DrFuseModel& model, const Dataset& ds,
                       const std::vector<std::size_t>& idx) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i : idx) {
    const SampleRecord& rec = ds.records[i];
    if (!rec.has_cxr()) continue;
    auto ev = model.evaluate_sample(rec);
    acc += kernels::jsd_from_logits(ev.h_shared_ehr, *ev.h_shared_cxr);
    ++n;
  }
  if (n == 0) throw InvalidInputError("mean_shared_jsd: no paired samples");
  return acc / static_cast<double>(n);
}

namespace {

std::vector<std::size_t> matched_subset(const Dataset& ds,
                                        const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> out;
  for (std::size_t i : idx)
    if (ds.records[i].has_cxr()) out.push_back(i);
  return out;
}

struct VariantDef {
  std::string name;
  std::string key;
};

void apply_variant(const std::string& key, ModelConfig& mc, TrainConfig& tc) {
  if (key == "full") return;
  if (key == "wo_disentangled") {
    tc.lambda1 = 0.0;
    tc.lambda2 = 0.0;
    return;
  }
  if (key == "mse_alignment") {
    mc.variant.alignment = AlignmentMode::kMse;
    mc.variant.pooling = PoolingMode::kMeanPool;
    return;
  }
  if (key == "wo_attn_ranking") {
    mc.variant.attn_ranking = false;
    return;
  }
  throw InvalidConfigError("unknown ablation variant: " + key);
}

}  // namespace

std::vector<AblationRow> run_ablations(const Dataset& ds, const SplitIndices& split,
                                       const AblationSpec& spec) {
  static const VariantDef kVariants[] = {
      {"full", "full"},
      {"w/o disentangled", "wo_disentangled"},
      {"MSE alignment", "mse_alignment"},
      {"w/o attn. ranking", "wo_attn_ranking"},
  };
  std::vector<AblationRow> rows;
  for (const auto& v : kVariants) {
    ModelConfig mc = spec.model;
    TrainConfig tc = spec.training;
    apply_variant(v.key, mc, tc);

    std::string meta = std::string("{\"model\":") + serialize_model_config(mc) +
                       ",\"training\":" + serialize_train_config(tc) + "}";
    auto model = make_model(mc, tc.seed);

    bool restored = false;
    std::string ck_path;
    if (!spec.out_dir.empty()) {
      std::filesystem::create_directories(std::filesystem::path(spec.out_dir) / v.key);
      ck_path = (std::filesystem::path(spec.out_dir) / v.key / "checkpoint.bin").string();
      if (std::filesystem::exists(ck_path)) {
        Checkpoint ck = load_checkpoint(ck_path);
        if (ck.meta_json == meta) {
          model->params().load(ck.tensors);
          restored = true;
        }
      }
    }
    if (!restored) {
      std::string log_path =
          ck_path.empty()
              ? std::string()
              : (std::filesystem::path(spec.out_dir) / v.key / "train_log.jsonl").string();
      fit(*model, ds, split.train, split.val, tc, log_path);
      if (!ck_path.empty()) save_checkpoint(ck_path, model->params(), meta);
    }

    AblationRow row;
    row.name = v.name;
    row.key = v.key;
    row.full = evaluate_model(*model, ds, split.test, spec.bootstrap_iters,
                              spec.bootstrap_seed);
    auto matched = matched_subset(ds, split.test);
    if (!matched.empty())
      row.matched =
          evaluate_model(*model, ds, matched, spec.bootstrap_iters, spec.bootstrap_seed);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<BaselineResult> internal_baselines(const Dataset& ds, const SplitIndices& split,
                                               const ModelConfig& base,
                                               const TrainConfig& training,
                                               std::size_t bootstrap_iters,
                                               std::uint64_t bootstrap_seed) {
  std::vector<BaselineResult> out;

  {
    ModelConfig mc = base;
    mc.type = ModelType::kEhrOnly;
    auto model = make_model(mc, training.seed);
    fit(*model, ds, split.train, split.val, training);
    out.push_back({"ehr_only",
                   evaluate_model(*model, ds, split.test, bootstrap_iters, bootstrap_seed)});
  }
  {
    ModelConfig mc = base;
    mc.type = ModelType::kCxrOnly;
    auto model = make_model(mc, training.seed);
    auto paired_train = matched_subset(ds, split.train);
    auto paired_val = matched_subset(ds, split.val);
    if (paired_train.empty())
      throw InvalidInputError("internal_baselines: no paired training samples for cxr_only");
    TrainConfig tc = training;
    tc.modality_dropout = 0.0;  // dropping the image would delete the input
    fit(*model, ds, paired_train, paired_val, tc);
    out.push_back({"cxr_only",
                   evaluate_model(*model, ds, split.test, bootstrap_iters, bootstrap_seed)});
  }
  {
    ModelConfig mc = base;
    mc.type = ModelType::kConcat;
    auto model = make_model(mc, training.seed);
    fit(*model, ds, split.train, split.val, training);
    out.push_back({"concat",
                   evaluate_model(*model, ds, split.test, bootstrap_iters, bootstrap_seed)});
  }
  return out;
}

std::vector<std::array<double, 2>> pca_2d(const std::vector<std::vector<double>>& points) {
  if (points.empty()) return {};
  std::size_t n = points.size(), d = points[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& p : points)
    for (std::size_t j = 0; j < d; ++j) mean[j] += p[j];
  for (auto& m : mean) m /= static_cast<double>(n);

  Tensor cov({d, d});
  for (const auto& p : points)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        cov.at(j, k) += (p[j] - mean[j]) * (p[k] - mean[k]);
  for (std::size_t i = 0; i < cov.size(); ++i) cov[i] /= static_cast<double>(n);

  auto power_iter = [&](const std::vector<double>* deflate) {
    std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d)));
    for (int it = 0; it < 300; ++it) {
      std::vector<double> nv(d, 0.0);
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k) nv[j] += cov.at(j, k) * v[k];
      if (deflate) {
        double proj = 0.0;
        for (std::size_t j = 0; j < d; ++j) proj += nv[j] * (*deflate)[j];
        for (std::size_t j = 0; j < d; ++j) nv[j] -= proj * (*deflate)[j];
      }
      double norm = 0.0;
      for (double x : nv) norm += x * x;
      norm = std::sqrt(norm);
      if (norm < 1e-12) break;
      for (std::size_t j = 0; j < d; ++j) v[j] = nv[j] / norm;
    }
    return v;
  };
  std::vector<double> pc1 = power_iter(nullptr);
  std::vector<double> pc2 = power_iter(&pc1);

  std::vector<std::array<double, 2>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a = 0.0, b = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      a += (points[i][j] - mean[j]) * pc1[j];
      b += (points[i][j] - mean[j]) * pc2[j];
    }
    out[i] = {a, b};
  }
  return out;
}

}  // namespace drfuse
