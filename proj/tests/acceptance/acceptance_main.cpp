// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: runs every gate criterion end to end and prints one
// PASS/FAIL line per criterion. Exit status 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "drfuse/config.hpp"
#include "drfuse/errors.hpp"
#include "drfuse/eval.hpp"
#include "drfuse/kernels.hpp"
#include "drfuse/reports.hpp"
#include "testutil.hpp"

using namespace drfuse;
namespace fs = std::filesystem;
namespace k = drfuse::kernels;

namespace {

struct Check {
  bool ok = true;
  std::string note;
  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      note = what;
    }
  }
};

fs::path g_work;

// ---------------------------------------------------------------- shared fixtures

ModelConfig bench_model_config() {
  ModelConfig cfg;
  cfg.n_classes = 8;
  cfg.n_features = 12;
  cfg.d_model = 32;
  cfg.n_heads = 4;
  cfg.ff_dim = 64;
  cfg.image_size = 16;
  cfg.conv_channels = {8, 16, 32};
  return cfg;
}

TrainConfig bench_train_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.batch_size = 32;
  cfg.max_epochs = 12;
  cfg.patience = 10;
  cfg.seed = seed;
  return cfg;
}

struct BenchData {
  Dataset ds;
  SplitIndices split;
};

// the default synthetic task: n=5000, |C|=8, 40% MCAR, mixed class drivers
BenchData& bench_data() {
  static BenchData data = [] {
    BenchData b;
    SyntheticConfig sc;  // defaults
    b.ds = generate_synthetic(sc);
    b.split = split_dataset(b.ds, {0.7, 0.1, 0.2}, 7);
    return b;
  }();
  return data;
}

ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.n_classes = 3;
  cfg.n_features = 5;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.ff_dim = 16;
  cfg.image_size = 8;
  cfg.conv_channels = {4, 4, 8};
  return cfg;
}

SyntheticConfig tiny_data_config(std::uint64_t seed, std::size_t n, double missing) {
  SyntheticConfig cfg;
  cfg.n_samples = n;
  cfg.n_classes = 3;
  cfg.d_shared = 2;
  cfg.d_ehr_distinct = 2;
  cfg.d_cxr_distinct = 2;
  cfg.seq_len = 6;
  cfg.n_features = 5;
  cfg.image_size = 8;
  cfg.missing_rate = missing;
  cfg.seed = seed;
  return cfg;
}

double macro_of(Model& model, const Dataset& ds, const std::vector<std::size_t>& idx) {
  return evaluate_model(model, ds, idx, 0, 0).macro;
}

// ---------------------------------------------------------------- criterion 1

bool criterion1(Check& c) {
  Rng rng(601);
  for (int trial = 0; trial < 1000; ++trial) {
    double h = rng.uniform(-30.0, 30.0);
    c.expect(std::abs(k::logit_pool_scalar(h, h) - h) < 1e-9, "logit_pool idempotence");
    double h1 = rng.uniform(-30.0, 30.0), h2 = rng.uniform(-30.0, 30.0);
    double p = k::logit_pool_scalar(h1, h2);
    c.expect(p == k::logit_pool_scalar(h2, h1), "logit_pool symmetry");
    c.expect(p >= std::min(h1, h2) - 1e-12 && p <= std::max(h1, h2) + 1e-12,
             "logit_pool betweenness");
  }
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t d = 1 + rng.next_below(8);
    auto h1 = testutil::random_vector(rng, d, -30.0, 30.0);
    auto h2 = testutil::random_vector(rng, d, -30.0, 30.0);
    double v = k::jsd_from_logits(h1, h2);
    c.expect(v >= 0.0 && v <= std::log(2.0) + 1e-12, "jsd bounds");
    c.expect(k::jsd_from_logits(h1, h1) == 0.0, "jsd zero on equal");
    bool clamped_equal = true;
    for (std::size_t i = 0; i < d; ++i)
      clamped_equal = clamped_equal && k::sigmoid_scalar(h1[i]) == k::sigmoid_scalar(h2[i]);
    c.expect(clamped_equal ? v == 0.0 : v > 0.0, "jsd zero iff clamped-equal");
  }
  for (int trial = 0; trial < 1000; ++trial) {
    auto a = testutil::random_vector(rng, 6, -3.0, 3.0);
    auto b = testutil::random_vector(rng, 6, -3.0, 3.0);
    double f = k::orthogonality_penalty(a, b);
    c.expect(f >= 0.0 && f <= 1.0 + 1e-12, "orthogonality range");
  }
  double inf = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 1000; ++trial) {
    auto s = testutil::random_vector(rng, 3, -10.0, 10.0);
    std::vector<double> mask{0.0, 0.0, rng.bernoulli(0.5) ? -inf : 0.0};
    auto alpha = k::masked_scaled_attention(s, mask, 16);
    double sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      c.expect(alpha[i] >= 0.0, "attention nonnegative");
      if (mask[i] != 0.0) c.expect(alpha[i] == 0.0, "masked entry exactly zero");
      sum += alpha[i];
    }
    c.expect(std::abs(sum - 1.0) < 1e-9, "attention row-stochastic");
  }
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t C = 1 + rng.next_below(4);
    Tensor alpha({C, 3});
    Tensor ell({C, 3});
    double eps = rng.uniform(0.0, 0.2);
    for (std::size_t cc = 0; cc < C; ++cc) {
      double a0 = rng.uniform(0.5, 1.0);
      alpha.at(cc, 0) = a0;
      alpha.at(cc, 1) = a0 - eps - rng.uniform(0.001, 0.1);
      alpha.at(cc, 2) = alpha.at(cc, 1) - eps - rng.uniform(0.001, 0.1);
      ell.at(cc, 0) = rng.uniform(0.0, 0.2);
      ell.at(cc, 1) = ell.at(cc, 0) + rng.uniform(0.01, 0.3);
      ell.at(cc, 2) = ell.at(cc, 1) + rng.uniform(0.01, 0.3);
    }
    c.expect(k::margin_rank_attn_loss(alpha, ell, eps) == 0.0,
             "ranking loss zero on correct order");
  }
  return c.ok;
}

// ---------------------------------------------------------------- criterion 2

bool criterion2(Check& c) {
  Rng rng(602);
  // kernel-level analytic gradients vs central differences, 100 points each
  for (int trial = 0; trial < 100; ++trial) {
    double h1 = rng.uniform(-5.0, 5.0), h2 = rng.uniform(-5.0, 5.0);
    auto [g1, g2] = k::logit_pool_grad_scalar(h1, h2);
    auto f = [&](const std::vector<double>& x) { return k::logit_pool_scalar(x[0], x[1]); };
    auto fd = testutil::central_diff(f, {h1, h2});
    c.expect(testutil::grad_rel_err(g1, fd[0]) < 1e-4, "logit_pool grad");
    c.expect(testutil::grad_rel_err(g2, fd[1]) < 1e-4, "logit_pool grad");
  }
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t d = 1 + rng.next_below(6);
    auto h1 = testutil::random_vector(rng, d, -5.0, 5.0);
    auto h2 = testutil::random_vector(rng, d, -5.0, 5.0);
    auto [g1, g2] = k::jsd_from_logits_grad(h1, h2);
    auto f1 = [&](const std::vector<double>& x) { return k::jsd_from_logits(x, h2); };
    auto f2 = [&](const std::vector<double>& x) { return k::jsd_from_logits(h1, x); };
    c.expect(testutil::max_grad_rel_err(g1, testutil::central_diff(f1, h1)) < 1e-4,
             "jsd grad h1");
    c.expect(testutil::max_grad_rel_err(g2, testutil::central_diff(f2, h2)) < 1e-4,
             "jsd grad h2");
  }
  {
    int done = 0;
    while (done < 100) {
      auto a = testutil::random_vector(rng, 5, -5.0, 5.0);
      auto b = testutil::random_vector(rng, 5, -5.0, 5.0);
      if (k::orthogonality_penalty(a, b) < 1e-2) continue;
      auto [ga, gb] = k::orthogonality_penalty_grad(a, b);
      auto fa = [&](const std::vector<double>& x) { return k::orthogonality_penalty(x, b); };
      auto fb = [&](const std::vector<double>& x) { return k::orthogonality_penalty(a, x); };
      c.expect(testutil::max_grad_rel_err(ga, testutil::central_diff(fa, a)) < 1e-4,
               "orthogonality grad");
      c.expect(testutil::max_grad_rel_err(gb, testutil::central_diff(fb, b)) < 1e-4,
               "orthogonality grad");
      ++done;
    }
  }
  double inf = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 100; ++trial) {
    auto s = testutil::random_vector(rng, 3, -4.0, 4.0);
    std::vector<double> mask{0.0, 0.0, rng.bernoulli(0.5) ? -inf : 0.0};
    auto w = testutil::random_vector(rng, 3, -1.0, 1.0);
    std::size_t d = 1 + rng.next_below(64);
    auto alpha = k::masked_scaled_attention(s, mask, d);
    auto ga = k::masked_scaled_attention_vjp(alpha, mask, d, w);
    auto f = [&](const std::vector<double>& x) {
      auto a = k::masked_scaled_attention(x, mask, d);
      return w[0] * a[0] + w[1] * a[1] + w[2] * a[2];
    };
    c.expect(testutil::max_grad_rel_err(ga, testutil::central_diff(f, s)) < 1e-4,
             "masked attention vjp");
  }
  {
    int done = 0;
    while (done < 100) {
      std::size_t C = 1 + rng.next_below(3);
      Tensor alpha({C, 3}), ell({C, 3});
      for (std::size_t i = 0; i < alpha.size(); ++i) {
        alpha[i] = rng.uniform(0.0, 1.0);
        ell[i] = rng.uniform(0.0, 1.0);
      }
      double eps = 0.1;
      bool near_kink = false;
      for (std::size_t cc = 0; cc < C; ++cc)
        for (std::size_t i = 0; i < 3; ++i)
          for (std::size_t j = 0; j < 3; ++j)
            if (i != j && ell.at(cc, i) < ell.at(cc, j) &&
                std::abs(alpha.at(cc, j) - alpha.at(cc, i) + eps) < 1e-3)
              near_kink = true;
      if (near_kink) continue;
      Tensor g = k::margin_rank_attn_loss_grad(alpha, ell, eps);
      auto f = [&](const std::vector<double>& x) {
        return k::margin_rank_attn_loss(Tensor(alpha.shape(), x), ell, eps);
      };
      auto fd = testutil::central_diff(f, alpha.to_vector());
      c.expect(testutil::max_grad_rel_err(g.to_vector(), fd) < 1e-4, "ranking loss grad");
      ++done;
    }
  }
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 1 + rng.next_below(6);
    std::vector<double> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      p[i] = rng.uniform(0.01, 0.99);
    }
    auto g = k::binary_cross_entropy_grad(y, p);
    auto f = [&](const std::vector<double>& x) {
      auto l = k::binary_cross_entropy(y, x);
      double s = 0.0;
      for (double v : l) s += v;
      return s;
    };
    c.expect(testutil::max_grad_rel_err(g, testutil::central_diff(f, p)) < 1e-4, "bce grad");
  }

  // end-to-end: d(total)/d(theta) on 100 sampled parameters, rel err < 1e-3
  Dataset ds = generate_synthetic(tiny_data_config(13, 60, 0.4));
  DrFuseModel model(tiny_model_config(), 6);
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  model.fit_scaler(ds, all);
  LossWeights w{1.0, 1.0, 0.5, 0.1};
  std::vector<SampleRecord> batch;
  for (const auto& r : ds.records) {
    if (r.has_cxr() && batch.size() < 2) batch.push_back(r);
    if (!r.has_cxr() && batch.size() == 2) {
      batch.push_back(r);
      break;
    }
  }
  auto total = [&]() {
    double acc = 0.0;
    for (const auto& rec : batch) {
      Tape t;
      acc += model.forward_loss(t, rec, w).parts.total;
    }
    return acc;
  };
  model.params().zero_grads();
  for (const auto& rec : batch) {
    Tape t;
    SampleGraph sg = model.forward_loss(t, rec, w);
    t.backward(sg.loss);
  }
  std::vector<Parameter*> params;
  for (auto& [name, p] : model.params())
    if (p->trainable) params.push_back(p.get());
  const double step = 1e-5;
  for (int checked = 0; checked < 100; ++checked) {
    Parameter* p = params[rng.next_below(params.size())];
    std::size_t i = rng.next_below(p->value.size());
    double orig = p->value[i];
    p->value[i] = orig + step;
    double fp = total();
    p->value[i] = orig - step;
    double fm = total();
    p->value[i] = orig;
    double fd = (fp - fm) / (2.0 * step);
    c.expect(testutil::grad_rel_err(p->grad[i], fd) < 1e-3, "end-to-end gradient");
  }
  return c.ok;
}

// ---------------------------------------------------------------- criterion 3

double prauc_oracle(const std::vector<double>& scores, const std::vector<double>& labels) {
  std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<double> precision(n), is_pos(n);
  std::size_t hits = 0, n_pos = 0;
  for (std::size_t kk = 0; kk < n; ++kk) {
    is_pos[kk] = labels[order[kk]];
    if (is_pos[kk] == 1.0) ++hits;
    precision[kk] = static_cast<double>(hits) / static_cast<double>(kk + 1);
  }
  for (double y : labels) n_pos += y == 1.0 ? 1 : 0;
  double acc = 0.0;
  for (std::size_t kk = 0; kk < n; ++kk)
    if (is_pos[kk] == 1.0) acc += precision[kk];
  return acc / static_cast<double>(n_pos);
}

bool criterion3(Check& c) {
  std::vector<double> s{0.9, 0.8, 0.3}, y{1, 0, 1};
  c.expect(prauc(s, y) == (1.0 + 2.0 / 3.0) / 2.0, "worked example 5/6");
  Rng rng(603);
  for (int trial = 0; trial < 500; ++trial) {
    std::size_t n = 2 + rng.next_below(49);
    std::vector<double> ss(n), yy(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      ss[i] = std::floor(rng.uniform(0.0, 5.0)) / 5.0;
      yy[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
      any = any || yy[i] == 1.0;
    }
    if (!any) yy[rng.next_below(n)] = 1.0;
    c.expect(prauc(ss, yy) == prauc_oracle(ss, yy), "oracle equivalence");
  }
  return c.ok;
}

// ---------------------------------------------------------------- criterion 4

bool criterion4(Check& c) {
  Dataset ds = generate_synthetic(tiny_data_config(17, 40, 1.0));  // all partial
  DrFuseModel model(tiny_model_config(), 3);
  LossWeights w{1.0, 1.0, 0.5, 0.1};

  // (a) third attention column exactly zero on every CXR-absent sample
  for (std::size_t i = 0; i < 10; ++i) {
    auto ev = model.evaluate_sample(ds.records[i]);
    for (std::size_t cc = 0; cc < 3; ++cc)
      c.expect(ev.fusion.alpha.at(cc, 2) == 0.0, "alpha third column zero");
  }

  // (b) outputs bitwise independent of the masked row contents
  {
    Rng rng(604);
    ParamStore store;
    FusionConfig fc;
    fc.d_model = 4;
    fc.n_classes = 3;
    FusionHead head(fc, store, rng);
    auto run = [&](std::vector<double> third) {
      Tape t;
      FusionGraph g;
      g.mask = FusionHead::mask_for(false);
      g.stacked = ops::stack_rows(
          t, {t.constant(Tensor::row({0.2, -0.7, 1.3, 0.5})),
              t.constant(Tensor::row({-0.4, 0.9, 0.1, -1.2})),
              t.constant(Tensor::row(std::move(third)))});
      head.attend(t, g, t.constant(Tensor::row({0.3, 0.3, -0.5, 0.8})));
      return FusionHead::extract(g);
    };
    FusionOutput zeros = run({0, 0, 0, 0});
    FusionOutput garbage = run({9e5, -123.0, 4e4, -0.5});
    for (std::size_t i = 0; i < zeros.alpha.size(); ++i)
      c.expect(zeros.alpha[i] == garbage.alpha[i], "alpha independent of masked row");
    for (std::size_t i = 0; i < zeros.h_tilde.size(); ++i)
      c.expect(zeros.h_tilde[i] == garbage.h_tilde[i], "h_tilde independent of masked row");
    for (std::size_t cc = 0; cc < 3; ++cc)
      c.expect(zeros.y_hat[cc] == garbage.y_hat[cc], "y_hat independent of masked row");
  }

  // (c) image-encoder gradients exactly zero for a batch of partial samples
  model.params().zero_grads();
  for (std::size_t i = 0; i < 8; ++i) {
    Tape t;
    SampleGraph sg = model.forward_loss(t, ds.records[i], w);
    t.backward(sg.loss);
  }
  for (auto& [name, p] : model.params()) {
    if (name.rfind(DrFuseModel::kImageParamPrefix, 0) != 0) continue;
    for (std::size_t i = 0; i < p->grad.size(); ++i)
      c.expect(p->grad[i] == 0.0, "image gradient exactly zero: " + name);
  }
  return c.ok;
}

// ---------------------------------------------------------------- criterion 5

bool criterion5(Check& c) {
  for (double missing : {1.0, 0.6, 0.0}) {  // 0%, 40%, 100% CXR coverage
    Dataset ds = generate_synthetic(tiny_data_config(23, 120, missing));
    SplitIndices split = split_dataset(ds, {0.7, 0.1, 0.2}, 3);
    DrFuseModel model(tiny_model_config(), 4);
    TrainConfig tc;
    tc.lr = 3e-3;
    tc.batch_size = 16;
    tc.max_epochs = 6;
    tc.seed = 5;
    try {
      FitResult fr = fit(model, ds, split.train, split.val, tc);
      if (missing == 1.0) {
        for (const auto& e : fr.log) {
          c.expect(e.train_loss.jsd == 0.0, "jsd zero in all-partial logs");
          c.expect(e.train_loss.attn == 0.0, "attn zero in all-partial logs");
          c.expect(e.train_loss.aux == 0.0, "aux zero in all-partial logs");
          c.expect(e.train_loss.orth_cxr == 0.0, "orth_cxr zero in all-partial logs");
        }
      }
    } catch (const std::exception& e) {
      c.expect(false, std::string("training failed at coverage run: ") + e.what());
    }
  }
  // per-sample check: a partial sample's breakdown has exact zeros
  Dataset ds = generate_synthetic(tiny_data_config(23, 40, 1.0));
  DrFuseModel model(tiny_model_config(), 4);
  TrainConfig tc;
  LossBreakdown lb = compute_loss(model, {ds.records[0]}, tc);
  c.expect(lb.jsd == 0.0 && lb.attn == 0.0 && lb.aux == 0.0 && lb.orth_cxr == 0.0,
           "partial sample components exactly zero");
  return c.ok;
}

// ---------------------------------------------------------------- criterion 6

struct Bench6State {
  std::unique_ptr<Model> full_seed11;  // reused by criteria 7 and 8
  double seconds = 0.0;
};
Bench6State g_bench6;

bool criterion6(Check& c) {
  auto t0 = std::chrono::steady_clock::now();
  BenchData& data = bench_data();
  int wins = 0;
  std::ostringstream margins;
  for (std::uint64_t seed : {11, 12, 13}) {
    ModelConfig mc = bench_model_config();
    auto drfuse = make_model(mc, seed);
    fit(*drfuse, data.ds, data.split.train, data.split.val, bench_train_config(seed));
    double m_drfuse = macro_of(*drfuse, data.ds, data.split.test);

    ModelConfig ec = bench_model_config();
    ec.type = ModelType::kEhrOnly;
    auto ehr_only = make_model(ec, seed);
    fit(*ehr_only, data.ds, data.split.train, data.split.val, bench_train_config(seed));
    double m_ehr = macro_of(*ehr_only, data.ds, data.split.test);

    double margin = m_drfuse - m_ehr;
    margins << " seed" << seed << ": " << m_drfuse << " vs " << m_ehr << " (+" << margin
            << ")";
    if (margin >= 0.02) ++wins;
    if (seed == 11) g_bench6.full_seed11 = std::move(drfuse);
  }
  g_bench6.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.expect(wins >= 2, "DrFuse beats EHR-only by >= 0.02 in at least 2 of 3 seeds");
  c.expect(g_bench6.seconds < 600.0, "runtime under 10 minutes");
  c.note = margins.str();
  return c.ok;
}

// ---------------------------------------------------------------- criterion 7

bool criterion7(Check& c) {
  BenchData& data = bench_data();
  auto* full = dynamic_cast<DrFuseModel*>(g_bench6.full_seed11.get());
  if (!full) {
    c.expect(false, "criterion 6 must run first");
    return c.ok;
  }
  TrainConfig tc = bench_train_config(11);
  tc.lambda1 = 0.0;
  DrFuseModel no_align(bench_model_config(), 11);
  fit(no_align, data.ds, data.split.train, data.split.val, tc);

  double jsd_full = mean_shared_jsd(*full, data.ds, data.split.test);
  double jsd_ablated = mean_shared_jsd(no_align, data.ds, data.split.test);
  c.expect(jsd_full <= 0.5 * jsd_ablated, "trained JSD at most half of the lambda1=0 run");

  ProbeReport probe =
      disentanglement_probe(*full, data.ds, data.split.train, data.split.test);
  c.expect(probe.r2_pooled[0] > probe.r2[1][0],
           "R2(z_shared | pooled h_shared) above R2(z_shared | h_distinct_ehr)");
  std::ostringstream note;
  note << " jsd " << jsd_full << " vs " << jsd_ablated << "; probe " << probe.r2_pooled[0]
       << " vs " << probe.r2[1][0];
  c.note = note.str();
  return c.ok;
}

// ---------------------------------------------------------------- criterion 8

bool criterion8(Check& c) {
  SyntheticConfig sc;
  sc.n_samples = 2000;
  sc.seed = 21;
  Dataset ds = generate_synthetic(sc);
  SplitIndices split = split_dataset(ds, {0.7, 0.1, 0.2}, 7);

  // 30 epochs without early stopping: the auxiliary heads must converge for
  // their losses to define meaningful orderings
  TrainConfig tc = bench_train_config(11);
  tc.max_epochs = 30;
  tc.patience = 30;

  DrFuseModel full(bench_model_config(), 11);
  fit(full, ds, split.train, split.val, tc);

  ModelConfig ablated_cfg = bench_model_config();
  ablated_cfg.variant.attn_ranking = false;
  DrFuseModel ablated(ablated_cfg, 11);
  fit(ablated, ds, split.train, split.val, tc);

  double agree_full = attention_agreement(full, ds, split.test);
  double agree_ablated = attention_agreement(ablated, ds, split.test);
  c.expect(agree_full > agree_ablated,
           "argmax-alpha / argmin-aux-loss agreement above the ablation");
  std::ostringstream note;
  note << " agreement " << agree_full << " vs " << agree_ablated;
  c.note = note.str();
  return c.ok;
}

// ---------------------------------------------------------------- criterion 9

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

bool criterion9(Check& c) {
  fs::path dir = g_work / "repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string cli = DRFUSE_CLI_PATH;
  auto run = [&](const std::string& args) {
    std::string cmd = cli + " " + args + " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
  };
  c.expect(run("generate --preset smoke --out " + (dir / "data").string()) == 0,
           "generate succeeds");
  nlohmann::json cfg;
  cfg["dataset"]["manifest"] = (dir / "data" / "manifest.json").string();
  cfg["model"] = {{"type", "drfuse"}, {"n_classes", 4}, {"n_features", 6}, {"d_model", 8},
                  {"n_heads", 2},     {"ff_dim", 16},   {"image_size", 8},
                  {"conv_channels", {4, 4, 8}}};
  cfg["training"] = {{"lr", 0.003}, {"batch_size", 16}, {"max_epochs", 3}, {"seed", 5}};
  cfg["eval"] = {{"bootstrap_iters", 100}};
  {
    std::ofstream out(dir / "exp.json");
    out << cfg.dump(2);
  }
  std::string base = "train --config " + (dir / "exp.json").string();
  c.expect(run(base + " --out " + (dir / "run1").string()) == 0, "first training run");
  c.expect(run(base + " --out " + (dir / "run2").string()) == 0, "second training run");
  c.expect(slurp(dir / "run1" / "checkpoint.bin") == slurp(dir / "run2" / "checkpoint.bin"),
           "checkpoints bitwise identical");

  std::string ck = (dir / "run1" / "checkpoint.bin").string();
  std::string eval_cmd =
      "evaluate --config " + (dir / "exp.json").string() + " --checkpoint " + ck;
  c.expect(run(eval_cmd + " --out " + (dir / "ev1").string()) == 0, "first evaluation");
  c.expect(run(eval_cmd + " --out " + (dir / "ev2").string()) == 0, "second evaluation");
  for (const char* f : {"summary.json", "per_class.csv", "alpha.csv", "probes.json"})
    c.expect(slurp(dir / "ev1" / f) == slurp(dir / "ev2" / f),
             std::string("report bytes identical: ") + f);
  return c.ok;
}

// ---------------------------------------------------------------- criterion 10

bool criterion10(Check& c) {
  Rng rng(610);
  int contained = 0;
  const int kConfigs = 100;
  for (int trial = 0; trial < kConfigs; ++trial) {
    std::size_t n = 60 + rng.next_below(140);
    std::size_t n_classes = 1 + rng.next_below(3);
    double quality = rng.uniform(0.5, 3.0);
    std::vector<std::vector<double>> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i].resize(n_classes);
      y[i].resize(n_classes);
      for (std::size_t cc = 0; cc < n_classes; ++cc) {
        double z = rng.gaussian();
        s[i][cc] = 1.0 / (1.0 + std::exp(-quality * z));
        y[i][cc] = rng.bernoulli(1.0 / (1.0 + std::exp(-z))) ? 1.0 : 0.0;
      }
    }
    bool any = false;
    for (const auto& row : y)
      for (double v : row) any = any || v == 1.0;
    if (!any) y[0][0] = 1.0;
    double point = macro_prauc(s, y).value;
    BootstrapCi ci = bootstrap_ci(s, y, 1000, 0.95, 7000 + trial);
    if (point >= ci.lo && point <= ci.hi) ++contained;
  }
  c.expect(contained >= 99, "point estimate inside the CI in >= 99 of 100 configurations");

  auto make = [&](std::size_t n, std::uint64_t seed) {
    Rng r2(seed);
    std::vector<std::vector<double>> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double z = r2.gaussian();
      s[i] = {1.0 / (1.0 + std::exp(-z))};
      y[i] = {r2.bernoulli(1.0 / (1.0 + std::exp(-z))) ? 1.0 : 0.0};
    }
    return std::make_pair(s, y);
  };
  auto [s200, y200] = make(200, 40);
  auto [s2k, y2k] = make(2000, 41);
  BootstrapCi small = bootstrap_ci(s200, y200, 1000, 0.95, 9);
  BootstrapCi large = bootstrap_ci(s2k, y2k, 1000, 0.95, 9);
  c.expect(large.hi - large.lo < small.hi - small.lo, "CI width shrinks from n=200 to n=2000");
  std::ostringstream note;
  note << " contained " << contained << "/100; widths " << small.hi - small.lo << " -> "
       << large.hi - large.lo;
  c.note = note.str();
  return c.ok;
}

}  // namespace

int main() {
  g_work = fs::temp_directory_path() / "drfuse_acceptance";
  fs::create_directories(g_work);

  struct Criterion {
    int id;
    const char* name;
    std::function<bool(Check&)> run;
  };
  const Criterion criteria[] = {
      {1, "kernel identity suite (1000 random instances per property)", criterion1},
      {2, "gradient oracle (kernels < 1e-4, end-to-end < 1e-3)", criterion2},
      {3, "PRAUC oracle equivalence (500 instances, exact)", criterion3},
      {4, "missing-modality contract (mask, invariance, zero gradients)", criterion4},
      {5, "partial-sample objective regime at 0%/40%/100% CXR coverage", criterion5},
      {6, "synthetic end-to-end: DrFuse over EHR-only by 0.02 in 2 of 3 seeds", criterion6},
      {7, "alignment effect: JSD halved and shared-factor probe ordering", criterion7},
      {8, "ranking-loss effect on attention/aux-loss agreement", criterion8},
      {9, "reproducibility: bitwise checkpoints and reports", criterion9},
      {10, "bootstrap sanity: containment and width shrinkage", criterion10},
  };

  bool all_ok = true;
  for (const auto& cr : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Check check;
    bool ok = false;
    try {
      ok = cr.run(check);
    } catch (const std::exception& e) {
      check.ok = false;
      check.note = std::string("exception: ") + e.what();
    }
    ok = ok && check.ok;
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << cr.id << ": " << cr.name
              << " (" << secs << "s)";
    if (!ok && !check.note.empty()) std::cout << " -- " << check.note;
    if (ok && !check.note.empty()) std::cout << " --" << check.note;
    std::cout << std::endl;
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
