// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "drfuse/errors.hpp"
#include "drfuse/kernels.hpp"
#include "testutil.hpp"

using namespace drfuse;
namespace k = drfuse::kernels;

namespace {

// Independent reference for logit pooling: sigma^-1((sigma(h1)+sigma(h2))/2)
// evaluated through both tails so it stays accurate for |h| up to ~30.
double logit_pool_reference(double h1, double h2) {
  auto sig = [](double h) { return h >= 0.0 ? 1.0 / (1.0 + std::exp(-h))
                                            : std::exp(h) / (1.0 + std::exp(h)); };
  double m = 0.5 * (sig(h1) + sig(h2));
  double mc = 0.5 * (sig(-h1) + sig(-h2));
  return std::log(m) - std::log(mc);
}

// Brute-force four-term KL sum for one Bernoulli dimension, clamped the same
// way the contract declares.
double jsd_dim_reference(double p, double q) {
  p = std::clamp(p, 1e-7, 1.0 - 1e-7);
  q = std::clamp(q, 1e-7, 1.0 - 1e-7);
  double m = 0.5 * (p + q);
  double kl_pm = p * std::log(p / m) + (1.0 - p) * std::log((1.0 - p) / (1.0 - m));
  double kl_qm = q * std::log(q / m) + (1.0 - q) * std::log((1.0 - q) / (1.0 - m));
  return 0.5 * (kl_pm + kl_qm);
}

}  // namespace

TEST_CASE("sigmoid: worked values and clamping") {
  CHECK(k::sigmoid_scalar(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(k::sigmoid_scalar(40.0) == 1.0 - 1e-7);  // saturation hits the declared clamp
  CHECK(k::sigmoid_scalar(-40.0) == 1e-7);
  CHECK(k::sigmoid_scalar(std::log(4.0)) == doctest::Approx(0.8).epsilon(1e-12));
  std::vector<double> bad{1.0, std::nan("")};
  CHECK_THROWS_AS(k::sigmoid(bad), InvalidInputError);
}

TEST_CASE("logit: worked values, domain error, inverse pair") {
  CHECK(k::logit_scalar(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(k::logit_scalar(0.8) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(k::logit_scalar(0.8) == doctest::Approx(1.386294).epsilon(1e-6));
  std::vector<double> bad{1.5};
  CHECK_THROWS_AS(k::logit(bad), InvalidInputError);
  std::vector<double> neg{-0.1};
  CHECK_THROWS_AS(k::logit(neg), InvalidInputError);

  // sigmoid(logit(p)) = p on [1e-6, 1-1e-6] to 1e-9.
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    double p = rng.uniform(1e-6, 1.0 - 1e-6);
    worst = std::max(worst, std::abs(k::sigmoid_scalar(k::logit_scalar(p)) - p));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("logit_pool: worked values") {
  CHECK(k::logit_pool_scalar(0.0, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(k::logit_pool_scalar(1.5, 1.5) == doctest::Approx(1.5).epsilon(1e-12));
  // sigma values 0.8 and 0.4 average to 0.6; logit(0.6) = ln 1.5.
  double got = k::logit_pool_scalar(std::log(4.0), std::log(2.0 / 3.0));
  CHECK(got == doctest::Approx(std::log(1.5)).epsilon(1e-12));
  CHECK(got == doctest::Approx(0.405465).epsilon(1e-6));
  std::vector<double> a{0.0, 1.0};
  std::vector<double> b{0.0};
  CHECK_THROWS_AS(k::logit_pool(a, b), ShapeError);
}

TEST_CASE("logit_pool: idempotence, symmetry, betweenness, reference agreement") {
  Rng rng(202);
  for (int trial = 0; trial < 1000; ++trial) {
    double h = rng.uniform(-30.0, 30.0);
    CHECK(std::abs(k::logit_pool_scalar(h, h) - h) < 1e-9);

    double h1 = rng.uniform(-30.0, 30.0);
    double h2 = rng.uniform(-30.0, 30.0);
    double p = k::logit_pool_scalar(h1, h2);
    // bitwise symmetry of the formula
    CHECK(p == k::logit_pool_scalar(h2, h1));
    CHECK(p >= std::min(h1, h2) - 1e-12);
    CHECK(p <= std::max(h1, h2) + 1e-12);
    CHECK(std::abs(p - logit_pool_reference(h1, h2)) < 1e-9);
  }
}

TEST_CASE("logit_pool: analytic gradient vs central differences") {
  Rng rng(203);
  for (int trial = 0; trial < 100; ++trial) {
    double h1 = rng.uniform(-5.0, 5.0);
    double h2 = rng.uniform(-5.0, 5.0);
    auto [g1, g2] = k::logit_pool_grad_scalar(h1, h2);
    auto f = [&](const std::vector<double>& x) { return k::logit_pool_scalar(x[0], x[1]); };
    auto fd = testutil::central_diff(f, {h1, h2});
    CHECK(testutil::grad_rel_err(g1, fd[0]) < 1e-4);
    CHECK(testutil::grad_rel_err(g2, fd[1]) < 1e-4);
  }
}

TEST_CASE("jsd_from_logits: worked values against the brute-force KL oracle") {
  std::vector<double> h{0.3, -1.2, 4.0};
  CHECK(k::jsd_from_logits(h, h) == 0.0);

  // Saturated pair: the probability clamp bounds how close to ln 2 the value
  // can get; the oracle carries the same clamp.
  std::vector<double> hp{20.0}, hm{-20.0};
  double sat = k::jsd_from_logits(hp, hm);
  double sat_oracle = jsd_dim_reference(1.0 / (1.0 + std::exp(-20.0)),
                                        1.0 / (1.0 + std::exp(20.0)));
  CHECK(sat == doctest::Approx(sat_oracle).epsilon(1e-12));
  CHECK(sat == doctest::Approx(std::log(2.0)).epsilon(5e-6));
  CHECK(sat <= std::log(2.0));

  // logit(0.75) vs logit(0.25): four-term sum gives 0.130812.
  std::vector<double> h1{k::logit_scalar(0.75)}, h2{k::logit_scalar(0.25)};
  double v = k::jsd_from_logits(h1, h2);
  CHECK(v == doctest::Approx(jsd_dim_reference(0.75, 0.25)).epsilon(1e-12));
  CHECK(v == doctest::Approx(0.130812).epsilon(1e-5));

  std::vector<double> a{0.0, 1.0}, b{0.0};
  CHECK_THROWS_AS(k::jsd_from_logits(a, b), ShapeError);
}

TEST_CASE("jsd_from_logits: bounds, symmetry, zero-iff-equal") {
  Rng rng(303);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t d = 1 + rng.next_below(8);
    auto h1 = testutil::random_vector(rng, d, -30.0, 30.0);
    auto h2 = testutil::random_vector(rng, d, -30.0, 30.0);
    double v = k::jsd_from_logits(h1, h2);
    CHECK(v >= 0.0);
    CHECK(v <= std::log(2.0) + 1e-12);
    CHECK(v == doctest::Approx(k::jsd_from_logits(h2, h1)).epsilon(1e-12));
    // mean over dims of the dimension-wise oracle
    double oracle = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      oracle += jsd_dim_reference(k::sigmoid_scalar(h1[i]), k::sigmoid_scalar(h2[i]));
    oracle /= static_cast<double>(d);
    CHECK(v == doctest::Approx(oracle).epsilon(1e-10));
    // zero iff the clamped probabilities agree
    bool clamped_equal = true;
    for (std::size_t i = 0; i < d; ++i)
      clamped_equal = clamped_equal && k::sigmoid_scalar(h1[i]) == k::sigmoid_scalar(h2[i]);
    if (clamped_equal)
      CHECK(v == 0.0);
    else
      CHECK(v > 0.0);
    // equal inputs give exactly zero
    CHECK(k::jsd_from_logits(h1, h1) == 0.0);
  }
  // both saturated past the clamp on the same side: clamped-equal, so zero
  std::vector<double> s1{20.0}, s2{25.0};
  CHECK(k::jsd_from_logits(s1, s2) == 0.0);
}

TEST_CASE("jsd_from_logits: analytic gradient vs central differences") {
  Rng rng(304);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t d = 1 + rng.next_below(6);
    auto h1 = testutil::random_vector(rng, d, -5.0, 5.0);
    auto h2 = testutil::random_vector(rng, d, -5.0, 5.0);
    auto [g1, g2] = k::jsd_from_logits_grad(h1, h2);
    auto f1 = [&](const std::vector<double>& x) { return k::jsd_from_logits(x, h2); };
    auto f2 = [&](const std::vector<double>& x) { return k::jsd_from_logits(h1, x); };
    CHECK(testutil::max_grad_rel_err(g1, testutil::central_diff(f1, h1)) < 1e-4);
    CHECK(testutil::max_grad_rel_err(g2, testutil::central_diff(f2, h2)) < 1e-4);
  }
}

TEST_CASE("orthogonality_penalty: worked values and range") {
  std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0}, d11{1.0, 1.0};
  CHECK(k::orthogonality_penalty(e1, e2) == doctest::Approx(0.0).epsilon(1e-12));
  std::vector<double> v{0.3, -2.0, 0.7};
  std::vector<double> nv{-0.3, 2.0, -0.7};
  CHECK(k::orthogonality_penalty(v, v) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(k::orthogonality_penalty(v, nv) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(k::orthogonality_penalty(e1, d11) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(k::orthogonality_penalty(e1, d11) == doctest::Approx(0.707107).epsilon(1e-6));
  // zero-norm input never divides by zero
  std::vector<double> z{0.0, 0.0};
  CHECK(k::orthogonality_penalty(z, e1) == 0.0);

  Rng rng(404);
  for (int trial = 0; trial < 1000; ++trial) {
    auto a = testutil::random_vector(rng, 6, -3.0, 3.0);
    auto b = testutil::random_vector(rng, 6, -3.0, 3.0);
    double f = k::orthogonality_penalty(a, b);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0 + 1e-12);
    CHECK(f == k::orthogonality_penalty(b, a));
  }
}

TEST_CASE("orthogonality_penalty: analytic gradient vs central differences") {
  Rng rng(405);
  int done = 0;
  while (done < 100) {
    auto a = testutil::random_vector(rng, 5, -5.0, 5.0);
    auto b = testutil::random_vector(rng, 5, -5.0, 5.0);
    // keep clear of the |.| kink at <a,b> = 0
    if (k::orthogonality_penalty(a, b) < 1e-2) continue;
    auto [ga, gb] = k::orthogonality_penalty_grad(a, b);
    auto fa = [&](const std::vector<double>& x) { return k::orthogonality_penalty(x, b); };
    auto fb = [&](const std::vector<double>& x) { return k::orthogonality_penalty(a, x); };
    CHECK(testutil::max_grad_rel_err(ga, testutil::central_diff(fa, a)) < 1e-4);
    CHECK(testutil::max_grad_rel_err(gb, testutil::central_diff(fb, b)) < 1e-4);
    ++done;
  }
}

TEST_CASE("masked_scaled_attention: worked values") {
  double inf = std::numeric_limits<double>::infinity();
  std::vector<double> none{0.0, 0.0, 0.0};
  std::vector<double> third{0.0, 0.0, -inf};

  auto uniform = k::masked_scaled_attention(std::vector<double>{1.0, 1.0, 1.0}, none, 4);
  for (double a : uniform) CHECK(a == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  auto halves = k::masked_scaled_attention(std::vector<double>{1.0, 1.0, 1.0}, third, 4);
  CHECK(halves[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(halves[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(halves[2] == 0.0);

  // direct softmax enumeration at d=1
  std::vector<double> s{1.0, 2.0, 3.0};
  double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  auto got = k::masked_scaled_attention(s, none, 1);
  CHECK(got[0] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-12));
  CHECK(got[1] == doctest::Approx(std::exp(2.0) / z).epsilon(1e-12));
  CHECK(got[2] == doctest::Approx(std::exp(3.0) / z).epsilon(1e-12));
  CHECK(got[0] == doctest::Approx(0.090031).epsilon(1e-5));
  CHECK(got[1] == doctest::Approx(0.244728).epsilon(1e-5));
  CHECK(got[2] == doctest::Approx(0.665241).epsilon(1e-5));

  std::vector<double> all{-inf, -inf, -inf};
  CHECK_THROWS_AS(k::masked_scaled_attention(s, all, 4), InvalidMaskError);
  std::vector<double> badmask{0.0, 1.0, 0.0};
  CHECK_THROWS_AS(k::masked_scaled_attention(s, badmask, 4), InvalidMaskError);
}

TEST_CASE("masked_scaled_attention: row-stochastic, exact zeros, shift invariance") {
  Rng rng(505);
  double inf = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 1000; ++trial) {
    auto s = testutil::random_vector(rng, 3, -10.0, 10.0);
    std::vector<double> mask(3, 0.0);
    std::size_t n_masked = rng.next_below(3);  // at most 2 of 3
    for (std::size_t i = 0; i < n_masked; ++i) mask[rng.next_below(3)] = -inf;
    bool any = false;
    for (double m : mask) any = any || m == 0.0;
    if (!any) mask[0] = 0.0;

    auto alpha = k::masked_scaled_attention(s, mask, 16);
    double sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(alpha[i] >= 0.0);
      if (mask[i] != 0.0) CHECK(alpha[i] == 0.0);
      sum += alpha[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);

    double c = rng.uniform(-20.0, 20.0);
    auto shifted = s;
    for (auto& x : shifted) x += c;
    auto alpha2 = k::masked_scaled_attention(shifted, mask, 16);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(alpha[i] - alpha2[i]) < 1e-9);
  }
}

TEST_CASE("masked_scaled_attention: vjp vs central differences") {
  Rng rng(506);
  double inf = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 100; ++trial) {
    auto s = testutil::random_vector(rng, 3, -4.0, 4.0);
    std::vector<double> mask{0.0, 0.0, rng.bernoulli(0.5) ? -inf : 0.0};
    auto w = testutil::random_vector(rng, 3, -1.0, 1.0);  // random cotangent
    std::size_t d = 1 + rng.next_below(64);
    auto alpha = k::masked_scaled_attention(s, mask, d);
    auto ga = k::masked_scaled_attention_vjp(alpha, mask, d, w);
    auto f = [&](const std::vector<double>& x) {
      auto a = k::masked_scaled_attention(x, mask, d);
      double acc = 0.0;
      for (std::size_t i = 0; i < 3; ++i) acc += w[i] * a[i];
      return acc;
    };
    CHECK(testutil::max_grad_rel_err(ga, testutil::central_diff(f, s)) < 1e-4);
  }
}

TEST_CASE("margin_rank_attn_loss: worked values") {
  // Attention already follows the inverse order of the losses with margin.
  Tensor alpha1({1, 3}, {0.1, 0.3, 0.6});
  Tensor ell1({1, 3}, {0.3, 0.2, 0.1});
  CHECK(k::margin_rank_attn_loss(alpha1, ell1, 0.1) == 0.0);

  // Three active ordered pairs: (0.3-0.2+0.1) + (0.5-0.2+0.1) + (0.5-0.3+0.1).
  Tensor alpha2({1, 3}, {0.2, 0.3, 0.5});
  Tensor ell2({1, 3}, {0.1, 0.2, 0.3});
  CHECK(k::margin_rank_attn_loss(alpha2, ell2, 0.1) == doctest::Approx(0.45).epsilon(1e-12));

  // Ties never activate a pair.
  Tensor alpha3({2, 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3});
  Tensor ell3({2, 3}, {0.4, 0.4, 0.4, 0.1, 0.1, 0.1});
  CHECK(k::margin_rank_attn_loss(alpha3, ell3, 0.1) == 0.0);

  CHECK_THROWS_AS(k::margin_rank_attn_loss(alpha1, ell1, -0.5), InvalidConfigError);
  Tensor wrong({2, 3});
  CHECK_THROWS_AS(k::margin_rank_attn_loss(alpha1, wrong, 0.1), ShapeError);
}

TEST_CASE("margin_rank_attn_loss: zero whenever order is respected with margin") {
  Rng rng(606);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t C = 1 + rng.next_below(4);
    Tensor alpha({C, 3});
    Tensor ell({C, 3});
    double eps = rng.uniform(0.0, 0.2);
    for (std::size_t c = 0; c < C; ++c) {
      // alpha strictly decreasing with gaps >= eps, losses strictly increasing
      double a0 = rng.uniform(0.5, 1.0);
      alpha.at(c, 0) = a0;
      alpha.at(c, 1) = a0 - eps - rng.uniform(0.0, 0.1);
      alpha.at(c, 2) = alpha.at(c, 1) - eps - rng.uniform(0.0, 0.1);
      ell.at(c, 0) = rng.uniform(0.0, 0.2);
      ell.at(c, 1) = ell.at(c, 0) + rng.uniform(0.01, 0.3);
      ell.at(c, 2) = ell.at(c, 1) + rng.uniform(0.01, 0.3);
    }
    CHECK(k::margin_rank_attn_loss(alpha, ell, eps) == 0.0);
  }
}

TEST_CASE("margin_rank_attn_loss: gradient vs central differences") {
  Rng rng(607);
  int done = 0;
  while (done < 100) {
    std::size_t C = 1 + rng.next_below(3);
    Tensor alpha({C, 3});
    Tensor ell({C, 3});
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      alpha[i] = rng.uniform(0.0, 1.0);
      ell[i] = rng.uniform(0.0, 1.0);
    }
    double eps = 0.1;
    // keep away from hinge kinks so the finite difference is clean
    bool near_kink = false;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
          if (i != j && ell.at(c, i) < ell.at(c, j) &&
              std::abs(alpha.at(c, j) - alpha.at(c, i) + eps) < 1e-3)
            near_kink = true;
    if (near_kink) continue;

    Tensor g = k::margin_rank_attn_loss_grad(alpha, ell, eps);
    auto f = [&](const std::vector<double>& x) {
      Tensor a(alpha.shape(), x);
      return k::margin_rank_attn_loss(a, ell, eps);
    };
    auto fd = testutil::central_diff(f, alpha.to_vector());
    CHECK(testutil::max_grad_rel_err(g.to_vector(), fd) < 1e-4);
    ++done;
  }
}

TEST_CASE("binary_cross_entropy: worked values and gradient") {
  std::vector<double> y1{1.0}, nearly{1.0 - 1e-7};
  CHECK(k::binary_cross_entropy(y1, nearly)[0] == doctest::Approx(1e-7).epsilon(1e-2));
  std::vector<double> half{0.5};
  CHECK(k::binary_cross_entropy(y1, half)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  std::vector<double> y0{0.0};
  CHECK(k::binary_cross_entropy(y0, half)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  std::vector<double> two{0.5, 0.5};
  CHECK_THROWS_AS(k::binary_cross_entropy(y1, two), ShapeError);

  Rng rng(707);
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
    CHECK(testutil::max_grad_rel_err(g, testutil::central_diff(f, p)) < 1e-4);
  }
}
