// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "drfuse/encoders.hpp"
#include "drfuse/errors.hpp"
#include "drfuse/ops.hpp"
#include "testutil.hpp"

using namespace drfuse;

namespace {

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t({r, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

EhrEncoderConfig small_ehr_config() {
  EhrEncoderConfig cfg;
  cfg.n_features = 3;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.ff_dim = 16;
  cfg.max_seq_len = 256;
  return cfg;
}

}  // namespace

TEST_CASE("positional_encoding: worked values and range") {
  Tensor pe = positional_encoding(4, 6);
  // t = 0: sin columns are 0, cos columns are 1
  for (std::size_t k = 0; 2 * k < 6; ++k) {
    CHECK(pe.at(0, 2 * k) == 0.0);
    CHECK(pe.at(0, 2 * k + 1) == 1.0);
  }
  // t = 1, k = 0: sin(1)
  Tensor pe4 = positional_encoding(2, 4);
  CHECK(pe4.at(1, 0) == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
  CHECK(pe4.at(1, 0) == doctest::Approx(0.841471).epsilon(1e-6));
  for (std::size_t i = 0; i < pe.size(); ++i) {
    CHECK(pe[i] <= 1.0);
    CHECK(pe[i] >= -1.0);
  }
  CHECK_THROWS_AS(positional_encoding(4, 5), InvalidConfigError);
}

TEST_CASE("encode_ehr: determinism and shape contract") {
  Rng rng(31);
  ParamStore store;
  EhrEncoder enc(small_ehr_config(), store, rng);

  Tensor x = random_matrix(rng, 5, 3);
  Tape t1, t2;
  auto [s1, d1] = enc.encode(t1, x);
  auto [s2, d2] = enc.encode(t2, x);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(s1->value[i] == s2->value[i]);  // bitwise
    CHECK(d1->value[i] == d2->value[i]);
  }

  for (std::size_t t_len : {1, 48, 200}) {
    Tape t;
    auto [hs, hd] = enc.encode(t, random_matrix(rng, t_len, 3));
    CHECK(hs->value.cols() == 8);
    CHECK(hd->value.cols() == 8);
    CHECK(hs->value.rows() == 1);
  }
}

TEST_CASE("encode_ehr: input validation") {
  Rng rng(32);
  ParamStore store;
  EhrEncoder enc(small_ehr_config(), store, rng);
  Tape t;
  CHECK_THROWS_AS(enc.encode(t, Tensor({0, 3})), InvalidInputError);
  Tensor bad({2, 3});
  bad[0] = std::nan("");
  CHECK_THROWS_AS(enc.encode(t, bad), InvalidInputError);
  CHECK_THROWS_AS(enc.encode(t, Tensor({2, 5})), ShapeError);
}

TEST_CASE("encode_ehr: repeated rows pool to the T=1 output without positions") {
  Rng rng(33);
  ParamStore store;
  auto cfg = small_ehr_config();
  cfg.use_positional = false;  // diagnostic mode
  EhrEncoder enc(cfg, store, rng);

  Tensor one = random_matrix(rng, 1, 3);
  Tensor repeated({8, 3});
  for (std::size_t t = 0; t < 8; ++t)
    for (std::size_t j = 0; j < 3; ++j) repeated.at(t, j) = one.at(0, j);

  Tape t1, t2;
  auto [s1, d1] = enc.encode(t1, one);
  auto [s8, d8] = enc.encode(t2, repeated);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(s1->value[i] == doctest::Approx(s8->value[i]).epsilon(1e-9));
    CHECK(d1->value[i] == doctest::Approx(d8->value[i]).epsilon(1e-9));
  }
}

TEST_CASE("shared first layer: one parameter object, gradients sum over branches") {
  Rng rng(34);
  ParamStore store;
  EhrEncoder enc(small_ehr_config(), store, rng);
  Tensor x = random_matrix(rng, 4, 3);
  std::vector<double> pa{1, -1, 0.5, 2, -0.5, 1, 0, 1};
  std::vector<double> pb{0.5, 1, -2, 1, 1, -1, 2, 0};

  auto run = [&](bool use_shared, bool use_distinct) {
    store.zero_grads();
    Tape t;
    auto [hs, hd] = enc.encode(t, x);
    std::vector<Var> terms;
    if (use_shared) terms.push_back(ops::bce_sum(t, ops::sigmoid(t, ops::hadamard(t, hs, t.constant(Tensor({1, 8}, pa)))), {1, 0, 1, 0, 1, 0, 1, 0}));
    if (use_distinct) terms.push_back(ops::bce_sum(t, ops::sigmoid(t, ops::hadamard(t, hd, t.constant(Tensor({1, 8}, pb)))), {0, 1, 0, 1, 0, 1, 0, 1}));
    t.backward(ops::add_scalars(t, terms));
    std::map<std::string, Tensor> grads;
    for (auto& [name, p] : store) grads.emplace(name, p->grad);
    return grads;
  };

  auto g_shared = run(true, false);
  auto g_distinct = run(false, true);
  auto g_both = run(true, true);

  // the first layer is a single parameter set; its gradient under the joint
  // objective is the sum of the two branch contributions
  for (Parameter* p : enc.first_layer().parameters()) {
    const Tensor& ga = g_shared.at(p->name);
    const Tensor& gb = g_distinct.at(p->name);
    const Tensor& gt = g_both.at(p->name);
    for (std::size_t i = 0; i < gt.size(); ++i)
      CHECK(gt[i] == doctest::Approx(ga[i] + gb[i]).epsilon(1e-9));
  }
  // and the branches genuinely diverge after layer 1
  Tape t;
  auto [hs, hd] = enc.encode(t, x);
  bool differ = false;
  for (std::size_t i = 0; i < 8; ++i) differ = differ || hs->value[i] != hd->value[i];
  CHECK(differ);
}

TEST_CASE("encode_image: ABSENT passthrough, determinism, shapes") {
  Rng rng(35);
  ParamStore store;
  ImageEncoderConfig cfg;
  cfg.image_size = 8;
  cfg.d_model = 8;
  cfg.conv_channels = {4, 8, 8};
  ConvImageEncoder enc(cfg, store, rng);

  Tape t;
  CHECK_FALSE(enc.encode(t, std::nullopt).has_value());

  Tensor img({1, 8, 8});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = rng.uniform(0.0, 1.0);
  Tape t1, t2;
  auto o1 = enc.encode(t1, img);
  auto o2 = enc.encode(t2, img);
  REQUIRE(o1.has_value());
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(o1->first->value[i] == o2->first->value[i]);
    CHECK(o1->second->value[i] == o2->second->value[i]);
  }
  CHECK(o1->first->value.cols() == 8);
  CHECK(o1->second->value.cols() == 8);

  Tensor wrong({1, 5, 5});
  Tape t3;
  CHECK_THROWS_AS(enc.encode(t3, wrong), InvalidInputError);
  Tensor nonfinite({1, 8, 8});
  nonfinite[3] = std::numeric_limits<double>::infinity();
  Tape t4;
  CHECK_THROWS_AS(enc.encode(t4, nonfinite), InvalidInputError);

  // output length d for any configured grid size
  for (std::size_t size : {12, 20}) {
    ImageEncoderConfig c2 = cfg;
    c2.image_size = size;
    ParamStore s2;
    ConvImageEncoder e2(c2, s2, rng);
    Tensor grid({1, size, size});
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = rng.uniform(0.0, 1.0);
    Tape t5;
    auto o = e2.encode(t5, grid);
    CHECK(o->first->value.cols() == 8);
    CHECK(o->second->value.cols() == 8);
  }
}

TEST_CASE("encoder outputs stay finite over random trials") {
  Rng rng(36);
  ParamStore store;
  auto cfg = small_ehr_config();
  EhrEncoder ehr(cfg, store, rng);
  ImageEncoderConfig icfg;
  icfg.image_size = 8;
  icfg.d_model = 8;
  icfg.conv_channels = {4, 4, 8};
  ConvImageEncoder img(icfg, store, rng);

  for (int trial = 0; trial < 1000; ++trial) {
    Tape t;
    std::size_t t_len = 1 + rng.next_below(6);
    auto [hs, hd] = ehr.encode(t, random_matrix(rng, t_len, 3, -4.0, 4.0));
    CHECK(hs->value.all_finite());
    CHECK(hd->value.all_finite());
    Tensor grid({1, 8, 8});
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = rng.uniform(0.0, 1.0);
    auto o = img.encode(t, grid);
    CHECK(o->first->value.all_finite());
    CHECK(o->second->value.all_finite());
  }
}
