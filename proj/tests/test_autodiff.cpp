#include "doctest.h"

#include <cmath>

#include "ffgt/gradcheck.hpp"
#include "ffgt/tape.hpp"
#include "test_util.hpp"

using namespace ffgt;

TEST_CASE("matmul matches a naive triple loop") {
  Rng rng(42);
  const Tensor a = random_tensor(rng, {2, 3}), b = random_tensor(rng, {3, 2});
  Tape tape;
  const Tensor& c = tape.value(tape.matmul(tape.leaf(a), tape.leaf(b)));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double expect = 0.0;
      for (std::size_t k = 0; k < 3; ++k) expect += a.at(i, k) * b.at(k, j);
      CHECK(c.at(i, j) == doctest::Approx(expect).epsilon(1e-14));
    }

  // identity * X = X
  Tensor eye = Tensor::zeros({3, 3});
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  const Tensor& x2 = tape.value(tape.matmul(tape.leaf(eye), tape.leaf(b)));
  for (std::size_t i = 0; i < b.data.size(); ++i)
    CHECK(x2.data[i] == doctest::Approx(b.data[i]).epsilon(1e-15));

  CHECK_THROWS_AS([&] { Tape t; t.matmul(t.leaf(a), t.leaf(a)); }(),
                  std::invalid_argument);
}

TEST_CASE("backward: loss = sum(x) and loss = sum(x*x)/2") {
  Rng rng(5);
  const Tensor x = random_tensor(rng, {3, 4});
  {
    Tape t;
    const Var xv = t.leaf(x);
    t.backward(t.sum(xv));
    for (const double g : t.grad(xv).data) CHECK(g == 1.0);
  }
  {
    Tape t;
    const Var xv = t.leaf(x);
    t.backward(t.scale(t.sum(t.mul(xv, xv)), 0.5));
    const auto& g = t.grad(xv).data;
    for (std::size_t i = 0; i < g.size(); ++i)
      CHECK(g[i] == doctest::Approx(x.data[i]).epsilon(1e-14));
  }
  {
    // Unreachable leaves get zero gradients; non-scalar losses are rejected.
    Tape t;
    const Var xv = t.leaf(x);
    const Var orphan = t.leaf(x);
    t.backward(t.sum(xv));
    for (const double g : t.grad(orphan).data) CHECK(g == 0.0);
    CHECK_THROWS_AS(t.backward(xv), std::invalid_argument);
  }
}

TEST_CASE("masked_row_softmax values") {
  SUBCASE("equal logits over a 2-element support") {
    Tensor logits = Tensor::zeros({1, 3});
    FocalMask mask;
    mask.n = 3;
    mask.fl = 0;
    mask.rows = {{0, 1}, {1}, {2}};
    Tensor padded = Tensor::zeros({3, 3});
    Tape t;
    const Tensor& out = t.value(t.masked_row_softmax(t.leaf(padded), &mask));
    CHECK(out.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out.at(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out.at(0, 2) == 0.0);
  }
  SUBCASE("identity mask rows give one-hot outputs") {
    Rng rng(3);
    const Tensor logits = random_tensor(rng, {4, 4}, -3.0, 3.0);
    FocalMask mask;
    mask.n = 4;
    mask.fl = 0;
    mask.rows = {{0}, {1}, {2}, {3}};
    Tape t;
    const Tensor& out = t.value(t.masked_row_softmax(t.leaf(logits), &mask));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) CHECK(out.at(i, j) == (i == j ? 1.0 : 0.0));
  }
  SUBCASE("matches the exp/sum oracle on the masked support") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor logits = random_tensor(rng, {6, 6}, -4.0, 4.0);
      FocalMask mask;
      mask.n = 6;
      mask.fl = 1;
      mask.rows.resize(6);
      for (int i = 0; i < 6; ++i) {
        mask.rows[i].push_back(i);
        for (int j = 0; j < 6; ++j)
          if (j != i && rng.bernoulli(0.4)) mask.rows[i].push_back(j);
        std::sort(mask.rows[i].begin(), mask.rows[i].end());
      }
      Tape t;
      const Tensor& out = t.value(t.masked_row_softmax(t.leaf(logits), &mask));
      for (int i = 0; i < 6; ++i) {
        double z = 0.0;
        for (const int j : mask.rows[i]) z += std::exp(logits.at(i, j));
        double row_sum = 0.0;
        for (int j = 0; j < 6; ++j) {
          const bool in = std::binary_search(mask.rows[i].begin(), mask.rows[i].end(), j);
          if (in)
            CHECK(out.at(i, j) ==
                  doctest::Approx(std::exp(logits.at(i, j)) / z).epsilon(1e-12));
          else
            CHECK(out.at(i, j) == 0.0);
          row_sum += out.at(i, j);
        }
        CHECK(std::abs(row_sum - 1.0) < 1e-12);
      }
      // Cross-check the support-exclusion path against the -1e9-bias
      // reference implementation.
      const Tensor ref = softmax_negbias_reference(logits, &mask);
      for (std::size_t i = 0; i < ref.data.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-9));
    }
  }
  SUBCASE("row-constant shift invariance on the masked support") {
    Rng rng(21);
    const Tensor logits = random_tensor(rng, {5, 5}, -2.0, 2.0);
    Tensor shifted = logits;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) shifted.at(i, j) += 3.25 * (i + 1);
    Tape t;
    const Tensor& a = t.value(t.masked_row_softmax(t.leaf(logits), nullptr));
    const Tensor& b = t.value(t.masked_row_softmax(t.leaf(shifted), nullptr));
    for (std::size_t i = 0; i < a.data.size(); ++i)
      CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-12));
  }
  SUBCASE("empty mask row is an invariant violation") {
    FocalMask mask;
    mask.n = 2;
    mask.rows = {{0, 1}, {}};
    Tape t;
    const Var logits = t.leaf(Tensor::zeros({2, 2}));
    CHECK_THROWS_AS(t.masked_row_softmax(logits, &mask), std::logic_error);
  }
}

TEST_CASE("layer_norm values") {
  const Tensor gamma({4}, {1.0, 1.0, 1.0, 1.0});
  const Tensor beta({4}, {0.0, 0.0, 0.0, 0.0});
  SUBCASE("constant row maps to zeros") {
    const Tensor x({1, 4}, {3.5, 3.5, 3.5, 3.5});
    Tape t;
    const Tensor& out = t.value(t.layer_norm(t.leaf(x), t.leaf(gamma), t.leaf(beta)));
    for (const double v : out.data) CHECK(std::abs(v) < 1e-12);
  }
  SUBCASE("unit-variance row is nearly unchanged") {
    const Tensor x({1, 2}, {1.0, -1.0});
    const Tensor g2({2}, {1.0, 1.0}), b2({2}, {0.0, 0.0});
    Tape t;
    const Tensor& out = t.value(t.layer_norm(t.leaf(x), t.leaf(g2), t.leaf(b2)));
    // Closed form: (x - 0) / sqrt(1 + eps).
    const double expect = 1.0 / std::sqrt(1.0 + kLayerNormEps);
    CHECK(out.at(0, 0) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(out.at(0, 1) == doctest::Approx(-expect).epsilon(1e-12));
  }
}

TEST_CASE("cross_entropy values") {
  SUBCASE("near-one-hot correct logits give tiny loss") {
    const Tensor logits({2, 2}, {20.0, 0.0, 0.0, 20.0});
    Tape t;
    const Var loss = t.cross_entropy(t.leaf(logits), {0, 1});
    CHECK(t.value(loss).data[0] < 1e-3);
  }
  SUBCASE("uniform two-class logits give ln 2") {
    const Tensor logits({3, 2}, {0.4, 0.4, -1.0, -1.0, 2.0, 2.0});
    Tape t;
    const Var loss = t.cross_entropy(t.leaf(logits), {0, 1, 0}, {1.0, 1.0});
    CHECK(t.value(loss).data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("matches a log-sum-exp oracle with class weights") {
    Rng rng(77);
    const Tensor logits = random_tensor(rng, {5, 3}, -2.0, 2.0);
    const std::vector<int> labels = {2, 0, 1, 1, 2};
    const std::vector<double> cw = {0.5, 2.0, 1.0};
    Tape t;
    const Var loss = t.cross_entropy(t.leaf(logits), labels, cw);
    double expect = 0.0, wsum = 0.0;
    for (int i = 0; i < 5; ++i) {
      double z = 0.0;
      for (int c = 0; c < 3; ++c) z += std::exp(logits.at(i, c));
      expect += cw[labels[i]] * (std::log(z) - logits.at(i, labels[i]));
      wsum += cw[labels[i]];
    }
    CHECK(t.value(loss).data[0] == doctest::Approx(expect / wsum).epsilon(1e-12));
  }
  SUBCASE("label out of range is rejected") {
    Tape t;
    const Var logits = t.leaf(Tensor::zeros({1, 2}));
    CHECK_THROWS_AS(t.cross_entropy(logits, {2}), std::invalid_argument);
  }
}

TEST_CASE("embedding_lookup values") {
  Rng rng(15);
  const Tensor table = random_tensor(rng, {4, 3});
  Tape t;
  const Tensor& out = t.value(t.embedding_lookup(t.leaf(table), {2, 2, 0}));
  for (int j = 0; j < 3; ++j) {
    CHECK(out.at(0, j) == table.at(2, j));
    CHECK(out.at(1, j) == table.at(2, j));
    CHECK(out.at(2, j) == table.at(0, j));
  }
  CHECK_THROWS_AS(t.embedding_lookup(t.leaf(table), {4}), std::invalid_argument);
}

TEST_CASE("gradient checks for every primitive pass on 10 seeds") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto results = run_gradcheck_suite(seed);
    for (const auto& r : results) {
      INFO("op = ", r.name, ", seed = ", seed, ", err = ", r.max_rel_error);
      CHECK(r.pass);
    }
  }
}

TEST_CASE("corrupted backward is detected (negative control)") {
  const auto results = run_gradcheck_suite(1, /*corrupt=*/true);
  CHECK_FALSE(results.front().pass);
}

TEST_CASE("backward is bit-deterministic") {
  auto run = [] {
    Rng rng(123);
    const Tensor x = random_tensor(rng, {6, 6}, -1.0, 1.0);
    const Tensor w = random_tensor(rng, {6, 6}, -1.0, 1.0);
    Tape t;
    const Var xv = t.leaf(x), wv = t.leaf(w);
    const Var out = t.matmul(t.masked_row_softmax(t.matmul_nt(xv, wv)), wv);
    t.backward(t.sum(out));
    return std::make_pair(t.grad(xv).data, t.grad(wv).data);
  };
  const auto [gx1, gw1] = run();
  const auto [gx2, gw2] = run();
  CHECK(gx1 == gx2);
  CHECK(gw1 == gw2);
}
