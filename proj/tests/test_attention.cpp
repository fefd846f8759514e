#include "doctest.h"

#include <cmath>

#include "ffgt/attention.hpp"
#include "ffgt/gradcheck.hpp"
#include "test_util.hpp"

using namespace ffgt;

namespace {

BiasTables zero_tables(int max_hop, int heads, int edge_types = 1) {
  BiasTables t;
  t.scheme.max_hop = max_hop;
  t.hop_bias = Tensor::zeros({static_cast<std::size_t>(t.scheme.num_buckets()),
                              static_cast<std::size_t>(heads)});
  t.edge_bias = Tensor::zeros({static_cast<std::size_t>(edge_types),
                               static_cast<std::size_t>(heads)});
  return t;
}

HeadParams random_head(Rng& rng, std::size_t d, std::size_t dh) {
  return {random_tensor(rng, {d, dh}, -0.5, 0.5), random_tensor(rng, {d, dh}, -0.5, 0.5),
          random_tensor(rng, {d, dh}, -0.5, 0.5)};
}

// Runs one head on a fresh tape with explicit bias/gate matrices.
Tensor run_head(const Tensor& x, const HeadParams& p, const Tensor& bias,
                const Tensor* gate, const FocalMask* mask) {
  Tape tape;
  const Var xv = tape.leaf(x);
  const HeadVars hv{tape.leaf(p.w_q), tape.leaf(p.w_k), tape.leaf(p.w_v)};
  const Var bv = tape.leaf(bias);
  const Var gv = gate ? tape.leaf(*gate) : kNoVar;
  return tape.value(attention_head(tape, xv, hv, bv, gv, mask));
}

FfgtLayerParams make_layer(Rng& rng, int d, int m_full, int n_focal, int mlp_hidden,
                           int max_hop) {
  FfgtLayerParams lp;
  const auto dd = static_cast<std::size_t>(d);
  const auto dh = static_cast<std::size_t>(d / (m_full + n_focal));
  for (int h = 0; h < m_full; ++h) lp.full_heads.push_back(random_head(rng, dd, dh));
  for (int h = 0; h < n_focal; ++h) lp.focal_heads.push_back(random_head(rng, dd, dh));
  lp.bias = std::make_shared<BiasTables>(zero_tables(max_hop, m_full + n_focal));
  for (auto& v : lp.bias->hop_bias.data) v = rng.uniform_real(-0.3, 0.3);
  for (auto& v : lp.bias->edge_bias.data) v = rng.uniform_real(-0.3, 0.3);
  lp.gate = std::make_shared<GateTable>();
  lp.merge = random_tensor(rng, {dd, dd}, -0.4, 0.4);
  lp.mlp.w1 = random_tensor(rng, {dd, static_cast<std::size_t>(mlp_hidden)}, -0.4, 0.4);
  lp.mlp.b1 = random_tensor(rng, {static_cast<std::size_t>(mlp_hidden)}, -0.1, 0.1);
  lp.mlp.w2 = random_tensor(rng, {static_cast<std::size_t>(mlp_hidden), dd}, -0.4, 0.4);
  lp.mlp.b2 = random_tensor(rng, {dd}, -0.1, 0.1);
  lp.ln1.gamma = random_tensor(rng, {dd}, 0.8, 1.2);
  lp.ln1.beta = random_tensor(rng, {dd}, -0.1, 0.1);
  lp.ln2.gamma = random_tensor(rng, {dd}, 0.8, 1.2);
  lp.ln2.beta = random_tensor(rng, {dd}, -0.1, 0.1);
  return lp;
}

}  // namespace

TEST_CASE("build_bias_matrix") {
  SUBCASE("all-zero tables give a zero matrix") {
    const Graph g = test::complete(3);
    const HopMatrix hops = hop_matrix(g);
    const Tensor b = build_bias_matrix(hops, g, zero_tables(4, 2), 1);
    for (const double v : b.data) CHECK(v == 0.0);
  }
  SUBCASE("K2: hop and edge bias add up") {
    const Graph g = test::complete(2);
    const HopMatrix hops = hop_matrix(g);
    BiasTables t = zero_tables(4, 1);
    t.hop_bias.at(1, 0) = 0.5;
    t.edge_bias.at(0, 0) = 0.25;
    const Tensor b = build_bias_matrix(hops, g, t, 0);
    CHECK(b.at(0, 1) == doctest::Approx(0.75));
    CHECK(b.at(1, 0) == doctest::Approx(0.75));
    CHECK(b.at(0, 0) == 0.0);
  }
  SUBCASE("random graph matches per-entry recomputation, sentinels included") {
    Rng rng(55);
    const Graph g = test::random_graph(rng, 14, 0.18);
    const HopMatrix hops = hop_matrix(g);
    BiasTables t = zero_tables(2, 3);  // max_hop 2 exercises the FAR bucket
    for (auto& v : t.hop_bias.data) v = rng.uniform_real(-1.0, 1.0);
    for (auto& v : t.edge_bias.data) v = rng.uniform_real(-1.0, 1.0);
    for (int head = 0; head < 3; ++head) {
      const Tensor b = build_bias_matrix(hops, g, t, head);
      for (int i = 0; i < 14; ++i)
        for (int j = 0; j < 14; ++j) {
          const auto h = hops.at(i, j);
          int bucket;
          if (h == kUnreachable) bucket = t.scheme.disconnected_bucket();
          else if (h > 2) bucket = t.scheme.far_bucket();
          else bucket = h;
          double expect = t.hop_bias.at(bucket, head);
          if (h == 1) expect += t.edge_bias.at(g.edge_type(i, j), head);
          CHECK(b.at(i, j) == doctest::Approx(expect).epsilon(1e-15));
        }
    }
  }
  SUBCASE("taped gather path equals the direct construction") {
    Rng rng(56);
    const Graph g = test::random_graph(rng, 12, 0.25);
    const HopMatrix hops = hop_matrix(g);
    BiasTables t = zero_tables(3, 2);
    for (auto& v : t.hop_bias.data) v = rng.uniform_real(-1.0, 1.0);
    for (auto& v : t.edge_bias.data) v = rng.uniform_real(-1.0, 1.0);
    const PairIndex idx = make_pair_index(g, hops, t.scheme);
    Tape tape;
    const Var hb = tape.leaf(t.hop_bias), eb = tape.leaf(t.edge_bias);
    for (int head = 0; head < 2; ++head) {
      const Tensor& taped = tape.value(taped_bias_matrix(tape, hb, eb, idx, head));
      const Tensor direct = build_bias_matrix(hops, g, t, head);
      for (std::size_t i = 0; i < direct.data.size(); ++i)
        CHECK(taped.data[i] == direct.data[i]);
    }
  }
}

TEST_CASE("attention_head basics") {
  Rng rng(60);
  const int n = 6, d = 8, dh = 4;
  const Tensor x = random_tensor(rng, {static_cast<std::size_t>(n), d}, -1.0, 1.0);
  SUBCASE("zero queries/keys, no bias: uniform attention averages V") {
    HeadParams p = random_head(rng, d, dh);
    for (auto& v : p.w_q.data) v = 0.0;
    for (auto& v : p.w_k.data) v = 0.0;
    const Tensor bias = Tensor::zeros({static_cast<std::size_t>(n), static_cast<std::size_t>(n)});
    const Tensor out = run_head(x, p, bias, nullptr, nullptr);
    // Oracle: mean of projected rows.
    Tape t;
    const Tensor& v = t.value(t.matmul(t.leaf(x), t.leaf(p.w_v)));
    for (int j = 0; j < dh; ++j) {
      double mean = 0.0;
      for (int i = 0; i < n; ++i) mean += v.at(i, j);
      mean /= n;
      for (int i = 0; i < n; ++i)
        CHECK(out.at(i, j) == doctest::Approx(mean).epsilon(1e-12));
    }
  }
  SUBCASE("identity mask returns V exactly") {
    const HeadParams p = random_head(rng, d, dh);
    FocalMask mask;
    mask.n = n;
    mask.fl = 0;
    mask.rows.resize(n);
    for (int i = 0; i < n; ++i) mask.rows[i] = {i};
    const Tensor bias = Tensor::zeros({static_cast<std::size_t>(n), static_cast<std::size_t>(n)});
    const Tensor out = run_head(x, p, bias, nullptr, &mask);
    Tape t;
    const Tensor& v = t.value(t.matmul(t.leaf(x), t.leaf(p.w_v)));
    for (std::size_t i = 0; i < v.data.size(); ++i)
      CHECK(out.data[i] == doctest::Approx(v.data[i]).epsilon(1e-13));
  }
  SUBCASE("full-diameter mask equals the all-ones (full) path") {
    Rng rng2(61);
    const Graph g = test::random_connected_graph(rng2, 7, 0.4);
    const HopMatrix hops = hop_matrix(g);
    const int diam = hops.max_finite_hop();
    const FocalMask mask = focal_mask(hops, diam);
    const Tensor x7 = random_tensor(rng2, {7, 8}, -1.0, 1.0);
    const HeadParams p = random_head(rng2, 8, 4);
    const Tensor bias = random_tensor(rng2, {7, 7}, -0.5, 0.5);
    const Tensor masked = run_head(x7, p, bias, nullptr, &mask);
    const Tensor full = run_head(x7, p, bias, nullptr, nullptr);
    for (std::size_t i = 0; i < full.data.size(); ++i)
      CHECK(std::abs(masked.data[i] - full.data[i]) <= 1e-12);
  }
  SUBCASE("disabled gate is bit-identical to an all-ones gate") {
    const HeadParams p = random_head(rng, d, dh);
    const Tensor bias = random_tensor(rng, {static_cast<std::size_t>(n), static_cast<std::size_t>(n)}, -0.5, 0.5);
    Tensor ones = Tensor::zeros({static_cast<std::size_t>(n), static_cast<std::size_t>(n)});
    for (auto& v : ones.data) v = 1.0;
    const Tensor gated = run_head(x, p, bias, &ones, nullptr);
    const Tensor plain = run_head(x, p, bias, nullptr, nullptr);
    CHECK(gated.data == plain.data);
  }
  SUBCASE("attention rows sum to 1 on the masked support (pre-gate)") {
    Rng rng2(62);
    const Graph g = test::random_graph(rng2, 9, 0.3);
    const HopMatrix hops = hop_matrix(g);
    const FocalMask mask = focal_mask(hops, 1);
    const Tensor logits = random_tensor(rng2, {9, 9}, -2.0, 2.0);
    Tape t;
    const Tensor& s = t.value(t.masked_row_softmax(t.leaf(logits), &mask));
    for (int i = 0; i < 9; ++i) {
      double sum = 0.0;
      for (int j = 0; j < 9; ++j) sum += s.at(i, j);
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("khop_mpnn_reference") {
  Rng rng(70);
  SUBCASE("fl=0 reduces to the value projection") {
    const Graph g = test::random_graph(rng, 8, 0.3);
    const HopMatrix hops = hop_matrix(g);
    const Tensor x = random_tensor(rng, {8, 6}, -1.0, 1.0);
    const Tensor w_v = random_tensor(rng, {6, 3}, -1.0, 1.0);
    const Tensor out = khop_mpnn_reference(x, {0.7}, w_v, hops, 0);
    Tape t;
    const Tensor& v = t.value(t.matmul(t.leaf(x), t.leaf(w_v)));
    for (std::size_t i = 0; i < v.data.size(); ++i)
      CHECK(out.data[i] == doctest::Approx(v.data[i]).epsilon(1e-13));
  }
  SUBCASE("uniform weights give the ego-net mean") {
    const Graph g = test::random_graph(rng, 10, 0.25);
    const HopMatrix hops = hop_matrix(g);
    const Tensor x = random_tensor(rng, {10, 4}, -1.0, 1.0);
    const Tensor w_v = random_tensor(rng, {4, 2}, -1.0, 1.0);
    const Tensor out = khop_mpnn_reference(x, {0.3, 0.3}, w_v, hops, 1);
    Tape t;
    const Tensor& v = t.value(t.matmul(t.leaf(x), t.leaf(w_v)));
    for (int i = 0; i < 10; ++i) {
      const auto ego = ego_net(hops, i, 1);
      for (int c = 0; c < 2; ++c) {
        double mean = 0.0;
        for (const int j : ego) mean += v.at(j, c);
        mean /= static_cast<double>(ego.size());
        CHECK(out.at(i, c) == doctest::Approx(mean).epsilon(1e-12));
      }
    }
  }
  SUBCASE("focal head with zero Q/K and distance-only bias degenerates to it") {
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 8 + static_cast<int>(rng.uniform_int(0, 6));
      const Graph g = test::random_graph(rng, n, 0.3);
      const HopMatrix hops = hop_matrix(g);
      const int fl = 2;
      const FocalMask mask = focal_mask(hops, fl);
      const Tensor x = random_tensor(rng, {static_cast<std::size_t>(n), 6}, -1.0, 1.0);
      HeadParams p = random_head(rng, 6, 3);
      for (auto& v : p.w_q.data) v = 0.0;
      for (auto& v : p.w_k.data) v = 0.0;
      std::vector<double> weights;
      for (int dist = 0; dist <= fl; ++dist) weights.push_back(rng.uniform_real(-1.0, 1.0));
      BiasTables tables = zero_tables(6, 1);
      for (int dist = 0; dist <= fl; ++dist) tables.hop_bias.at(dist, 0) = weights[dist];
      const Graph* gp = &g;
      const Tensor bias = build_bias_matrix(hops, *gp, tables, 0);
      const Tensor head = run_head(x, p, bias, nullptr, &mask);
      const Tensor ref = khop_mpnn_reference(x, weights, p.w_v, hops, fl);
      for (std::size_t i = 0; i < ref.data.size(); ++i)
        CHECK(std::abs(head.data[i] - ref.data[i]) <= 1e-10);
    }
  }
}

TEST_CASE("sparse_focal_forward") {
  Rng rng(80);
  SUBCASE("chain of 200 nodes at fl=1: matches dense path, touches ~3n pairs") {
    const Graph g = test::chain(200);
    const HopMatrix hops = hop_matrix(g);
    const FocalMask mask = focal_mask(hops, 1);
    const Tensor x = random_tensor(rng, {200, 8}, -1.0, 1.0);
    const HeadParams p = random_head(rng, 8, 4);
    BiasTables tables = zero_tables(5, 1);
    for (auto& v : tables.hop_bias.data) v = rng.uniform_real(-0.5, 0.5);
    for (auto& v : tables.edge_bias.data) v = rng.uniform_real(-0.5, 0.5);
    GateTable gate;
    SparseForwardStats stats;
    const Tensor sparse = sparse_focal_forward(x, p, tables, gate, 0, g, hops, mask, &stats);
    const Tensor bias = build_bias_matrix(hops, g, tables, 0);
    const Tensor dense = run_head(x, p, bias, nullptr, &mask);
    for (std::size_t i = 0; i < dense.data.size(); ++i)
      CHECK(std::abs(sparse.data[i] - dense.data[i]) <= 1e-12);
    CHECK(stats.touched_pairs == 3 * 200 - 2);
    CHECK(stats.touched_pairs < 5 * 200);
  }
  SUBCASE("fl=0 returns the value rows") {
    const Graph g = test::chain(12);
    const HopMatrix hops = hop_matrix(g);
    const FocalMask mask = focal_mask(hops, 0);
    const Tensor x = random_tensor(rng, {12, 6}, -1.0, 1.0);
    const HeadParams p = random_head(rng, 6, 3);
    const BiasTables tables = zero_tables(4, 1);
    const Tensor out = sparse_focal_forward(x, p, tables, GateTable{}, 0, g, hops, mask);
    Tape t;
    const Tensor& v = t.value(t.matmul(t.leaf(x), t.leaf(p.w_v)));
    for (std::size_t i = 0; i < v.data.size(); ++i)
      CHECK(out.data[i] == doctest::Approx(v.data[i]).epsilon(1e-13));
  }
  SUBCASE("random graph at fl=2, gate enabled") {
    const Graph g = test::random_graph(rng, 60, 0.08);
    const HopMatrix hops = hop_matrix(g);
    const FocalMask mask = focal_mask(hops, 2);
    const Tensor x = random_tensor(rng, {60, 8}, -1.0, 1.0);
    const HeadParams p = random_head(rng, 8, 8);
    BiasTables tables = zero_tables(6, 2);
    for (auto& v : tables.hop_bias.data) v = rng.uniform_real(-0.5, 0.5);
    GateTable gate;
    gate.enabled = true;
    gate.gate = random_tensor(rng, {static_cast<std::size_t>(tables.scheme.num_buckets()), 2}, 0.5, 1.5);
    const Tensor sparse = sparse_focal_forward(x, p, tables, gate, 1, g, hops, mask);
    const Tensor bias = build_bias_matrix(hops, g, tables, 1);
    const Tensor gmat = build_gate_matrix(hops, gate, 1);
    const Tensor dense = run_head(x, p, bias, &gmat, &mask);
    for (std::size_t i = 0; i < dense.data.size(); ++i)
      CHECK(std::abs(sparse.data[i] - dense.data[i]) <= 1e-12);
  }
}

TEST_CASE("ffgt_layer") {
  Rng rng(90);
  SUBCASE("N = 0 ignores the mask entirely (backbone recovery)") {
    const Graph g = test::random_graph(rng, 10, 0.3);
    const HopMatrix hops = hop_matrix(g);
    const Tensor x = random_tensor(rng, {10, 8}, -1.0, 1.0);
    const FfgtLayerParams lp = make_layer(rng, 8, 2, 0, 16, 4);
    const FocalMask m0 = focal_mask(hops, 0), m2 = focal_mask(hops, 2);
    const Tensor a = ffgt_layer(x, lp, g, hops, &m0);
    const Tensor b = ffgt_layer(x, lp, g, hops, &m2);
    const Tensor c = ffgt_layer(x, lp, g, hops, nullptr);
    CHECK(a.data == b.data);
    CHECK(a.data == c.data);
  }
  SUBCASE("fl >= diameter with shared params duplicates full heads") {
    const Graph g = test::random_connected_graph(rng, 9, 0.35);
    const HopMatrix hops = hop_matrix(g);
    const int diam = hops.max_finite_hop();
    const FocalMask mask = focal_mask(hops, diam);
    const Tensor x = random_tensor(rng, {9, 8}, -1.0, 1.0);
    // Layer A: 1 full + 1 focal sharing identical head params.
    FfgtLayerParams a = make_layer(rng, 8, 1, 1, 16, 4);
    a.focal_heads[0] = a.full_heads[0];
    // Make both heads share one bias column so the 2-full-head layer is
    // exactly equivalent.
    for (int b = 0; b < a.bias->scheme.num_buckets(); ++b)
      a.bias->hop_bias.at(b, 1) = a.bias->hop_bias.at(b, 0);
    a.bias->edge_bias.at(0, 1) = a.bias->edge_bias.at(0, 0);
    // Layer B: 2 full heads with the same parameters.
    FfgtLayerParams b = a;
    b.full_heads = {a.full_heads[0], a.focal_heads[0]};
    b.focal_heads.clear();
    const Tensor ya = ffgt_layer(x, a, g, hops, &mask);
    const Tensor yb = ffgt_layer(x, b, g, hops, nullptr);
    for (std::size_t i = 0; i < ya.data.size(); ++i)
      CHECK(std::abs(ya.data[i] - yb.data[i]) <= 1e-12);
  }
  SUBCASE("permutation equivariance of the whole layer") {
    const Graph g = test::random_graph(rng, 11, 0.3);
    const HopMatrix hops = hop_matrix(g);
    const FocalMask mask = focal_mask(hops, 1);
    const Tensor x = random_tensor(rng, {11, 8}, -1.0, 1.0);
    const FfgtLayerParams lp = make_layer(rng, 8, 1, 1, 16, 4);
    const Tensor y = ffgt_layer(x, lp, g, hops, &mask);

    const auto perm = rng.permutation(11);
    const Graph pg = permute_graph(g, perm);
    const HopMatrix phops = hop_matrix(pg);
    const FocalMask pmask = focal_mask(phops, 1);
    Tensor px = Tensor::zeros({11, 8});
    for (int i = 0; i < 11; ++i)
      for (int j = 0; j < 8; ++j) px.at(perm[i], j) = x.at(i, j);
    const Tensor py = ffgt_layer(px, lp, pg, phops, &pmask);
    for (int i = 0; i < 11; ++i)
      for (int j = 0; j < 8; ++j)
        CHECK(std::abs(py.at(perm[i], j) - y.at(i, j)) <= 1e-9);
  }
  SUBCASE("head-dimension divisibility is enforced") {
    const Graph g = test::complete(3);
    const HopMatrix hops = hop_matrix(g);
    const Tensor x = random_tensor(rng, {3, 8}, -1.0, 1.0);
    FfgtLayerParams lp = make_layer(rng, 8, 1, 1, 16, 4);
    lp.full_heads.push_back(lp.full_heads[0]);  // 3 heads, 8 % 3 != 0
    CHECK_THROWS(ffgt_layer(x, lp, g, hops, nullptr));
  }
}
