#include "ffgt/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ffgt/errors.hpp"

namespace ffgt {

PairIndex make_pair_index(const Graph& g, const HopMatrix& hops,
                          const BucketScheme& scheme) {
  const int n = hops.n;
  auto buckets = std::make_shared<std::vector<int>>(static_cast<std::size_t>(n) * n);
  auto etypes = std::make_shared<std::vector<int>>(static_cast<std::size_t>(n) * n, -1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto h = hops.at(i, j);
      (*buckets)[static_cast<std::size_t>(i) * n + j] = scheme.bucket(h);
      if (h == 1)
        (*etypes)[static_cast<std::size_t>(i) * n + j] = g.edge_type(i, j);
    }
  }
  PairIndex idx;
  idx.n = n;
  idx.hop_buckets = std::move(buckets);
  idx.edge_types = std::move(etypes);
  return idx;
}

Tensor build_bias_matrix(const HopMatrix& hops, const Graph& g,
                         const BiasTables& tables, int head) {
  const int n = hops.n;
  const std::size_t heads = tables.hop_bias.cols();
  if (head < 0 || static_cast<std::size_t>(head) >= heads)
    throw std::invalid_argument("build_bias_matrix: head out of range");
  Tensor out = Tensor::zeros({static_cast<std::size_t>(n), static_cast<std::size_t>(n)});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto h = hops.at(i, j);
      double b = tables.hop_bias.at(tables.scheme.bucket(h), head);
      if (h == 1) b += tables.edge_bias.at(g.edge_type(i, j), head);
      out.at(i, j) = b;
    }
  }
  return out;
}

Tensor build_gate_matrix(const HopMatrix& hops, const GateTable& gate, int head) {
  const int n = hops.n;
  Tensor out = Tensor::zeros({static_cast<std::size_t>(n), static_cast<std::size_t>(n)});
  if (!gate.enabled) {
    for (auto& x : out.data) x = 1.0;
    return out;
  }
  BucketScheme scheme;
  scheme.max_hop = static_cast<int>(gate.gate.rows()) - 4;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out.at(i, j) = gate.gate.at(scheme.bucket(hops.at(i, j)), head);
  return out;
}

Tensor khop_mpnn_reference(const Tensor& x, const std::vector<double>& per_distance_weights,
                           const Tensor& w_v, const HopMatrix& hops, int fl) {
  if (per_distance_weights.size() != static_cast<std::size_t>(fl) + 1)
    throw std::invalid_argument("khop_mpnn_reference: need one weight per distance 0..fl");
  const int n = hops.n;
  const std::size_t d = x.cols(), dh = w_v.cols();

  // Project once: v = x w_v.
  Tensor v = Tensor::zeros({static_cast<std::size_t>(n), dh});
  for (int i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      const double xv = x.at(i, k);
      for (std::size_t c = 0; c < dh; ++c) v.at(i, c) += xv * w_v.at(k, c);
    }

  Tensor out = Tensor::zeros({static_cast<std::size_t>(n), dh});
  for (int i = 0; i < n; ++i) {
    const auto ego = ego_net(hops, i, fl);
    double mx = -std::numeric_limits<double>::infinity();
    for (const int j : ego) mx = std::max(mx, per_distance_weights[hops.at(i, j)]);
    double z = 0.0;
    std::vector<double> e(ego.size());
    for (std::size_t t = 0; t < ego.size(); ++t) {
      e[t] = std::exp(per_distance_weights[hops.at(i, ego[t])] - mx);
      z += e[t];
    }
    for (std::size_t t = 0; t < ego.size(); ++t) {
      const double a = e[t] / z;
      for (std::size_t c = 0; c < dh; ++c) out.at(i, c) += a * v.at(ego[t], c);
    }
  }
  return out;
}

Tensor sparse_focal_forward(const Tensor& x, const HeadParams& p,
                            const BiasTables& tables, const GateTable& gate, int head,
                            const Graph& g, const HopMatrix& hops, const FocalMask& mask,
                            SparseForwardStats* stats) {
  const int n = hops.n;
  const std::size_t d = x.cols(), dh = p.w_q.cols();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  // Projections are linear in n; the quadratic part below only touches
  // in-mask pairs.
  auto project = [&](const Tensor& w) {
    Tensor r = Tensor::zeros({static_cast<std::size_t>(n), dh});
    for (int i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        const double xv = x.at(i, k);
        for (std::size_t c = 0; c < dh; ++c) r.at(i, c) += xv * w.at(k, c);
      }
    return r;
  };
  const Tensor q = project(p.w_q);
  const Tensor kk = project(p.w_k);
  const Tensor v = project(p.w_v);

  Tensor out = Tensor::zeros({static_cast<std::size_t>(n), dh});
  std::vector<double> logits, gates;
  for (int i = 0; i < n; ++i) {
    const auto& row = mask.rows[i];
    if (stats) stats->touched_pairs += row.size();
    logits.assign(row.size(), 0.0);
    for (std::size_t t = 0; t < row.size(); ++t) {
      const int j = row[t];
      double s = 0.0;
      for (std::size_t c = 0; c < dh; ++c) s += q.at(i, c) * kk.at(j, c);
      const auto h = hops.at(i, j);
      s = s * inv_sqrt + tables.hop_bias.at(tables.scheme.bucket(h), head);
      if (h == 1) s += tables.edge_bias.at(g.edge_type(i, j), head);
      logits[t] = s;
    }
    double mx = logits[0];
    for (const double s : logits) mx = std::max(mx, s);
    double z = 0.0;
    for (auto& s : logits) {
      s = std::exp(s - mx);
      z += s;
    }
    const double inv_z = 1.0 / z;
    for (std::size_t t = 0; t < row.size(); ++t) {
      double a = logits[t] * inv_z;
      if (gate.enabled)
        a *= gate.gate.at(tables.scheme.bucket(hops.at(i, row[t])), head);
      for (std::size_t c = 0; c < dh; ++c) out.at(i, c) += a * v.at(row[t], c);
    }
  }
  return out;
}

FfgtLayerVars lift_layer(Tape& tape, const FfgtLayerParams& params) {
  FfgtLayerVars lv;
  auto lift_head = [&](const HeadParams& h) {
    return HeadVars{tape.leaf(h.w_q), tape.leaf(h.w_k), tape.leaf(h.w_v)};
  };
  for (const auto& h : params.full_heads) lv.full_heads.push_back(lift_head(h));
  for (const auto& h : params.focal_heads) lv.focal_heads.push_back(lift_head(h));
  lv.merge = tape.leaf(params.merge);
  lv.mlp_w1 = tape.leaf(params.mlp.w1);
  lv.mlp_b1 = tape.leaf(params.mlp.b1);
  lv.mlp_w2 = tape.leaf(params.mlp.w2);
  lv.mlp_b2 = tape.leaf(params.mlp.b2);
  lv.ln1_gamma = tape.leaf(params.ln1.gamma);
  lv.ln1_beta = tape.leaf(params.ln1.beta);
  lv.ln2_gamma = tape.leaf(params.ln2.gamma);
  lv.ln2_beta = tape.leaf(params.ln2.beta);
  return lv;
}

Var taped_bias_matrix(Tape& tape, Var hop_bias, Var edge_bias, const PairIndex& idx,
                      int head) {
  const auto n = static_cast<std::size_t>(idx.n);
  const Var hb = tape.gather_entries(hop_bias, idx.hop_buckets, head, n, n);
  const Var eb = tape.gather_entries(edge_bias, idx.edge_types, head, n, n);
  return tape.add(hb, eb);
}

Var taped_gate_matrix(Tape& tape, Var gate, const PairIndex& idx, int head) {
  const auto n = static_cast<std::size_t>(idx.n);
  return tape.gather_entries(gate, idx.hop_buckets, head, n, n);
}

Var attention_head(Tape& tape, Var x, const HeadVars& p, Var bias_matrix,
                   Var gate_matrix, const FocalMask* mask) {
  const Var q = tape.matmul(x, p.w_q);
  const Var k = tape.matmul(x, p.w_k);
  const Var v = tape.matmul(x, p.w_v);
  const double dh = static_cast<double>(tape.value(p.w_q).cols());
  Var logits = tape.scale(tape.matmul_nt(q, k), 1.0 / std::sqrt(dh));
  logits = tape.add(logits, bias_matrix);
  Var attn = tape.masked_row_softmax(logits, mask);
  if (gate_matrix != kNoVar) attn = tape.mul(attn, gate_matrix);
  return tape.matmul(attn, v);
}

Var ffgt_layer_forward(Tape& tape, Var x, const FfgtLayerVars& lv,
                       const std::vector<Var>& head_bias,
                       const std::vector<Var>& head_gate, const FocalMask* mask) {
  const std::size_t m = lv.full_heads.size(), nf = lv.focal_heads.size();
  if (head_bias.size() != m + nf)
    throw std::invalid_argument("ffgt_layer_forward: one bias matrix per head required");
  if (nf > 0 && mask == nullptr)
    throw std::invalid_argument("ffgt_layer_forward: focal heads need a mask");
  std::vector<Var> outs;
  outs.reserve(m + nf);
  for (std::size_t h = 0; h < m; ++h) {
    const Var gate = head_gate.empty() ? kNoVar : head_gate[h];
    outs.push_back(attention_head(tape, x, lv.full_heads[h], head_bias[h], gate, nullptr));
  }
  for (std::size_t h = 0; h < nf; ++h) {
    const Var gate = head_gate.empty() ? kNoVar : head_gate[m + h];
    outs.push_back(attention_head(tape, x, lv.focal_heads[h], head_bias[m + h], gate, mask));
  }
  const Var merged = tape.matmul(tape.concat_cols(outs), lv.merge);
  const Var y1 = tape.layer_norm(tape.add(x, merged), lv.ln1_gamma, lv.ln1_beta);
  const Var hidden = tape.relu(tape.linear(y1, lv.mlp_w1, lv.mlp_b1));
  const Var mlp_out = tape.linear(hidden, lv.mlp_w2, lv.mlp_b2);
  return tape.layer_norm(tape.add(y1, mlp_out), lv.ln2_gamma, lv.ln2_beta);
}

Tensor ffgt_layer(const Tensor& x, const FfgtLayerParams& params, const Graph& g,
                  const HopMatrix& hops, const FocalMask* mask) {
  const std::size_t d = x.cols();
  const int heads = params.num_heads();
  if (heads == 0 || d % static_cast<std::size_t>(heads) != 0)
    throw ConfigError("ffgt_layer: model dim not divisible by head count");
  Tape tape;
  const Var xv = tape.leaf(x);
  const auto lv = lift_layer(tape, params);
  const Var hop_bias = tape.leaf(params.bias->hop_bias);
  const Var edge_bias = tape.leaf(params.bias->edge_bias);
  const PairIndex idx = make_pair_index(g, hops, params.bias->scheme);
  std::vector<Var> head_bias, head_gate;
  Var gate = kNoVar;
  if (params.gate && params.gate->enabled) gate = tape.leaf(params.gate->gate);
  for (int h = 0; h < heads; ++h) {
    head_bias.push_back(taped_bias_matrix(tape, hop_bias, edge_bias, idx, h));
    if (gate != kNoVar) head_gate.push_back(taped_gate_matrix(tape, gate, idx, h));
  }
  const Var out = ffgt_layer_forward(tape, xv, lv, head_bias, head_gate, mask);
  return tape.value(out);
}

}  // namespace ffgt
