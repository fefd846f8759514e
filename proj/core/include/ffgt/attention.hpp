#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ffgt/graph.hpp"
#include "ffgt/hops.hpp"
#include "ffgt/tape.hpp"
#include "ffgt/tensor.hpp"

namespace ffgt {

constexpr Var kNoVar = -1;

// Hop distance -> bias bucket. Hops 0..max_hop each get their own bucket;
// anything farther shares FAR; disconnected pairs share DISC; the virtual
// node's pairs share VIRTUAL. num_buckets = max_hop + 4.
struct BucketScheme {
  int max_hop = 10;

  int num_buckets() const { return max_hop + 4; }
  int far_bucket() const { return max_hop + 1; }
  int disconnected_bucket() const { return max_hop + 2; }
  int virtual_bucket() const { return max_hop + 3; }

  int bucket(std::int32_t hop) const {
    if (hop == kVirtualHop) return virtual_bucket();
    if (hop == kUnreachable) return disconnected_bucket();
    if (hop > max_hop) return far_bucket();
    return static_cast<int>(hop);
  }
};

// Per-pair bucket and edge-type ids for one graph, shared by every head and
// layer that attends over it.
struct PairIndex {
  int n = 0;
  std::shared_ptr<const std::vector<int>> hop_buckets;  // n*n bucket ids
  std::shared_ptr<const std::vector<int>> edge_types;   // n*n, -1 where hop != 1
};

PairIndex make_pair_index(const Graph& g, const HopMatrix& hops,
                          const BucketScheme& scheme);

// Per-head projections; d_h = d / (M + N), exact division enforced at
// construction time.
struct HeadParams {
  Tensor w_q, w_k, w_v;  // each [d, d_h]
};

struct BiasTables {
  BucketScheme scheme;
  Tensor hop_bias;   // [num_buckets, heads]
  Tensor edge_bias;  // [num_edge_types, heads], applied on 1-hop pairs
};

// Optional multiplicative gate applied after softmax. Disabled means the
// gating step is skipped entirely (bit-identical to a gate-free path).
struct GateTable {
  bool enabled = false;
  Tensor gate;  // [num_buckets, heads]
};

struct MlpParams {
  Tensor w1, b1, w2, b2;  // d -> hidden -> d
};

struct LayerNormParams {
  Tensor gamma, beta;
};

struct FfgtLayerParams {
  std::vector<HeadParams> full_heads;   // M >= 1 for a useful layer
  std::vector<HeadParams> focal_heads;  // N = 0 recovers the vanilla backbone
  std::shared_ptr<BiasTables> bias;     // shared across layers in a model
  std::shared_ptr<GateTable> gate;
  Tensor merge;  // [d, d], applied to the concatenation of all head outputs
  MlpParams mlp;
  LayerNormParams ln1, ln2;

  int num_heads() const {
    return static_cast<int>(full_heads.size() + focal_heads.size());
  }
};

// --- raw-value operations ---------------------------------------------------

// Entry (i,j) = hop_bias[bucket(hop(i,j))][head] + edge_bias[type(i,j)][head]
// for 1-hop pairs.
Tensor build_bias_matrix(const HopMatrix& hops, const Graph& g,
                         const BiasTables& tables, int head);

Tensor build_gate_matrix(const HopMatrix& hops, const GateTable& gate, int head);

// K-hop MPNN: all nodes at the same distance share one attention weight.
// out_i = sum_{j: hop(i,j) <= fl} alpha_i(hop) * (x_j w_v), alpha = softmax of
// per-distance weights over i's ego-net. A focal head with zero query/key
// projections and hop_bias[d] = weights[d] degenerates to exactly this.
Tensor khop_mpnn_reference(const Tensor& x, const std::vector<double>& per_distance_weights,
                           const Tensor& w_v, const HopMatrix& hops, int fl);

struct SparseForwardStats {
  std::uint64_t touched_pairs = 0;
};

// Forward-only focal attention that walks the sparse mask rows instead of the
// dense n x n score matrix: cost proportional to sum_i |ego(i)|. Matches the
// dense masked path within 1e-12; training uses the dense taped path.
Tensor sparse_focal_forward(const Tensor& x, const HeadParams& p,
                            const BiasTables& tables, const GateTable& gate, int head,
                            const Graph& g, const HopMatrix& hops, const FocalMask& mask,
                            SparseForwardStats* stats = nullptr);

// --- taped operations --------------------------------------------------------

struct HeadVars {
  Var w_q, w_k, w_v;
};

struct FfgtLayerVars {
  std::vector<HeadVars> full_heads, focal_heads;
  Var merge;
  Var mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  Var ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
};

FfgtLayerVars lift_layer(Tape& tape, const FfgtLayerParams& params);

Var taped_bias_matrix(Tape& tape, Var hop_bias, Var edge_bias, const PairIndex& idx,
                      int head);
Var taped_gate_matrix(Tape& tape, Var gate, const PairIndex& idx, int head);

// One attention head: (softmax(Q K^T / sqrt(d_h) + B, mask) (.) C) V.
// gate_matrix = kNoVar skips the gating multiply.
Var attention_head(Tape& tape, Var x, const HeadVars& p, Var bias_matrix,
                   Var gate_matrix, const FocalMask* mask);

// Full compound layer: concat of M full + N focal heads, linear merge,
// residual + layer norm, 2-layer MLP, residual + layer norm.
// head_bias[h] / head_gate[h] are indexed by global head id (full heads
// first); head_gate is empty when gating is disabled.
Var ffgt_layer_forward(Tape& tape, Var x, const FfgtLayerVars& lv,
                       const std::vector<Var>& head_bias,
                       const std::vector<Var>& head_gate, const FocalMask* mask);

// Convenience wrapper running a single layer on a fresh tape.
Tensor ffgt_layer(const Tensor& x, const FfgtLayerParams& params, const Graph& g,
                  const HopMatrix& hops, const FocalMask* mask);

}  // namespace ffgt
