#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ffgt/hops.hpp"
#include "ffgt/tensor.hpp"

namespace ffgt {

// Handle to a value recorded on a Tape.
using Var = int;

// Reverse-mode differentiation tape. Every operation records the value and a
// closure that routes the output gradient to the inputs; backward() replays
// the recording in reverse, visiting each node exactly once. A tape is built
// fresh per forward pass and is single-owner; different tapes are independent.
//
// Gradient flow is strictly sequential, so identical seeds give bit-identical
// gradients.
class Tape {
 public:
  Var leaf(Tensor value);

  const Tensor& value(Var v) const { return nodes_[v].value; }
  // Valid after backward(); zero for nodes the loss does not reach.
  const Tensor& grad(Var v) const { return nodes_[v].grad; }

  // C = A[m,k] * B[k,p]
  Var matmul(Var a, Var b);
  // C = A[m,k] * B[p,k]^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  // Adds a length-d row vector to every row of a [n,d] matrix.
  Var add_rowvec(Var a, Var bias);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double c);
  Var relu(Var a);
  Var concat_cols(const std::vector<Var>& xs);
  Var row_slice(Var a, std::size_t start, std::size_t count);
  // out[i] = table[ids[i]], backward scatter-adds into the table.
  Var embedding_lookup(Var table, const std::vector<int>& ids);
  // out (rows x cols) with out[k] = table(flat_ids[k], col); flat_ids entries
  // of -1 contribute 0 and receive no gradient. Used to expand per-bucket
  // bias/gate tables into per-pair matrices. The id vector is shared because
  // every head and layer gathers through the same pair->bucket map.
  Var gather_entries(Var table, std::shared_ptr<const std::vector<int>> flat_ids,
                     std::size_t col, std::size_t out_rows, std::size_t out_cols);
  // Row softmax over the masked support only; out-of-mask entries are exactly
  // zero and never touched (no -inf arithmetic). mask == nullptr means full
  // support. The mask must outlive the tape.
  Var masked_row_softmax(Var logits, const FocalMask* mask = nullptr);
  Var layer_norm(Var x, Var gamma, Var beta);
  // Weighted mean of -log softmax(logits)[label]; class_weights (one entry
  // per class, empty = uniform) are normalized to mean 1 over the rows.
  Var cross_entropy(Var logits, std::vector<int> labels,
                    std::vector<double> class_weights = {});
  Var sum(Var a);

  Var linear(Var x, Var w, Var b) { return add_rowvec(matmul(x, w), b); }

  // Seeds d(loss)=1 and accumulates gradients for every node reachable from
  // the scalar loss. Throws std::invalid_argument on a non-scalar loss.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> back;  // empty for leaves
  };

  Var push(Tensor value, std::function<void(Tape&)> back);
  std::vector<Node> nodes_;
};

// Numerically-equivalent dense reference for the masked softmax: adds -1e9 to
// out-of-mask logits and runs a plain row softmax. Kept for cross-checking
// the support-exclusion path.
Tensor softmax_negbias_reference(const Tensor& logits, const FocalMask* mask);

constexpr double kLayerNormEps = 1e-5;

}  // namespace ffgt
