#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ffgt/attention.hpp"
#include "ffgt/rng.hpp"
#include "ffgt/sbm.hpp"
#include "ffgt/tape.hpp"

namespace ffgt {

struct ModelConfig {
  int dim = 32;
  int layers = 2;
  int full_heads = 2;
  int focal_heads = 2;
  int fl = 1;
  int mlp_hidden = 64;
  bool gate_enabled = false;
  int max_hop_bucket = 10;
  int lap_pe_k = 8;
  bool virtual_node = false;
  int feature_vocab = 3;
  int num_edge_types = 1;
  int num_classes = 2;

  int num_heads() const { return full_heads + focal_heads; }
  int head_dim() const { return dim / num_heads(); }
  void validate() const;  // throws ConfigError
};

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

// Node classifier: feature embedding + LapPE injection, `layers` stacked FFGT
// layers sharing one bias/gate table, linear per-node head.
class Model {
 public:
  Model() = default;
  Model(const ModelConfig& config, Rng& rng);

  ModelConfig cfg;
  Tensor embedding;  // [vocab (+1 with virtual node), dim]
  Tensor w_pe;       // [lap_pe_k, dim]
  std::shared_ptr<BiasTables> bias;
  std::shared_ptr<GateTable> gate;
  std::vector<FfgtLayerParams> layer_params;
  Tensor w_cls, b_cls;

  // Stable parameter registry; gradient vectors, Adam state and checkpoints
  // all follow this order.
  std::vector<ParamRef> params();
  std::vector<std::pair<std::string, const Tensor*>> params() const;

  std::size_t num_params() const;
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);
};

// Everything graph-derived that the forward pass needs, built once per sample
// (hops are consumed at build time; masks and PE are cached here).
struct GraphContext {
  Graph graph;  // virtual-augmented when the config asks for it
  FocalMask mask;
  bool has_mask = false;
  Tensor pe;                // [n, lap_pe_k], zero row for the virtual node
  std::vector<int> labels;  // real nodes only
  int n_real = 0;
};

GraphContext make_context(const LabeledSample& sample, const ModelConfig& cfg);

struct ModelVars {
  Var embedding = kNoVar, w_pe = kNoVar;
  Var hop_bias = kNoVar, edge_bias = kNoVar, gate = kNoVar;
  std::vector<FfgtLayerVars> layers;
  Var w_cls = kNoVar, b_cls = kNoVar;
  std::vector<Var> ordered;  // aligned with Model::params()
};

ModelVars lift_model(Tape& tape, const Model& model);

// Per-node class logits for the real nodes (virtual node excluded).
Var model_forward(Tape& tape, const Model& model, const ModelVars& vars,
                  const GraphContext& ctx);

// Convenience: fresh tape, returns logits values.
Tensor forward_model(const LabeledSample& sample, const Model& model);

}  // namespace ffgt
