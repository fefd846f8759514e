#include "ffgt/model.hpp"

#include <cmath>

#include "ffgt/errors.hpp"
#include "ffgt/lap_pe.hpp"

namespace ffgt {

void ModelConfig::validate() const {
  if (dim < 1 || layers < 1 || mlp_hidden < 1)
    throw ConfigError("model: dim, layers, mlp_hidden must be positive");
  if (full_heads < 1) throw ConfigError("model: full_heads must be >= 1");
  if (focal_heads < 0) throw ConfigError("model: focal_heads must be >= 0");
  if (num_heads() == 0 || dim % num_heads() != 0)
    throw ConfigError("model: dim must divide evenly across full_heads + focal_heads");
  if (fl < 0) throw ConfigError("model: fl must be >= 0");
  if (max_hop_bucket < 1) throw ConfigError("model: max_hop_bucket must be >= 1");
  if (lap_pe_k < 0) throw ConfigError("model: lap_pe_k must be >= 0");
  if (feature_vocab < 1) throw ConfigError("model: feature_vocab must be >= 1");
  if (num_edge_types < 1) throw ConfigError("model: num_edge_types must be >= 1");
  if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
}

namespace {

Tensor xavier(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros({fan_in, fan_out});
  for (auto& x : t.data) x = rng.uniform_real(-a, a);
  return t;
}

Tensor fill(std::vector<std::size_t> shape, double v) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& x : t.data) x = v;
  return t;
}

}  // namespace

Model::Model(const ModelConfig& config, Rng& rng) : cfg(config) {
  cfg.validate();
  const auto d = static_cast<std::size_t>(cfg.dim);
  const auto dh = static_cast<std::size_t>(cfg.head_dim());
  const std::size_t vocab = cfg.feature_vocab + (cfg.virtual_node ? 1 : 0);

  // Draw order is fixed (registry order) so identical seeds give identical
  // models regardless of caller behavior.
  const double emb_a = 1.0 / std::sqrt(static_cast<double>(d));
  embedding = Tensor::zeros({vocab, d});
  for (auto& x : embedding.data) x = rng.uniform_real(-emb_a, emb_a);
  if (cfg.lap_pe_k > 0)
    w_pe = xavier(rng, static_cast<std::size_t>(cfg.lap_pe_k), d);

  BucketScheme scheme;
  scheme.max_hop = cfg.max_hop_bucket;
  bias = std::make_shared<BiasTables>();
  bias->scheme = scheme;
  bias->hop_bias = Tensor::zeros({static_cast<std::size_t>(scheme.num_buckets()),
                                  static_cast<std::size_t>(cfg.num_heads())});
  bias->edge_bias = Tensor::zeros({static_cast<std::size_t>(cfg.num_edge_types),
                                   static_cast<std::size_t>(cfg.num_heads())});
  gate = std::make_shared<GateTable>();
  gate->enabled = cfg.gate_enabled;
  if (gate->enabled)
    gate->gate = fill({static_cast<std::size_t>(scheme.num_buckets()),
                       static_cast<std::size_t>(cfg.num_heads())},
                      1.0);

  layer_params.resize(cfg.layers);
  for (auto& lp : layer_params) {
    for (int h = 0; h < cfg.full_heads; ++h)
      lp.full_heads.push_back({xavier(rng, d, dh), xavier(rng, d, dh), xavier(rng, d, dh)});
    for (int h = 0; h < cfg.focal_heads; ++h)
      lp.focal_heads.push_back({xavier(rng, d, dh), xavier(rng, d, dh), xavier(rng, d, dh)});
    lp.bias = bias;
    lp.gate = gate;
    lp.merge = xavier(rng, d, d);
    lp.mlp.w1 = xavier(rng, d, static_cast<std::size_t>(cfg.mlp_hidden));
    lp.mlp.b1 = Tensor::zeros({static_cast<std::size_t>(cfg.mlp_hidden)});
    lp.mlp.w2 = xavier(rng, static_cast<std::size_t>(cfg.mlp_hidden), d);
    lp.mlp.b2 = Tensor::zeros({d});
    lp.ln1 = {fill({d}, 1.0), Tensor::zeros({d})};
    lp.ln2 = {fill({d}, 1.0), Tensor::zeros({d})};
  }
  w_cls = xavier(rng, d, static_cast<std::size_t>(cfg.num_classes));
  b_cls = Tensor::zeros({static_cast<std::size_t>(cfg.num_classes)});
}

std::vector<ParamRef> Model::params() {
  std::vector<ParamRef> out;
  out.push_back({"embedding", &embedding});
  if (cfg.lap_pe_k > 0) out.push_back({"w_pe", &w_pe});
  out.push_back({"hop_bias", &bias->hop_bias});
  out.push_back({"edge_bias", &bias->edge_bias});
  if (gate->enabled) out.push_back({"gate", &gate->gate});
  for (std::size_t l = 0; l < layer_params.size(); ++l) {
    auto& lp = layer_params[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    for (std::size_t h = 0; h < lp.full_heads.size(); ++h) {
      const std::string hp = prefix + "full" + std::to_string(h) + ".";
      out.push_back({hp + "w_q", &lp.full_heads[h].w_q});
      out.push_back({hp + "w_k", &lp.full_heads[h].w_k});
      out.push_back({hp + "w_v", &lp.full_heads[h].w_v});
    }
    for (std::size_t h = 0; h < lp.focal_heads.size(); ++h) {
      const std::string hp = prefix + "focal" + std::to_string(h) + ".";
      out.push_back({hp + "w_q", &lp.focal_heads[h].w_q});
      out.push_back({hp + "w_k", &lp.focal_heads[h].w_k});
      out.push_back({hp + "w_v", &lp.focal_heads[h].w_v});
    }
    out.push_back({prefix + "merge", &lp.merge});
    out.push_back({prefix + "mlp.w1", &lp.mlp.w1});
    out.push_back({prefix + "mlp.b1", &lp.mlp.b1});
    out.push_back({prefix + "mlp.w2", &lp.mlp.w2});
    out.push_back({prefix + "mlp.b2", &lp.mlp.b2});
    out.push_back({prefix + "ln1.gamma", &lp.ln1.gamma});
    out.push_back({prefix + "ln1.beta", &lp.ln1.beta});
    out.push_back({prefix + "ln2.gamma", &lp.ln2.gamma});
    out.push_back({prefix + "ln2.beta", &lp.ln2.beta});
  }
  out.push_back({"w_cls", &w_cls});
  out.push_back({"b_cls", &b_cls});
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> Model::params() const {
  auto refs = const_cast<Model*>(this)->params();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.emplace_back(r.name, r.tensor);
  return out;
}

std::size_t Model::num_params() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params()) n += t->numel();
  return n;
}

std::vector<double> Model::flatten() const {
  std::vector<double> flat;
  flat.reserve(num_params());
  for (const auto& [name, t] : params())
    flat.insert(flat.end(), t->data.begin(), t->data.end());
  return flat;
}

void Model::unflatten(const std::vector<double>& flat) {
  std::size_t off = 0;
  for (auto& ref : params()) {
    std::copy_n(flat.begin() + off, ref.tensor->data.size(), ref.tensor->data.begin());
    off += ref.tensor->data.size();
  }
  if (off != flat.size())
    throw std::invalid_argument("unflatten: parameter count mismatch");
}

GraphContext make_context(const LabeledSample& sample, const ModelConfig& cfg) {
  GraphContext ctx;
  ctx.n_real = sample.graph.num_nodes;
  ctx.labels = sample.graph.node_labels;
  if (static_cast<int>(sample.graph.node_feature_ids.size()) != ctx.n_real)
    throw ConfigError("make_context: sample has no node features");
  for (const int f : sample.graph.node_feature_ids)
    if (f < 0 || f >= cfg.feature_vocab)
      throw ConfigError("make_context: node feature id outside configured vocab");

  const LapPeFeatures pe = cfg.lap_pe_k > 0 ? lap_pe(sample.graph, cfg.lap_pe_k)
                                            : LapPeFeatures{};

  HopMatrix hops = hop_matrix(sample.graph);
  ctx.graph = sample.graph;
  if (cfg.virtual_node) {
    auto [ag, ah] = add_virtual_node(ctx.graph, hops, cfg.feature_vocab);
    ctx.graph = std::move(ag);
    hops = std::move(ah);
  }
  if (cfg.focal_heads > 0) {
    ctx.mask = focal_mask(hops, cfg.fl);
    ctx.has_mask = true;
  }
  if (cfg.lap_pe_k > 0) {
    ctx.pe = Tensor::zeros({static_cast<std::size_t>(ctx.graph.num_nodes),
                            static_cast<std::size_t>(cfg.lap_pe_k)});
    std::copy(pe.vectors.begin(), pe.vectors.end(), ctx.pe.data.begin());
  }
  return ctx;
}

ModelVars lift_model(Tape& tape, const Model& model) {
  ModelVars mv;
  auto track = [&](Var v) {
    mv.ordered.push_back(v);
    return v;
  };
  mv.embedding = track(tape.leaf(model.embedding));
  if (model.cfg.lap_pe_k > 0) mv.w_pe = track(tape.leaf(model.w_pe));
  mv.hop_bias = track(tape.leaf(model.bias->hop_bias));
  mv.edge_bias = track(tape.leaf(model.bias->edge_bias));
  if (model.gate->enabled) mv.gate = track(tape.leaf(model.gate->gate));
  for (const auto& lp : model.layer_params) {
    FfgtLayerVars lv;
    for (const auto& h : lp.full_heads)
      lv.full_heads.push_back(
          {track(tape.leaf(h.w_q)), track(tape.leaf(h.w_k)), track(tape.leaf(h.w_v))});
    for (const auto& h : lp.focal_heads)
      lv.focal_heads.push_back(
          {track(tape.leaf(h.w_q)), track(tape.leaf(h.w_k)), track(tape.leaf(h.w_v))});
    lv.merge = track(tape.leaf(lp.merge));
    lv.mlp_w1 = track(tape.leaf(lp.mlp.w1));
    lv.mlp_b1 = track(tape.leaf(lp.mlp.b1));
    lv.mlp_w2 = track(tape.leaf(lp.mlp.w2));
    lv.mlp_b2 = track(tape.leaf(lp.mlp.b2));
    lv.ln1_gamma = track(tape.leaf(lp.ln1.gamma));
    lv.ln1_beta = track(tape.leaf(lp.ln1.beta));
    lv.ln2_gamma = track(tape.leaf(lp.ln2.gamma));
    lv.ln2_beta = track(tape.leaf(lp.ln2.beta));
    mv.layers.push_back(std::move(lv));
  }
  mv.w_cls = track(tape.leaf(model.w_cls));
  mv.b_cls = track(tape.leaf(model.b_cls));
  return mv;
}

Var model_forward(Tape& tape, const Model& model, const ModelVars& vars,
                  const GraphContext& ctx) {
  const ModelConfig& cfg = model.cfg;
  if (cfg.focal_heads > 0 && !ctx.has_mask)
    throw std::invalid_argument("model_forward: focal heads need a context mask");

  // Hops (and with them the per-pair bucket/edge ids) are cheap to rebuild
  // relative to one forward pass; the expensive per-sample work (eigensolve,
  // masks) lives in GraphContext.
  HopMatrix hops = hop_matrix(ctx.graph);
  if (cfg.virtual_node) {
    // The virtual node is edgeless in the stored graph; restore its reserved
    // distance to every real node.
    const int v = hops.n - 1;
    for (int i = 0; i < hops.n; ++i) {
      hops.at(i, v) = kVirtualHop;
      hops.at(v, i) = kVirtualHop;
    }
    hops.at(v, v) = 0;
  }
  const PairIndex idx = make_pair_index(ctx.graph, hops, model.bias->scheme);

  Var h = tape.embedding_lookup(vars.embedding, ctx.graph.node_feature_ids);
  if (cfg.lap_pe_k > 0)
    h = tape.add(h, tape.matmul(tape.leaf(ctx.pe), vars.w_pe));

  std::vector<Var> head_bias, head_gate;
  for (int hd = 0; hd < cfg.num_heads(); ++hd) {
    head_bias.push_back(taped_bias_matrix(tape, vars.hop_bias, vars.edge_bias, idx, hd));
    if (vars.gate != kNoVar)
      head_gate.push_back(taped_gate_matrix(tape, vars.gate, idx, hd));
  }
  const FocalMask* mask = ctx.has_mask ? &ctx.mask : nullptr;
  for (const auto& lv : vars.layers)
    h = ffgt_layer_forward(tape, h, lv, head_bias, head_gate, mask);

  Var logits = tape.linear(h, vars.w_cls, vars.b_cls);
  if (cfg.virtual_node)
    logits = tape.row_slice(logits, 0, static_cast<std::size_t>(ctx.n_real));
  return logits;
}

Tensor forward_model(const LabeledSample& sample, const Model& model) {
  const GraphContext ctx = make_context(sample, model.cfg);
  Tape tape;
  const ModelVars vars = lift_model(tape, model);
  return tape.value(model_forward(tape, model, vars, ctx));
}

}  // namespace ffgt
