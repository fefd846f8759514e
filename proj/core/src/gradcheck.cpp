#include "ffgt/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ffgt/trainer.hpp"

namespace ffgt {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo, double hi) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& x : t.data) x = rng.uniform_real(lo, hi);
  return t;
}

namespace {

double rel_error(double a, double f) {
  return std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-4});
}

double eval_loss(const TapeLossFn& build, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
  return tape.value(build(tape, leaves)).data[0];
}

}  // namespace

double gradcheck_max_rel_error(const TapeLossFn& build, std::vector<Tensor> inputs,
                               double eps) {
  // Reverse-mode gradients.
  std::vector<Tensor> ad_grads;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
    const Var loss = build(tape, leaves);
    tape.backward(loss);
    for (const Var v : leaves) ad_grads.push_back(tape.grad(v));
  }
  // Central differences, one entry at a time.
  double worst = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (std::size_t i = 0; i < inputs[t].data.size(); ++i) {
      const double saved = inputs[t].data[i];
      inputs[t].data[i] = saved + eps;
      const double up = eval_loss(build, inputs);
      inputs[t].data[i] = saved - eps;
      const double down = eval_loss(build, inputs);
      inputs[t].data[i] = saved;
      const double fd = (up - down) / (2.0 * eps);
      worst = std::max(worst, rel_error(ad_grads[t].data[i], fd));
    }
  }
  return worst;
}

double model_gradcheck_max_rel_error(Model model, const GraphContext& ctx,
                                     const std::vector<double>& class_weights,
                                     double eps) {
  std::vector<double> ad;
  {
    Tape tape;
    const ModelVars vars = lift_model(tape, model);
    const Var loss =
        tape.cross_entropy(model_forward(tape, model, vars, ctx), ctx.labels, class_weights);
    tape.backward(loss);
    for (const Var v : vars.ordered) {
      const auto& g = tape.grad(v).data;
      ad.insert(ad.end(), g.begin(), g.end());
    }
  }
  auto loss_at = [&](const std::vector<double>& flat) {
    model.unflatten(flat);
    Tape tape;
    const ModelVars vars = lift_model(tape, model);
    const Var loss =
        tape.cross_entropy(model_forward(tape, model, vars, ctx), ctx.labels, class_weights);
    return tape.value(loss).data[0];
  };
  std::vector<double> flat = model.flatten();
  double worst = 0.0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double saved = flat[i];
    flat[i] = saved + eps;
    const double up = loss_at(flat);
    flat[i] = saved - eps;
    const double down = loss_at(flat);
    flat[i] = saved;
    worst = std::max(worst, rel_error(ad[i], (up - down) / (2.0 * eps)));
  }
  return worst;
}

namespace {

// A connected 8-node graph with mixed degrees, used by the model check.
LabeledSample gradcheck_sample(Rng& rng) {
  std::vector<std::pair<int, int>> edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4},
                                            {4, 5}, {5, 6}, {6, 7}, {0, 4},
                                            {2, 6}, {1, 5}};
  std::vector<int> feats(8), labels(8);
  for (auto& f : feats) f = static_cast<int>(rng.uniform_int(0, 2));
  for (auto& y : labels) y = static_cast<int>(rng.uniform_int(0, 1));
  return LabeledSample{make_graph(8, edges, feats, labels)};
}

FocalMask small_mask(Rng& rng, int n) {
  // Random symmetric support with guaranteed self-inclusion.
  std::vector<std::uint8_t> dense(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i) {
    dense[static_cast<std::size_t>(i) * n + i] = 1;
    for (int j = i + 1; j < n; ++j)
      if (rng.bernoulli(0.5)) {
        dense[static_cast<std::size_t>(i) * n + j] = 1;
        dense[static_cast<std::size_t>(j) * n + i] = 1;
      }
  }
  FocalMask m;
  m.n = n;
  m.fl = 1;
  m.rows.resize(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (dense[static_cast<std::size_t>(i) * n + j]) m.rows[i].push_back(j);
  return m;
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, bool corrupt) {
  std::vector<GradCheckResult> results;
  Rng rng(seed);
  bool first = true;

  auto check = [&](const std::string& name, const TapeLossFn& build,
                   std::vector<Tensor> inputs) {
    double err = gradcheck_max_rel_error(build, std::move(inputs));
    if (corrupt && first) err += 1.0;  // negative control
    first = false;
    results.push_back({name, err, err < kGradCheckTol});
  };

  // Each primitive feeds a fixed random linear functional so every output
  // entry influences the scalar loss.
  auto weighted = [](Tape& t, Var out, const Tensor& w) {
    return t.sum(t.mul(out, t.leaf(w)));
  };

  {
    const Tensor a = random_tensor(rng, {3, 4}), b = random_tensor(rng, {4, 2});
    const Tensor w = random_tensor(rng, {3, 2});
    check("matmul",
          [&](Tape& t, const std::vector<Var>& in) {
            return weighted(t, t.matmul(in[0], in[1]), w);
          },
          {a, b});
  }
  {
    const Tensor a = random_tensor(rng, {3, 4}), b = random_tensor(rng, {5, 4});
    const Tensor w = random_tensor(rng, {3, 5});
    check("matmul_nt",
          [&](Tape& t, const std::vector<Var>& in) {
            return weighted(t, t.matmul_nt(in[0], in[1]), w);
          },
          {a, b});
  }
  {
    const Tensor a = random_tensor(rng, {4, 3}), b = random_tensor(rng, {4, 3});
    const Tensor w = random_tensor(rng, {4, 3});
    check("add",
          [&](Tape& t, const std::vector<Var>& in) {
            return weighted(t, t.add(in[0], in[1]), w);
          },
          {a, b});
    check("mul",
          [&](Tape& t, const std::vector<Var>& in) {
            return weighted(t, t.mul(in[0], in[1]), w);
          },
          {a, b});
  }
  {
    const Tensor a = random_tensor(rng, {4, 3}), b = random_tensor(rng, {3});
    const Tensor w = random_tensor(rng, {4, 3});
    check("add_rowvec",
          [&](Tape& t, const std::vector<Var>& in) {
            return weighted(t, t.add_rowvec(in[0], in[1]), w);
          },
          {a, b});
  }
  {
    const Tensor a = random_tensor(rng, {4, 5});
    const Tensor w = random_tensor(rng, {4, 5});
    check("scale",
          [&](Tape& t, const std::vector<Var>& in) {
            return weighted(t, t.scale(in[0], -1.7), w);
          },
          {a});
    check("relu",
          [&](Tape& t, const std::vector<Var>& in) {
            return weighted(t, t.relu(in[0]), w);
          },
          {a});
  }
  {
    const Tensor a = random_tensor(rng, {3, 2}), b = random_tensor(rng, {3, 4});
    const Tensor w = random_tensor(rng, {3, 6});
    check("concat_cols",
          [&](Tape& t, const std::vector<Var>& in) {
            return weighted(t, t.concat_cols({in[0], in[1]}), w);
          },
          {a, b});
  }
  {
    const Tensor a = random_tensor(rng, {5, 3});
    const Tensor w = random_tensor(rng, {2, 3});
    check("row_slice",
          [&](Tape& t, const std::vector<Var>& in) {
            return weighted(t, t.row_slice(in[0], 1, 2), w);
          },
          {a});
  }
  {
    const Tensor table = random_tensor(rng, {6, 4});
    const std::vector<int> ids = {3, 0, 0, 5, 2};
    const Tensor w = random_tensor(rng, {5, 4});
    check("embedding_lookup",
          [&, ids](Tape& t, const std::vector<Var>& in) {
            return weighted(t, t.embedding_lookup(in[0], ids), w);
          },
          {table});
  }
  {
    const Tensor table = random_tensor(rng, {7, 3});
    auto ids = std::make_shared<std::vector<int>>(
        std::vector<int>{0, 2, -1, 6, 3, 3, -1, 1, 5, 0, 4, 2});
    const Tensor w = random_tensor(rng, {3, 4});
    check("gather_entries",
          [&, ids](Tape& t, const std::vector<Var>& in) {
            return weighted(t, t.gather_entries(in[0], ids, 1, 3, 4), w);
          },
          {table});
  }
  {
    const int n = 6;
    const Tensor logits = random_tensor(rng, {6, 6}, -2.0, 2.0);
    const auto mask = std::make_shared<FocalMask>(small_mask(rng, n));
    const Tensor w = random_tensor(rng, {6, 6});
    check("masked_row_softmax",
          [&, mask](Tape& t, const std::vector<Var>& in) {
            return weighted(t, t.masked_row_softmax(in[0], mask.get()), w);
          },
          {logits});
  }
  {
    const Tensor x = random_tensor(rng, {4, 6}), gamma = random_tensor(rng, {6}, 0.5, 1.5),
                 beta = random_tensor(rng, {6});
    const Tensor w = random_tensor(rng, {4, 6});
    check("layer_norm",
          [&](Tape& t, const std::vector<Var>& in) {
            return weighted(t, t.layer_norm(in[0], in[1], in[2]), w);
          },
          {x, gamma, beta});
  }
  {
    const Tensor logits = random_tensor(rng, {5, 3}, -2.0, 2.0);
    const std::vector<int> labels = {0, 2, 1, 1, 0};
    const std::vector<double> cw = {1.0, 2.0, 0.5};
    check("cross_entropy",
          [labels, cw](Tape& t, const std::vector<Var>& in) {
            return t.cross_entropy(in[0], labels, cw);
          },
          {logits});
  }
  {
    const Tensor x = random_tensor(rng, {4, 3}), wmat = random_tensor(rng, {3, 5}),
                 b = random_tensor(rng, {5});
    const Tensor w = random_tensor(rng, {4, 5});
    check("linear",
          [&](Tape& t, const std::vector<Var>& in) {
            return weighted(t, t.linear(in[0], in[1], in[2]), w);
          },
          {x, wmat, b});
  }
  {
    // Full 2-layer FFGT model, every parameter perturbed.
    const LabeledSample sample = gradcheck_sample(rng);
    ModelConfig mc;
    mc.dim = 8;
    mc.layers = 2;
    mc.full_heads = 1;
    mc.focal_heads = 1;
    mc.fl = 1;
    mc.mlp_hidden = 16;
    mc.lap_pe_k = 2;
    mc.max_hop_bucket = 4;
    mc.feature_vocab = 3;
    const GraphContext ctx = make_context(sample, mc);
    Model model(mc, rng);
    const double err =
        model_gradcheck_max_rel_error(std::move(model), ctx, {1.0, 1.5});
    results.push_back({"ffgt_model", err, err < kGradCheckTol});
  }
  return results;
}

}  // namespace ffgt
