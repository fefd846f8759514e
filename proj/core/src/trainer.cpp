#include "ffgt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ffgt/errors.hpp"
#include "ffgt/parallel.hpp"

namespace ffgt {

void TrainConfig::validate() const {
  model.validate();
  if (lr <= 0.0) throw ConfigError("train: lr must be positive");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("train: adam betas must lie in [0, 1)");
  if (adam_eps <= 0.0) throw ConfigError("train: adam_eps must be positive");
}

std::vector<double> class_weights_from(const std::vector<LabeledSample>& samples,
                                       int num_classes, bool enabled) {
  std::vector<double> weights(num_classes, 1.0);
  if (!enabled) return weights;
  std::vector<double> counts(num_classes, 0.0);
  double total = 0.0;
  for (const auto& s : samples)
    for (const int y : s.graph.node_labels) {
      counts.at(y) += 1.0;
      total += 1.0;
    }
  for (int c = 0; c < num_classes; ++c)
    weights[c] = counts[c] > 0.0 ? total / (num_classes * counts[c]) : 1.0;
  return weights;
}

namespace {

std::vector<GraphContext> build_contexts(const std::vector<LabeledSample>& samples,
                                         const ModelConfig& cfg, int jobs) {
  std::vector<GraphContext> out(samples.size());
  parallel_for(static_cast<int>(samples.size()), jobs,
               [&](int i) { out[i] = make_context(samples[i], cfg); });
  return out;
}

struct GraphGrad {
  double loss = 0.0;
  std::vector<double> grads;
};

GraphGrad graph_gradient(const Model& model, const GraphContext& ctx,
                         const std::vector<double>& class_weights) {
  Tape tape;
  const ModelVars vars = lift_model(tape, model);
  const Var logits = model_forward(tape, model, vars, ctx);
  const Var loss = tape.cross_entropy(logits, ctx.labels, class_weights);
  tape.backward(loss);
  GraphGrad gg;
  gg.loss = tape.value(loss).data[0];
  gg.grads.reserve(model.num_params());
  for (const Var v : vars.ordered) {
    const auto& g = tape.grad(v).data;
    gg.grads.insert(gg.grads.end(), g.begin(), g.end());
  }
  return gg;
}

struct EvalCounts {
  long correct = 0, total = 0;
  std::vector<long> class_correct, class_total;
  std::vector<int> predictions;
};

EvalCounts eval_graph(const Model& model, const GraphContext& ctx) {
  Tape tape;
  const ModelVars vars = lift_model(tape, model);
  const Tensor& logits = tape.value(model_forward(tape, model, vars, ctx));
  const int classes = model.cfg.num_classes;
  EvalCounts ec;
  ec.class_correct.assign(classes, 0);
  ec.class_total.assign(classes, 0);
  const std::size_t n = logits.rows();
  ec.predictions.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    int arg = 0;
    for (int c = 1; c < classes; ++c)
      if (logits.at(i, c) > logits.at(i, arg)) arg = c;
    ec.predictions[i] = arg;
    const int y = ctx.labels[i];
    ec.total += 1;
    ec.class_total[y] += 1;
    if (arg == y) {
      ec.correct += 1;
      ec.class_correct[y] += 1;
    }
  }
  return ec;
}

}  // namespace

EvalResult evaluate(const Model& model, const std::vector<GraphContext>& contexts,
                    int jobs) {
  std::vector<EvalCounts> counts(contexts.size());
  parallel_for(static_cast<int>(contexts.size()), jobs,
               [&](int i) { counts[i] = eval_graph(model, contexts[i]); });
  EvalResult res;
  long correct = 0, total = 0;
  std::vector<long> cc(model.cfg.num_classes, 0), ct(model.cfg.num_classes, 0);
  res.predictions.reserve(contexts.size());
  for (auto& ec : counts) {
    correct += ec.correct;
    total += ec.total;
    for (int c = 0; c < model.cfg.num_classes; ++c) {
      cc[c] += ec.class_correct[c];
      ct[c] += ec.class_total[c];
    }
    res.predictions.push_back(std::move(ec.predictions));
  }
  res.acc = total > 0 ? static_cast<double>(correct) / total : 0.0;
  double bal = 0.0;
  int present = 0;
  for (int c = 0; c < model.cfg.num_classes; ++c)
    if (ct[c] > 0) {
      bal += static_cast<double>(cc[c]) / ct[c];
      ++present;
    }
  res.bal_acc = present > 0 ? bal / present : 0.0;
  return res;
}

namespace {

RunReport train_on_contexts(const std::vector<GraphContext>& train_ctx,
                            const std::vector<GraphContext>& val_ctx,
                            const std::vector<GraphContext>& test_ctx,
                            const std::vector<double>& class_weights,
                            const TrainConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  Model model(cfg.model, rng);
  const std::size_t n_params = model.num_params();
  AdamState adam(n_params);
  const AdamConfig adam_cfg{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps};

  RunReport report;
  report.seed = cfg.seed;
  report.fl_label = cfg.model.focal_heads > 0
                        ? "fl=" + std::to_string(cfg.model.fl)
                        : "vanilla";
  double best_val = -1.0;
  std::vector<double> best_params = model.flatten();
  int best_epoch = 0;

  const int n_train = static_cast<int>(train_ctx.size());
  std::vector<double> flat = model.flatten();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = rng.permutation(n_train);
    double epoch_loss = 0.0;
    for (int start = 0; start < n_train; start += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, n_train - start);
      std::vector<GraphGrad> results(count);
      parallel_for(count, cfg.jobs, [&](int b) {
        results[b] = graph_gradient(model, train_ctx[order[start + b]], class_weights);
      });
      // Ordered reduction keeps gradients identical for any job count.
      std::vector<double> grads(n_params, 0.0);
      double batch_loss = 0.0;
      for (const auto& r : results) {
        batch_loss += r.loss;
        for (std::size_t i = 0; i < n_params; ++i) grads[i] += r.grads[i];
      }
      const double inv = 1.0 / count;
      for (auto& g : grads) g *= inv;
      batch_loss *= inv;
      if (!std::isfinite(batch_loss))
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) +
                              ", batch starting at " + std::to_string(start));
      epoch_loss += batch_loss * count;
      flat = model.flatten();
      adam_step(flat, grads, adam, adam_cfg);
      model.unflatten(flat);
    }

    EpochStat stat;
    stat.epoch = epoch;
    stat.train_loss = epoch_loss / n_train;
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      const EvalResult val = evaluate(model, val_ctx, cfg.jobs);
      stat.val_acc = val.acc;
      stat.val_bal_acc = val.bal_acc;
      if (val.acc > best_val) {
        best_val = val.acc;
        best_epoch = epoch;
        best_params = model.flatten();
      }
    }
    report.epochs.push_back(stat);
  }

  model.unflatten(best_params);
  report.best_epoch = best_epoch;
  report.best_val_acc = best_val;
  report.best_params = std::move(best_params);
  const EvalResult test = evaluate(model, test_ctx, cfg.jobs);
  report.test_acc = test.acc;
  report.test_bal_acc = test.bal_acc;
  report.test_predictions = test.predictions;
  report.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace

RunReport train(const SbmDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.train.empty() || data.val.empty() || data.test.empty())
    throw std::invalid_argument("train: all three splits must be non-empty");
  const auto train_ctx = build_contexts(data.train, cfg.model, cfg.jobs);
  const auto val_ctx = build_contexts(data.val, cfg.model, cfg.jobs);
  const auto test_ctx = build_contexts(data.test, cfg.model, cfg.jobs);
  const auto weights =
      class_weights_from(data.train, cfg.model.num_classes, cfg.class_weighting);
  return train_on_contexts(train_ctx, val_ctx, test_ctx, weights, cfg);
}

AblationResult ablate_fl(const SbmDataset& data, const TrainConfig& base,
                         const std::vector<int>& fl_list,
                         const std::vector<std::uint64_t>& seeds) {
  if (fl_list.empty()) throw ConfigError("ablate: fl_list must be non-empty");
  if (seeds.empty()) throw ConfigError("ablate: seeds must be non-empty");
  AblationResult result;
  const auto weights =
      class_weights_from(data.train, base.model.num_classes, base.class_weighting);
  for (const int fl : fl_list) {
    TrainConfig cfg = base;
    AblationRow row;
    row.fl = fl;
    if (fl < 0) {
      cfg.model.full_heads = base.model.full_heads + base.model.focal_heads;
      cfg.model.focal_heads = 0;
      row.fl_label = "vanilla";
    } else {
      cfg.model.fl = fl;
      row.fl_label = "fl=" + std::to_string(fl);
    }
    cfg.validate();
    // Contexts depend on (config, fl) but not on the seed; share them.
    const auto train_ctx = build_contexts(data.train, cfg.model, cfg.jobs);
    const auto val_ctx = build_contexts(data.val, cfg.model, cfg.jobs);
    const auto test_ctx = build_contexts(data.test, cfg.model, cfg.jobs);
    for (const auto seed : seeds) {
      cfg.seed = seed;
      RunReport rep = train_on_contexts(train_ctx, val_ctx, test_ctx, weights, cfg);
      row.test_accs.push_back(rep.test_acc);
      row.test_bal_accs.push_back(rep.test_bal_acc);
      result.reports.push_back(std::move(rep));
    }
    auto mean_std = [](const std::vector<double>& xs) {
      const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
      double sq = 0.0;
      for (const double x : xs) sq += (x - mean) * (x - mean);
      const double sd = xs.size() > 1 ? std::sqrt(sq / (xs.size() - 1)) : 0.0;
      return std::make_pair(mean, sd);
    };
    std::tie(row.mean_acc, row.std_acc) = mean_std(row.test_accs);
    std::tie(row.mean_bal_acc, row.std_bal_acc) = mean_std(row.test_bal_accs);
    result.rows.push_back(std::move(row));
  }
  return result;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string report_to_text(const RunReport& report, const std::string& config_echo) {
  std::string out;
  out += "# ffgt run report\n";
  out += "fl = " + report.fl_label + "\n";
  out += "seed = " + std::to_string(report.seed) + "\n";
  out += "best_epoch = " + std::to_string(report.best_epoch) + "\n";
  out += "best_val_acc = " + fmt(report.best_val_acc) + "\n";
  out += "test_acc = " + fmt(report.test_acc) + "\n";
  out += "test_bal_acc = " + fmt(report.test_bal_acc) + "\n";
  out += "\nepoch,train_loss,val_acc,val_bal_acc\n";
  for (const auto& e : report.epochs) {
    out += std::to_string(e.epoch) + "," + fmt(e.train_loss) + ",";
    out += (e.val_acc < 0 ? "" : fmt(e.val_acc));
    out += ",";
    out += (e.val_bal_acc < 0 ? "" : fmt(e.val_bal_acc));
    out += "\n";
  }
  if (!config_echo.empty()) {
    out += "\n# effective config\n";
    for (std::size_t pos = 0; pos < config_echo.size();) {
      const auto nl = config_echo.find('\n', pos);
      const auto end = nl == std::string::npos ? config_echo.size() : nl;
      out += "# " + config_echo.substr(pos, end - pos) + "\n";
      pos = end + 1;
    }
  }
  return out;
}

std::string report_csv_header() { return "run_id,fl,seed,epoch,split,metric,value\n"; }

std::string report_csv_rows(const std::string& run_id, const RunReport& report) {
  std::string out;
  const std::string prefix = run_id + "," + report.fl_label + "," +
                             std::to_string(report.seed) + ",";
  for (const auto& e : report.epochs) {
    out += prefix + std::to_string(e.epoch) + ",train,loss," + fmt(e.train_loss) + "\n";
    if (e.val_acc >= 0) {
      out += prefix + std::to_string(e.epoch) + ",val,acc," + fmt(e.val_acc) + "\n";
      out += prefix + std::to_string(e.epoch) + ",val,bal_acc," + fmt(e.val_bal_acc) + "\n";
    }
  }
  out += prefix + std::to_string(report.best_epoch) + ",test,acc," + fmt(report.test_acc) + "\n";
  out += prefix + std::to_string(report.best_epoch) + ",test,bal_acc," +
         fmt(report.test_bal_acc) + "\n";
  return out;
}

std::string ablation_csv(const AblationResult& result) {
  std::string out = "fl,n_seeds,mean_test_acc,std_test_acc,mean_test_bal_acc,std_test_bal_acc\n";
  for (const auto& row : result.rows) {
    out += row.fl_label + "," + std::to_string(row.test_accs.size()) + "," +
           fmt4(row.mean_acc) + "," + fmt4(row.std_acc) + "," + fmt4(row.mean_bal_acc) +
           "," + fmt4(row.std_bal_acc) + "\n";
  }
  return out;
}

}  // namespace ffgt
