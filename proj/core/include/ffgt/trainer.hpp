#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffgt/adam.hpp"
#include "ffgt/model.hpp"
#include "ffgt/sbm.hpp"

namespace ffgt {

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = kAdamEps;
  int epochs = 80;
  int batch_size = 32;
  bool class_weighting = true;
  int eval_every = 1;
  std::uint64_t seed = 1;
  int jobs = 0;  // 0 = hardware concurrency; results are jobs-invariant

  void validate() const;
};

struct EpochStat {
  int epoch = 0;
  double train_loss = 0.0;
  double val_acc = -1.0;  // negative when this epoch was not evaluated
  double val_bal_acc = -1.0;
};

struct RunReport {
  std::vector<EpochStat> epochs;
  int best_epoch = 0;
  double best_val_acc = 0.0;
  double test_acc = 0.0;
  double test_bal_acc = 0.0;
  std::uint64_t seed = 0;
  std::string fl_label;  // "vanilla" or "fl=<k>"
  // Console-only; excluded from serialized artifacts so identical seeds give
  // byte-identical report files.
  double wall_clock_sec = 0.0;
  // Argmax class per test node, per graph; accuracy is recomputable from
  // these plus the dataset labels.
  std::vector<std::vector<int>> test_predictions;
  // Flattened best-validation parameters (registry order), for checkpointing.
  std::vector<double> best_params;
};

struct EvalResult {
  double acc = 0.0;
  double bal_acc = 0.0;
  std::vector<std::vector<int>> predictions;
};

// Mean per-class weight n/(C * n_c), normalized to mean 1; uniform when
// weighting is off.
std::vector<double> class_weights_from(const std::vector<LabeledSample>& samples,
                                       int num_classes, bool enabled);

EvalResult evaluate(const Model& model, const std::vector<GraphContext>& contexts,
                    int jobs);

// Deterministic per seed: param init, epoch shuffling, batching, and the
// ordered gradient reduction are all independent of the job count.
// Selects the best-validation-accuracy epoch's parameters for the test pass.
// Throws DivergenceError when the loss goes non-finite.
RunReport train(const SbmDataset& data, const TrainConfig& cfg);

struct AblationRow {
  std::string fl_label;
  int fl = -1;  // -1 = vanilla (focal_heads = 0)
  std::vector<double> test_accs;
  std::vector<double> test_bal_accs;
  double mean_acc = 0.0, std_acc = 0.0;
  double mean_bal_acc = 0.0, std_bal_acc = 0.0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<RunReport> reports;  // row-major: rows x seeds
};

// One row per fl entry (fl = -1 for the vanilla backbone with
// full_heads = M + N, focal_heads = 0), each averaged over `seeds`.
AblationResult ablate_fl(const SbmDataset& data, const TrainConfig& base,
                         const std::vector<int>& fl_list,
                         const std::vector<std::uint64_t>& seeds);

// --- report serialization ----------------------------------------------------

std::string report_to_text(const RunReport& report, const std::string& config_echo);

// CSV rows: run_id,fl,seed,epoch,split,metric,value
std::string report_csv_header();
std::string report_csv_rows(const std::string& run_id, const RunReport& report);

std::string ablation_csv(const AblationResult& result);

}  // namespace ffgt
