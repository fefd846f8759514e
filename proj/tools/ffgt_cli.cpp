// ffgt command line: dataset generation, statistics, training, FL ablation,
// gradient checking, and focal-mask inspection.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "ffgt/checkpoint.hpp"
#include "ffgt/config.hpp"
#include "ffgt/errors.hpp"
#include "ffgt/gradcheck.hpp"
#include "ffgt/trainer.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;
  std::string data_dir;
  std::int64_t seed = -1;  // -1 = use the config's seeds
  int jobs = 0;
};

ffgt::CliConfig load_config(const GlobalOpts& g) {
  if (g.config_path.empty()) throw ffgt::ConfigError("--config is required");
  ffgt::CliConfig cfg = ffgt::parse_config_file(g.config_path);
  if (g.seed >= 0) {
    cfg.sbm.seed = static_cast<std::uint64_t>(g.seed);
    cfg.train.seed = static_cast<std::uint64_t>(g.seed);
  }
  cfg.train.jobs = g.jobs;
  return cfg;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ffgt::IoError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw ffgt::IoError("write failed: " + path.string());
}

ordered_json sbm_manifest_block(const ffgt::CliConfig& cfg) {
  ordered_json j;
  j["p"] = cfg.sbm.p;
  j["q"] = cfg.sbm.q;
  j["p_p"] = cfg.sbm.p_p;
  j["q_p"] = cfg.sbm.q_p;
  j["n_communities"] = cfg.sbm.n_communities;
  j["community_size_lo"] = cfg.sbm.community_size_lo;
  j["community_size_hi"] = cfg.sbm.community_size_hi;
  j["pattern_size"] = cfg.sbm.pattern_size;
  j["n_patterns"] = cfg.sbm.n_patterns;
  j["feature_vocab"] = cfg.sbm.feature_vocab;
  j["seed"] = cfg.sbm.seed;
  return j;
}

int cmd_gen(const GlobalOpts& g) {
  const ffgt::CliConfig cfg = load_config(g);
  if (g.out_dir.empty()) throw ffgt::ConfigError("gen: --out is required");
  std::error_code ec;
  fs::create_directories(g.out_dir, ec);
  if (ec) throw ffgt::IoError("cannot create out dir: " + g.out_dir);

  const ffgt::SbmDataset ds =
      ffgt::generate_dataset(cfg.sbm, cfg.n_train, cfg.n_val, cfg.n_test, g.jobs);

  auto dump_split = [&](const char* name, const std::vector<ffgt::LabeledSample>& split) {
    std::vector<ffgt::Graph> graphs;
    graphs.reserve(split.size());
    for (const auto& s : split) graphs.push_back(s.graph);
    ffgt::write_graph_file((fs::path(g.out_dir) / name).string(), graphs);
  };
  dump_split("train.jsonl", ds.train);
  dump_split("val.jsonl", ds.val);
  dump_split("test.jsonl", ds.test);

  ordered_json manifest;
  manifest["format"] = "ffgt-dataset-manifest-v1";
  manifest["sbm"] = sbm_manifest_block(cfg);
  manifest["counts"] = {{"train", cfg.n_train}, {"val", cfg.n_val}, {"test", cfg.n_test}};
  manifest["stats"] = {{"n_graphs", ds.stats.n_graphs},
                       {"avg_nodes", ds.stats.avg_nodes},
                       {"avg_degree", ds.stats.avg_degree},
                       {"avg_diameter", ds.stats.avg_diameter}};
  manifest["config_echo"] = cfg.echo();
  write_text_file(fs::path(g.out_dir) / "manifest.json", manifest.dump(2) + "\n");

  std::printf("wrote %d/%d/%d graphs to %s\n", cfg.n_train, cfg.n_val, cfg.n_test,
              g.out_dir.c_str());
  std::printf("stats: avg_nodes=%.2f avg_degree=%.3f avg_diameter=%.3f\n",
              ds.stats.avg_nodes, ds.stats.avg_degree, ds.stats.avg_diameter);
  return 0;
}

std::vector<ffgt::LabeledSample> load_split(const fs::path& dir, const char* name) {
  const fs::path path = dir / name;
  if (!fs::exists(path)) throw ffgt::IoError("missing split file: " + path.string());
  std::vector<ffgt::LabeledSample> out;
  for (auto& graph : ffgt::read_graph_file(path.string())) {
    if (graph.node_labels.empty())
      throw ffgt::IoError("graphs in " + path.string() + " carry no node labels");
    out.push_back(ffgt::LabeledSample{std::move(graph)});
  }
  return out;
}

ffgt::SbmDataset load_dataset(const std::string& data_dir) {
  if (data_dir.empty()) throw ffgt::ConfigError("--data is required");
  if (!fs::is_directory(data_dir)) throw ffgt::IoError("no such data dir: " + data_dir);
  ffgt::SbmDataset ds;
  ds.train = load_split(data_dir, "train.jsonl");
  ds.val = load_split(data_dir, "val.jsonl");
  ds.test = load_split(data_dir, "test.jsonl");
  return ds;
}

void verify_manifest(const std::string& data_dir, const ffgt::CliConfig& cfg) {
  const fs::path path = fs::path(data_dir) / "manifest.json";
  if (!fs::exists(path)) throw ffgt::IoError("missing manifest: " + path.string());
  std::ifstream in(path);
  ordered_json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ffgt::IoError(std::string("bad manifest: ") + e.what());
  }
  const ordered_json expected = sbm_manifest_block(cfg);
  const auto& found = manifest.at("sbm");
  for (const auto& [key, value] : expected.items()) {
    if (!found.contains(key) || found.at(key) != value)
      throw ffgt::ManifestMismatchError(
          "manifest [sbm] key '" + key + "' does not match the config (config " +
          value.dump() + ", dataset " +
          (found.contains(key) ? found.at(key).dump() : "<absent>") + ")");
  }
}

void write_predictions_csv(const fs::path& path, const ffgt::SbmDataset& ds,
                           const ffgt::RunReport& report) {
  std::string out = "graph_index,node_index,label,prediction\n";
  for (std::size_t gi = 0; gi < report.test_predictions.size(); ++gi) {
    const auto& preds = report.test_predictions[gi];
    const auto& labels = ds.test[gi].graph.node_labels;
    for (std::size_t ni = 0; ni < preds.size(); ++ni)
      out += std::to_string(gi) + "," + std::to_string(ni) + "," +
             std::to_string(labels[ni]) + "," + std::to_string(preds[ni]) + "\n";
  }
  write_text_file(path, out);
}

int cmd_train(const GlobalOpts& g) {
  ffgt::CliConfig cfg = load_config(g);
  if (g.out_dir.empty()) throw ffgt::ConfigError("train: --out is required");
  const ffgt::SbmDataset ds = load_dataset(g.data_dir);
  verify_manifest(g.data_dir, cfg);
  std::error_code ec;
  fs::create_directories(g.out_dir, ec);
  if (ec) throw ffgt::IoError("cannot create out dir: " + g.out_dir);

  const ffgt::RunReport report = ffgt::train(ds, cfg.train);
  const std::string run_id = "run-" + report.fl_label + "-s" + std::to_string(report.seed);

  write_text_file(fs::path(g.out_dir) / "report.txt",
                  ffgt::report_to_text(report, cfg.echo()));
  write_text_file(fs::path(g.out_dir) / "runs.csv",
                  ffgt::report_csv_header() + ffgt::report_csv_rows(run_id, report));
  write_predictions_csv(fs::path(g.out_dir) / "test_predictions.csv", ds, report);

  // Best-validation parameters, reconstructed for the checkpoint dump.
  {
    ffgt::Rng rng(cfg.train.seed);
    ffgt::Model model(cfg.train.model, rng);
    model.unflatten(report.best_params);
    std::vector<std::pair<std::string, const ffgt::Tensor*>> records;
    for (const auto& [name, tensor] : model.params()) records.emplace_back(name, tensor);
    ffgt::save_checkpoint((fs::path(g.out_dir) / "best.ckpt").string(), records);
  }

  std::printf("%s: test_acc=%.4f test_bal_acc=%.4f best_epoch=%d (%.1fs)\n",
              run_id.c_str(), report.test_acc, report.test_bal_acc, report.best_epoch,
              report.wall_clock_sec);
  return 0;
}

int cmd_ablate(const GlobalOpts& g) {
  ffgt::CliConfig cfg = load_config(g);
  if (g.out_dir.empty()) throw ffgt::ConfigError("ablate: --out is required");
  const ffgt::SbmDataset ds = load_dataset(g.data_dir);
  verify_manifest(g.data_dir, cfg);
  std::error_code ec;
  fs::create_directories(g.out_dir, ec);
  if (ec) throw ffgt::IoError("cannot create out dir: " + g.out_dir);

  std::vector<std::uint64_t> seeds = cfg.seeds;
  if (g.seed >= 0) seeds = {static_cast<std::uint64_t>(g.seed)};
  const ffgt::AblationResult result = ffgt::ablate_fl(ds, cfg.train, cfg.fl_list, seeds);

  write_text_file(fs::path(g.out_dir) / "ablation.csv", ffgt::ablation_csv(result));
  std::string runs = ffgt::report_csv_header();
  for (const auto& rep : result.reports) {
    const std::string run_id = "ablate-" + rep.fl_label + "-s" + std::to_string(rep.seed);
    runs += ffgt::report_csv_rows(run_id, rep);
  }
  write_text_file(fs::path(g.out_dir) / "runs.csv", runs);
  ordered_json manifest;
  manifest["format"] = "ffgt-ablation-manifest-v1";
  manifest["config_echo"] = cfg.echo();
  write_text_file(fs::path(g.out_dir) / "ablation_manifest.json", manifest.dump(2) + "\n");

  for (const auto& row : result.rows)
    std::printf("%-8s mean_acc=%.4f +- %.4f  (bal %.4f +- %.4f, %zu seeds)\n",
                row.fl_label.c_str(), row.mean_acc, row.std_acc, row.mean_bal_acc,
                row.std_bal_acc, row.test_accs.size());
  return 0;
}

int cmd_stats(const GlobalOpts& g) {
  const ffgt::SbmDataset ds = load_dataset(g.data_dir);
  std::vector<const ffgt::LabeledSample*> all;
  for (const auto* split : {&ds.train, &ds.val, &ds.test})
    for (const auto& s : *split) all.push_back(&s);
  const ffgt::DatasetStats st = ffgt::dataset_stats(all);
  ordered_json j;
  j["n_graphs"] = st.n_graphs;
  j["avg_nodes"] = st.avg_nodes;
  j["avg_degree"] = st.avg_degree;
  j["avg_diameter"] = st.avg_diameter;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, bool corrupt) {
  const auto results = ffgt::run_gradcheck_suite(seed, corrupt);
  bool all_pass = true;
  std::printf("%-20s %-14s %s\n", "op", "max_rel_error", "status");
  for (const auto& r : results) {
    std::printf("%-20s %-14.3e %s\n", r.name.c_str(), r.max_rel_error,
                r.pass ? "PASS" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

int cmd_maskdump(const std::string& file, int index, int fl) {
  const auto graphs = ffgt::read_graph_file(file);
  if (index < 0 || static_cast<std::size_t>(index) >= graphs.size())
    throw std::invalid_argument("maskdump: index " + std::to_string(index) +
                                " out of range (file has " +
                                std::to_string(graphs.size()) + " graphs)");
  const ffgt::Graph& g = graphs[index];
  const ffgt::HopMatrix hops = ffgt::hop_matrix(g);
  const ffgt::FocalMask mask = ffgt::focal_mask(hops, fl);
  const auto dense = mask.dense();
  std::printf("graph %d: n=%d, fl=%d\n", index, g.num_nodes, fl);
  for (int i = 0; i < mask.n; ++i) {
    std::string row;
    for (int j = 0; j < mask.n; ++j)
      row += dense[static_cast<std::size_t>(i) * mask.n + j] ? '1' : '0';
    std::printf("%s\n", row.c_str());
  }
  std::printf("ego-net sizes:");
  for (int i = 0; i < mask.n; ++i) std::printf(" %zu", mask.rows[i].size());
  std::printf("\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Focal and full-range graph transformer workbench"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--config", g.config_path, "Path to the key = value config file");
  app.add_option("--seed", g.seed, "Override every config seed");
  app.add_option("--jobs", g.jobs, "Worker thread cap (0 = all cores)");
  app.add_option("--out", g.out_dir, "Output directory");

  auto* gen = app.add_subcommand("gen", "Generate an SBM-PATTERN dataset");
  auto* stats = app.add_subcommand("stats", "Recompute statistics of a dataset dir");
  auto* train = app.add_subcommand("train", "Train one model on a dataset dir");
  auto* ablate = app.add_subcommand("ablate", "Run the focal-length ablation");
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  auto* maskdump = app.add_subcommand("maskdump", "Print the dense focal mask of one graph");

  for (auto* cmd : {stats, train, ablate})
    cmd->add_option("--data", g.data_dir, "Dataset directory (from gen)");

  std::uint64_t gc_seed = 1;
  bool gc_corrupt = false;
  gradcheck->add_option("--seed", gc_seed, "Gradcheck seed");
  gradcheck->add_flag("--corrupt", gc_corrupt,
                      "Corrupt one gradient on purpose (negative control)");

  std::string md_file;
  int md_index = 0, md_fl = 1;
  maskdump->add_option("--file", md_file, "Graph file (jsonl)")->required();
  maskdump->add_option("--index", md_index, "Graph index within the file");
  maskdump->add_option("--fl", md_fl, "Focal length");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(g);
    if (stats->parsed()) return cmd_stats(g);
    if (train->parsed()) return cmd_train(g);
    if (ablate->parsed()) return cmd_ablate(g);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_corrupt);
    if (maskdump->parsed()) return cmd_maskdump(md_file, md_index, md_fl);
  } catch (const ffgt::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const ffgt::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const ffgt::ManifestMismatchError& e) {
    std::fprintf(stderr, "data mismatch: %s\n", e.what());
    return 4;
  } catch (const ffgt::DivergenceError& e) {
    std::fprintf(stderr, "training diverged: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
