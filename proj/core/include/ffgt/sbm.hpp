#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffgt/graph.hpp"
#include "ffgt/rng.hpp"

namespace ffgt {

// Knobs of the controllable SBM-PATTERN generator: graphs of n_communities
// SBM communities plus one embedded pattern whose nodes carry label 1.
struct SbmPatternParams {
  double p = 0.16;    // intra-community link probability
  double q = 0.01;    // inter-community link probability
  double p_p = 0.16;  // intra-pattern link probability
  double q_p = 0.05;  // community-pattern link probability
  int n_communities = 5;
  int community_size_lo = 5;
  int community_size_hi = 35;  // exclusive: sizes are uniform in [lo, hi)
  int pattern_size = 20;
  int n_patterns = 100;
  int feature_vocab = 3;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

struct LabeledSample {
  Graph graph;  // node_labels: 1 on pattern nodes, 0 elsewhere
};

struct DatasetStats {
  int n_graphs = 0;
  double avg_nodes = 0.0;
  double avg_degree = 0.0;    // per-graph 2|E|/n, averaged
  double avg_diameter = 0.0;  // largest-component diameter, averaged
};

// A pattern: fixed internal structure and fixed node features, both drawn
// once per bank entry. Structure uses intra-probability p_p.
struct PatternBank {
  std::vector<Graph> patterns;
};

// Bank stream ids keep bank randomness disjoint from the split streams.
PatternBank make_pattern_bank(const SbmPatternParams& params);

// One unconditioned draw of the block model + embedded pattern. Exposed
// separately because per-pair edge frequencies are exactly Bernoulli(p/q/q_p)
// only before the connectivity conditioning below.
LabeledSample generate_sample_attempt(const SbmPatternParams& params,
                                      const PatternBank& bank, Rng& rng);

// Resamples until the graph is connected, then applies a random node
// relabeling. Throws ConfigError on an empty bank.
LabeledSample generate_sample(const SbmPatternParams& params,
                              const PatternBank& bank, Rng& rng);

struct SbmDataset {
  std::vector<LabeledSample> train, val, test;
  DatasetStats stats;  // over the union of the three splits
};

// Split streams are derived as stream(seed, split_id, sample_index), so the
// result is reproducible under any generation order (jobs = 0 uses all cores).
SbmDataset generate_dataset(const SbmPatternParams& params, int n_train, int n_val,
                            int n_test, int jobs = 0);

DatasetStats dataset_stats(const std::vector<const LabeledSample*>& samples);
DatasetStats dataset_stats(const std::vector<LabeledSample>& samples);

}  // namespace ffgt
