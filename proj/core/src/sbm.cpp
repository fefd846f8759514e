#include "ffgt/sbm.hpp"

#include <algorithm>
#include <numeric>

#include "ffgt/errors.hpp"
#include "ffgt/hops.hpp"
#include "ffgt/parallel.hpp"

namespace ffgt {

namespace {
// Stream ids for splittable seeding; splits use 0..2.
constexpr std::uint64_t kTrainStream = 0;
constexpr std::uint64_t kValStream = 1;
constexpr std::uint64_t kTestStream = 2;
constexpr std::uint64_t kBankStream = 3;

// Degenerate parameter settings (all-zero probabilities) can never produce a
// connected graph; cap the resampling loop and return the last draw.
constexpr int kMaxConnectivityAttempts = 1000;
}  // namespace

void SbmPatternParams::validate() const {
  auto prob_ok = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!prob_ok(p) || !prob_ok(q) || !prob_ok(p_p) || !prob_ok(q_p))
    throw ConfigError("sbm: probabilities must lie in [0, 1]");
  if (n_communities < 1) throw ConfigError("sbm: n_communities must be >= 1");
  if (community_size_lo < 1) throw ConfigError("sbm: community_size_lo must be >= 1");
  if (community_size_hi <= community_size_lo)
    throw ConfigError("sbm: community_size_hi must exceed community_size_lo");
  if (pattern_size < 1) throw ConfigError("sbm: pattern_size must be >= 1");
  if (n_patterns < 1) throw ConfigError("sbm: n_patterns must be >= 1");
  if (feature_vocab < 1) throw ConfigError("sbm: feature_vocab must be >= 1");
}

PatternBank make_pattern_bank(const SbmPatternParams& params) {
  params.validate();
  PatternBank bank;
  bank.patterns.reserve(params.n_patterns);
  for (int b = 0; b < params.n_patterns; ++b) {
    Rng rng = Rng::stream(params.seed, kBankStream, static_cast<std::uint64_t>(b));
    const int m = params.pattern_size;
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        if (rng.bernoulli(params.p_p)) edges.emplace_back(i, j);
    std::vector<int> feats(m);
    for (auto& f : feats)
      f = static_cast<int>(rng.uniform_int(0, params.feature_vocab - 1));
    bank.patterns.push_back(make_graph(m, edges, std::move(feats)));
  }
  return bank;
}

LabeledSample generate_sample_attempt(const SbmPatternParams& params,
                                      const PatternBank& bank, Rng& rng) {
  if (bank.patterns.empty()) throw ConfigError("sbm: empty pattern bank");
  const Graph& pattern =
      bank.patterns[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(bank.patterns.size()) - 1))];

  std::vector<int> sizes(params.n_communities);
  for (auto& s : sizes)
    s = static_cast<int>(rng.uniform_int(params.community_size_lo, params.community_size_hi - 1));
  const int n_comm = std::accumulate(sizes.begin(), sizes.end(), 0);
  const int n = n_comm + params.pattern_size;

  std::vector<int> community(n_comm);
  {
    int node = 0;
    for (int c = 0; c < params.n_communities; ++c)
      for (int s = 0; s < sizes[c]; ++s) community[node++] = c;
  }

  std::vector<std::pair<int, int>> edges;
  // Community section: one Bernoulli draw per unordered pair.
  for (int i = 0; i < n_comm; ++i)
    for (int j = i + 1; j < n_comm; ++j) {
      const double prob = community[i] == community[j] ? params.p : params.q;
      if (rng.bernoulli(prob)) edges.emplace_back(i, j);
    }
  // Pattern internal edges are copied from the bank entry.
  for (const auto& [u, v] : pattern.edges) edges.emplace_back(n_comm + u, n_comm + v);
  // Pattern-community links.
  for (int pi = 0; pi < params.pattern_size; ++pi)
    for (int cj = 0; cj < n_comm; ++cj)
      if (rng.bernoulli(params.q_p)) edges.emplace_back(n_comm + pi, cj);

  std::vector<int> feats(n), labels(n, 0);
  for (int i = 0; i < n_comm; ++i)
    feats[i] = static_cast<int>(rng.uniform_int(0, params.feature_vocab - 1));
  for (int pi = 0; pi < params.pattern_size; ++pi) {
    feats[n_comm + pi] = pattern.node_feature_ids[pi];
    labels[n_comm + pi] = 1;
  }
  return LabeledSample{make_graph(n, edges, std::move(feats), std::move(labels))};
}

LabeledSample generate_sample(const SbmPatternParams& params, const PatternBank& bank,
                              Rng& rng) {
  LabeledSample sample = generate_sample_attempt(params, bank, rng);
  for (int attempt = 1;
       attempt < kMaxConnectivityAttempts && !is_connected(sample.graph); ++attempt)
    sample = generate_sample_attempt(params, bank, rng);
  const auto perm = rng.permutation(sample.graph.num_nodes);
  sample.graph = permute_graph(sample.graph, perm);
  return sample;
}

SbmDataset generate_dataset(const SbmPatternParams& params, int n_train, int n_val,
                            int n_test, int jobs) {
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw ConfigError("sbm: split sizes must be >= 1");
  const PatternBank bank = make_pattern_bank(params);

  SbmDataset ds;
  auto fill = [&](std::vector<LabeledSample>& out, std::uint64_t stream, int count) {
    out.resize(count);
    parallel_for(count, jobs, [&](int i) {
      Rng rng = Rng::stream(params.seed, stream, static_cast<std::uint64_t>(i));
      out[i] = generate_sample(params, bank, rng);
    });
  };
  fill(ds.train, kTrainStream, n_train);
  fill(ds.val, kValStream, n_val);
  fill(ds.test, kTestStream, n_test);

  std::vector<const LabeledSample*> all;
  all.reserve(static_cast<std::size_t>(n_train) + n_val + n_test);
  for (const auto* split : {&ds.train, &ds.val, &ds.test})
    for (const auto& s : *split) all.push_back(&s);
  ds.stats = dataset_stats(all);
  return ds;
}

DatasetStats dataset_stats(const std::vector<const LabeledSample*>& samples) {
  if (samples.empty()) throw std::invalid_argument("dataset_stats: empty dataset");
  DatasetStats st;
  st.n_graphs = static_cast<int>(samples.size());
  std::vector<double> diams(samples.size());
  parallel_for(st.n_graphs, 0, [&](int i) {
    diams[i] = largest_component_diameter(samples[i]->graph);
  });
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Graph& g = samples[i]->graph;
    st.avg_nodes += g.num_nodes;
    st.avg_degree += 2.0 * g.num_edges() / g.num_nodes;
    st.avg_diameter += diams[i];
  }
  st.avg_nodes /= st.n_graphs;
  st.avg_degree /= st.n_graphs;
  st.avg_diameter /= st.n_graphs;
  return st;
}

DatasetStats dataset_stats(const std::vector<LabeledSample>& samples) {
  std::vector<const LabeledSample*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) ptrs.push_back(&s);
  return dataset_stats(ptrs);
}

}  // namespace ffgt
