#include "ffgt/graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "ffgt/errors.hpp"

namespace ffgt {

using ordered_json = nlohmann::ordered_json;

bool Graph::has_edge(int u, int v) const {
  const auto& nbrs = adjacency[u];
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

int Graph::edge_type(int u, int v) const {
  if (edge_type_ids.empty()) return 0;
  if (u > v) std::swap(u, v);
  const auto it = std::lower_bound(edges.begin(), edges.end(), std::make_pair(u, v));
  if (it == edges.end() || *it != std::make_pair(u, v))
    throw std::invalid_argument("edge_type: no such edge");
  return edge_type_ids[static_cast<std::size_t>(it - edges.begin())];
}

Graph make_graph(int num_nodes, const std::vector<std::pair<int, int>>& edges,
                 std::vector<int> node_feature_ids, std::vector<int> node_labels,
                 std::vector<int> edge_type_ids) {
  if (num_nodes < 0) throw std::invalid_argument("make_graph: negative num_nodes");
  if (node_feature_ids.size() != static_cast<std::size_t>(num_nodes))
    throw std::invalid_argument("make_graph: node_feats length != num_nodes");
  if (!node_labels.empty() && node_labels.size() != static_cast<std::size_t>(num_nodes))
    throw std::invalid_argument("make_graph: node_labels length != num_nodes");
  if (!edge_type_ids.empty() && edge_type_ids.size() != edges.size())
    throw std::invalid_argument("make_graph: edge_types length != #edges");

  Graph g;
  g.num_nodes = num_nodes;
  g.node_feature_ids = std::move(node_feature_ids);
  g.node_labels = std::move(node_labels);
  g.adjacency.assign(num_nodes, {});

  // Normalize to u < v and sort edges (keeping types aligned).
  std::vector<std::size_t> order(edges.size());
  std::vector<std::pair<int, int>> norm(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto [u, v] = edges[e];
    if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes)
      throw std::invalid_argument("make_graph: edge endpoint out of range");
    if (u == v) throw std::invalid_argument("make_graph: self-loop");
    if (u > v) std::swap(u, v);
    norm[e] = {u, v};
    order[e] = e;
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return norm[a] < norm[b]; });
  g.edges.reserve(edges.size());
  if (!edge_type_ids.empty()) g.edge_type_ids.reserve(edges.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& e = norm[order[k]];
    if (k > 0 && e == g.edges.back())
      throw std::invalid_argument("make_graph: duplicate edge");
    g.edges.push_back(e);
    if (!edge_type_ids.empty()) g.edge_type_ids.push_back(edge_type_ids[order[k]]);
    g.adjacency[e.first].push_back(e.second);
    g.adjacency[e.second].push_back(e.first);
  }
  for (auto& nbrs : g.adjacency) std::sort(nbrs.begin(), nbrs.end());
  return g;
}

Graph permute_graph(const Graph& g, const std::vector<int>& perm) {
  if (perm.size() != static_cast<std::size_t>(g.num_nodes))
    throw std::invalid_argument("permute_graph: permutation length mismatch");
  std::vector<std::pair<int, int>> edges;
  edges.reserve(g.edges.size());
  for (const auto& [u, v] : g.edges) edges.emplace_back(perm[u], perm[v]);
  std::vector<int> feats(g.num_nodes), labels;
  for (int i = 0; i < g.num_nodes; ++i) feats[perm[i]] = g.node_feature_ids[i];
  if (!g.node_labels.empty()) {
    labels.resize(g.num_nodes);
    for (int i = 0; i < g.num_nodes; ++i) labels[perm[i]] = g.node_labels[i];
  }
  // Edge types follow their edges; make_graph re-sorts both together.
  return make_graph(g.num_nodes, edges, std::move(feats), std::move(labels),
                    g.edge_type_ids);
}

std::string write_graph_line(const Graph& g) {
  ordered_json j;
  j["num_nodes"] = g.num_nodes;
  auto edges = ordered_json::array();
  for (const auto& [u, v] : g.edges) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  j["node_feats"] = g.node_feature_ids;
  if (!g.node_labels.empty()) j["node_labels"] = g.node_labels;
  if (!g.edge_type_ids.empty()) j["edge_types"] = g.edge_type_ids;
  return j.dump();
}

Graph parse_graph_line(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad graph line: ") + e.what());
  }
  const int n = j.at("num_nodes").get<int>();
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  auto feats = j.at("node_feats").get<std::vector<int>>();
  std::vector<int> labels, types;
  if (j.contains("node_labels")) labels = j["node_labels"].get<std::vector<int>>();
  if (j.contains("edge_types")) types = j["edge_types"].get<std::vector<int>>();
  return make_graph(n, edges, std::move(feats), std::move(labels), std::move(types));
}

void write_graph_file(const std::string& path, const std::vector<Graph>& graphs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& g : graphs) out << write_graph_line(g) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::vector<Graph> read_graph_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<Graph> graphs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    graphs.push_back(parse_graph_line(line));
  }
  return graphs;
}

}  // namespace ffgt
