#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace ffgt {

// Undirected labeled graph. Adjacency lists are sorted, symmetric, free of
// self-loops and duplicates; edges are stored once as (u, v) with u < v in
// lexicographic order, aligned with edge_type_ids when those are present.
struct Graph {
  int num_nodes = 0;
  std::vector<std::vector<int>> adjacency;
  std::vector<int> node_feature_ids;
  std::vector<int> node_labels;              // empty, or one label per node
  std::vector<std::pair<int, int>> edges;    // u < v, sorted
  std::vector<int> edge_type_ids;            // empty = single implicit type 0

  int num_edges() const { return static_cast<int>(edges.size()); }
  bool has_edge(int u, int v) const;

  // Type of the (u, v) edge, 0 when edge types are not stored.
  // Precondition: the edge exists.
  int edge_type(int u, int v) const;

  int degree(int v) const { return static_cast<int>(adjacency[v].size()); }
};

// Builds a validated Graph from an edge list. Throws std::invalid_argument on
// out-of-range ids, self-loops, duplicate edges, or length mismatches.
Graph make_graph(int num_nodes, const std::vector<std::pair<int, int>>& edges,
                 std::vector<int> node_feature_ids,
                 std::vector<int> node_labels = {},
                 std::vector<int> edge_type_ids = {});

// Relabels nodes: node i of the input becomes node perm[i] of the output.
Graph permute_graph(const Graph& g, const std::vector<int>& perm);

// --- line-delimited graph format ------------------------------------------
//
// One graph per line, a JSON object with keys (in this order):
//   num_nodes, edges ([[u,v], ...] with u < v), node_feats,
//   node_labels (optional), edge_types (optional).
// The writer is canonical (fixed key order, no whitespace), so
// write(parse(line)) == line for lines this library produced.

std::string write_graph_line(const Graph& g);
Graph parse_graph_line(const std::string& line);

void write_graph_file(const std::string& path, const std::vector<Graph>& graphs);
std::vector<Graph> read_graph_file(const std::string& path);

}  // namespace ffgt
