#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "ffgt/graph.hpp"

namespace ffgt {

// Hop-count sentinels. UNREACHABLE compares greater than any focal length so
// `hops <= fl` tests just work; the virtual-node distance is negative and is
// handled explicitly wherever it matters (masks, bias buckets).
constexpr std::int32_t kUnreachable = std::numeric_limits<std::int32_t>::max();
constexpr std::int32_t kVirtualHop = -1;

// All-pairs shortest-path hop counts, stored densely (desk scale).
struct HopMatrix {
  int n = 0;
  std::vector<std::int32_t> hops;  // row-major n*n

  std::int32_t at(int i, int j) const { return hops[static_cast<std::size_t>(i) * n + j]; }
  std::int32_t& at(int i, int j) { return hops[static_cast<std::size_t>(i) * n + j]; }

  // Largest finite entry; 0 for edgeless graphs. Ignores sentinels.
  std::int32_t max_finite_hop() const;
};

// Single-source BFS hop counts; unreachable nodes get kUnreachable.
std::vector<std::int32_t> bfs_hops(const Graph& g, int source);

HopMatrix hop_matrix(const Graph& g);

// Nodes within fl hops of center (sorted, always contains center). Virtual
// nodes (kVirtualHop distance) are in scope at every fl.
std::vector<int> ego_net(const HopMatrix& hops, int center, int fl);

// Binary ego-net mask: row i lists the nodes j with hop(i, j) <= fl.
// Kept sparse; the dense 0/1 view is materialized on demand.
struct FocalMask {
  int n = 0;
  int fl = 0;
  std::vector<std::vector<int>> rows;  // sorted in-scope node ids per row

  std::vector<std::uint8_t> dense() const;  // row-major n*n, values 0/1
};

FocalMask focal_mask(const HopMatrix& hops, int fl);

// Appends a virtual node carrying `reserved_feature_id`. The new node gets no
// adjacency edges; its presence in attention is realized through the
// kVirtualHop distance, which bypasses fl in focal masks and maps to a
// dedicated bias bucket. Labels, when present, get a 0 entry for the new node
// (the trainer excludes it from loss and metrics).
std::pair<Graph, HopMatrix> add_virtual_node(const Graph& g, const HopMatrix& hops,
                                             int reserved_feature_id);

// Connected components as per-node component ids (0-based, BFS order).
std::vector<int> connected_components(const Graph& g);

bool is_connected(const Graph& g);

// Diameter of the largest connected component (max finite eccentricity).
int largest_component_diameter(const Graph& g);

}  // namespace ffgt
