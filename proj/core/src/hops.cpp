#include "ffgt/hops.hpp"

#include <algorithm>
#include <stdexcept>

namespace ffgt {

std::int32_t HopMatrix::max_finite_hop() const {
  std::int32_t m = 0;
  for (const auto h : hops)
    if (h != kUnreachable && h > m) m = h;
  return m;
}

std::vector<std::int32_t> bfs_hops(const Graph& g, int source) {
  if (source < 0 || source >= g.num_nodes)
    throw std::invalid_argument("bfs_hops: source out of range");
  std::vector<std::int32_t> dist(g.num_nodes, kUnreachable);
  std::vector<int> frontier{source};
  dist[source] = 0;
  std::int32_t level = 0;
  std::vector<int> next;
  while (!frontier.empty()) {
    ++level;
    next.clear();
    for (const int u : frontier) {
      for (const int v : g.adjacency[u]) {
        if (dist[v] == kUnreachable) {
          dist[v] = level;
          next.push_back(v);
        }
      }
    }
    frontier.swap(next);
  }
  return dist;
}

HopMatrix hop_matrix(const Graph& g) {
  HopMatrix m;
  m.n = g.num_nodes;
  m.hops.resize(static_cast<std::size_t>(m.n) * m.n);
  for (int i = 0; i < m.n; ++i) {
    const auto row = bfs_hops(g, i);
    std::copy(row.begin(), row.end(), m.hops.begin() + static_cast<std::size_t>(i) * m.n);
  }
  return m;
}

std::vector<int> ego_net(const HopMatrix& hops, int center, int fl) {
  if (center < 0 || center >= hops.n)
    throw std::invalid_argument("ego_net: center out of range");
  std::vector<int> out;
  for (int j = 0; j < hops.n; ++j) {
    const auto h = hops.at(center, j);
    if (h == kVirtualHop || h <= fl) out.push_back(j);
  }
  return out;
}

std::vector<std::uint8_t> FocalMask::dense() const {
  std::vector<std::uint8_t> d(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i)
    for (const int j : rows[i]) d[static_cast<std::size_t>(i) * n + j] = 1;
  return d;
}

FocalMask focal_mask(const HopMatrix& hops, int fl) {
  if (fl < 0) throw std::invalid_argument("focal_mask: fl must be >= 0");
  FocalMask m;
  m.n = hops.n;
  m.fl = fl;
  m.rows.resize(hops.n);
  for (int i = 0; i < hops.n; ++i) m.rows[i] = ego_net(hops, i, fl);
  return m;
}

std::pair<Graph, HopMatrix> add_virtual_node(const Graph& g, const HopMatrix& hops,
                                             int reserved_feature_id) {
  Graph ag = g;
  ag.num_nodes = g.num_nodes + 1;
  ag.adjacency.emplace_back();
  ag.node_feature_ids.push_back(reserved_feature_id);
  if (!ag.node_labels.empty()) ag.node_labels.push_back(0);

  HopMatrix ah;
  ah.n = hops.n + 1;
  ah.hops.assign(static_cast<std::size_t>(ah.n) * ah.n, kVirtualHop);
  for (int i = 0; i < hops.n; ++i)
    for (int j = 0; j < hops.n; ++j) ah.at(i, j) = hops.at(i, j);
  ah.at(ah.n - 1, ah.n - 1) = 0;
  return {std::move(ag), std::move(ah)};
}

std::vector<int> connected_components(const Graph& g) {
  std::vector<int> comp(g.num_nodes, -1);
  int next_id = 0;
  std::vector<int> stack;
  for (int s = 0; s < g.num_nodes; ++s) {
    if (comp[s] != -1) continue;
    comp[s] = next_id;
    stack.assign(1, s);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const int v : g.adjacency[u]) {
        if (comp[v] == -1) {
          comp[v] = next_id;
          stack.push_back(v);
        }
      }
    }
    ++next_id;
  }
  return comp;
}

bool is_connected(const Graph& g) {
  if (g.num_nodes <= 1) return true;
  const auto comp = connected_components(g);
  return std::all_of(comp.begin(), comp.end(), [](int c) { return c == 0; });
}

int largest_component_diameter(const Graph& g) {
  if (g.num_nodes == 0) return 0;
  const auto comp = connected_components(g);
  const int ncomp = 1 + *std::max_element(comp.begin(), comp.end());
  std::vector<int> size(ncomp, 0);
  for (const int c : comp) ++size[c];
  const int big = static_cast<int>(std::max_element(size.begin(), size.end()) - size.begin());
  int diam = 0;
  for (int s = 0; s < g.num_nodes; ++s) {
    if (comp[s] != big) continue;
    const auto dist = bfs_hops(g, s);
    for (int j = 0; j < g.num_nodes; ++j)
      if (comp[j] == big && dist[j] != kUnreachable) diam = std::max(diam, static_cast<int>(dist[j]));
  }
  return diam;
}

}  // namespace ffgt
