#include "ffgt/lap_pe.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "ffgt/hops.hpp"

namespace ffgt {

LapPeFeatures lap_pe(const Graph& g, int k) {
  if (k >= g.num_nodes)
    throw std::invalid_argument("lap_pe: k must be < num_nodes");
  if (k < 0) throw std::invalid_argument("lap_pe: k must be >= 0");

  LapPeFeatures pe;
  pe.n = g.num_nodes;
  pe.k = k;
  pe.vectors.assign(static_cast<std::size_t>(pe.n) * k, 0.0);
  pe.eigenvalues.assign(static_cast<std::size_t>(pe.n) * k, 0.0);
  if (k == 0) return pe;

  const auto comp = connected_components(g);
  const int ncomp = g.num_nodes == 0 ? 0 : 1 + *std::max_element(comp.begin(), comp.end());

  for (int c = 0; c < ncomp; ++c) {
    std::vector<int> nodes;
    for (int i = 0; i < g.num_nodes; ++i)
      if (comp[i] == c) nodes.push_back(i);
    const int m = static_cast<int>(nodes.size());
    if (m < 2) continue;  // singleton: only the constant vector, all-zero PE

    Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(m, m);
    std::vector<int> local(g.num_nodes, -1);
    for (int a = 0; a < m; ++a) local[nodes[a]] = a;
    for (int a = 0; a < m; ++a) {
      const int u = nodes[a];
      const double du = g.degree(u);
      for (const int v : g.adjacency[u]) {
        const double dv = g.degree(v);
        lap(a, local[v]) -= 1.0 / std::sqrt(du * dv);
      }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
    const auto& vals = solver.eigenvalues();   // ascending
    const auto& vecs = solver.eigenvectors();  // unit columns

    int col = 0;
    for (int e = 0; e < m && col < k; ++e) {
      if (vals(e) < 1e-8) continue;  // zero eigenvalue / constant vector
      Eigen::VectorXd v = vecs.col(e);
      for (int a = 0; a < m; ++a) {
        if (std::abs(v(a)) > 1e-12) {
          if (v(a) < 0) v = -v;
          break;
        }
      }
      for (int a = 0; a < m; ++a) {
        pe.vectors[static_cast<std::size_t>(nodes[a]) * k + col] = v(a);
        pe.eigenvalues[static_cast<std::size_t>(nodes[a]) * k + col] = vals(e);
      }
      ++col;
    }
  }

  // Columns spanning several components carry one unit vector per component;
  // rescale so every column of the assembled matrix has unit norm.
  for (int j = 0; j < k; ++j) {
    double sq = 0.0;
    for (int i = 0; i < pe.n; ++i) sq += pe.at(i, j) * pe.at(i, j);
    if (sq > 0.0 && std::abs(sq - 1.0) > 1e-15) {
      const double inv = 1.0 / std::sqrt(sq);
      for (int i = 0; i < pe.n; ++i)
        pe.vectors[static_cast<std::size_t>(i) * k + j] *= inv;
    }
  }
  return pe;
}

}  // namespace ffgt
