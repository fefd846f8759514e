#pragma once

#include <vector>

#include "ffgt/graph.hpp"

namespace ffgt {

// Laplacian positional encoding: coordinates of the eigenvectors of
// L_sym = I - D^{-1/2} A D^{-1/2} with the k smallest nonzero eigenvalues,
// computed per connected component and zero-padded where a component has
// fewer than k nonzero eigenvalues.
struct LapPeFeatures {
  int n = 0;
  int k = 0;
  std::vector<double> vectors;     // row-major n*k
  std::vector<double> eigenvalues; // ascending per component slot, 0 where padded

  double at(int i, int j) const { return vectors[static_cast<std::size_t>(i) * k + j]; }
};

// Sign is canonical: the first nonzero coordinate of each column is positive.
// Columns are unit-norm and mutually orthogonal. Degree-0 nodes contribute a
// zero normalized-adjacency row and receive all-zero encodings.
// Throws std::invalid_argument when k >= num_nodes.
LapPeFeatures lap_pe(const Graph& g, int k);

}  // namespace ffgt
