#pragma once

#include <cstddef>
#include <vector>

namespace ffgt {

// Dense row-major tensor of 64-bit reals. Rank 0 (scalar), 1, or 2 is all the
// layer needs.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor scalar(double v);

  std::size_t numel() const;
  bool is_scalar() const { return shape.empty(); }

  // 2-D accessors.
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }
  double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }
  double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace ffgt
