#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace melex {

/// Dense n-dimensional array of doubles, row-major.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor from_vector(std::vector<double> values);  // rank-1

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  // rank-3 [c][h][w] access used by the conv layers
  double& at3(std::size_t c, std::size_t h, std::size_t w) {
    return data[(c * shape[1] + h) * shape[2] + w];
  }
  double at3(std::size_t c, std::size_t h, std::size_t w) const {
    return data[(c * shape[1] + h) * shape[2] + w];
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  void fill(double v);
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

}  // namespace melex
