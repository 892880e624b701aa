#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "rocmlab/tensor.hpp"

namespace rocmlab {

/// Row-major point cloud: n points in R^d.
struct Samples {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> values;

  Samples() = default;
  Samples(std::size_t rows, std::size_t cols) : n(rows), d(cols), values(rows * cols, 0.0) {}

  std::span<double> row(std::size_t i) { return {values.data() + i * d, d}; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * d, d}; }

  Tensor to_tensor() const { return Tensor::from({n, d}, std::span<const double>(values)); }

  static Samples from_tensor(const Tensor& t) {
    if (t.dim() != 2) throw ShapeError("expected a 2-D tensor, got " + shape_str(t.shape()));
    Samples s(t.shape()[0], t.shape()[1]);
    for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = static_cast<double>(t[i]);
    return s;
  }
};

std::vector<double> sample_mean(const Samples& s);
/// Unbiased sample covariance, d x d row-major.
std::vector<double> sample_covariance(const Samples& s);

}  // namespace rocmlab
