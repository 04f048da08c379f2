#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "hccf/rng.hpp"

namespace hccf {

// Row-major dense float64 matrix. Every reduction over its entries runs in
// row-major index order; that fixed order is what makes repeated runs
// bit-identical.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows * cols, row-major

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}
  DenseMatrix(std::initializer_list<std::initializer_list<double>> init);

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;

  void fill(double v);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix random_uniform(std::size_t r, std::size_t c, double lo, double hi, Rng& rng);
};

bool operator==(const DenseMatrix& a, const DenseMatrix& b);

// max |a-b| over entries; shapes must match.
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace hccf
