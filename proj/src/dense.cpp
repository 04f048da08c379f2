#include "hccf/dense.hpp"

#include <cmath>
#include <cstdlib>

#include "hccf/errors.hpp"

namespace hccf {

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> init) {
  rows = init.size();
  cols = rows > 0 ? init.begin()->size() : 0;
  data.reserve(rows * cols);
  for (const auto& row : init) {
    if (row.size() != cols) throw DimensionError("DenseMatrix: ragged initializer");
    for (double v : row) data.push_back(v);
  }
}

bool DenseMatrix::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void DenseMatrix::fill(double v) {
  for (double& x : data) x = v;
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::random_uniform(std::size_t r, std::size_t c, double lo, double hi,
                                        Rng& rng) {
  DenseMatrix m(r, c);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) throw DimensionError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = std::abs(a.data[i] - b.data[i]);
    if (d > m) m = d;
  }
  return m;
}

}  // namespace hccf
