#pragma once

#include <cstddef>
#include <tuple>
#include <vector>

#include "hccf/dense.hpp"

namespace hccf {

// Compressed-sparse-row float64 matrix. Column indices are strictly
// increasing within each row, offsets are nondecreasing, and
// values.size() == row_offsets.back().
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_offsets;  // rows + 1 entries
  std::vector<std::size_t> col_indices;
  std::vector<double> values;

  SparseMatrix() = default;
  SparseMatrix(std::size_t r, std::size_t c)
      : rows(r), cols(c), row_offsets(r + 1, 0) {}

  std::size_t nnz() const { return values.size(); }

  // Builds from (row, col, value) triplets; duplicates are rejected.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<std::tuple<std::size_t, std::size_t, double>> t);

  static SparseMatrix identity(std::size_t n);

  DenseMatrix to_dense() const;
  SparseMatrix transposed() const;

  // Throws if any structural invariant is violated.
  void validate() const;
};

}  // namespace hccf
