#include "hccf/sparse.hpp"

#include <algorithm>

#include "hccf/errors.hpp"

namespace hccf {

SparseMatrix SparseMatrix::from_triplets(
    std::size_t rows, std::size_t cols,
    std::vector<std::tuple<std::size_t, std::size_t, double>> t) {
  for (const auto& [r, c, v] : t) {
    (void)v;
    if (r >= rows || c >= cols) throw ContractError("from_triplets: index out of range");
  }
  std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) {
    return std::get<0>(a) != std::get<0>(b) ? std::get<0>(a) < std::get<0>(b)
                                            : std::get<1>(a) < std::get<1>(b);
  });
  SparseMatrix m(rows, cols);
  m.col_indices.reserve(t.size());
  m.values.reserve(t.size());
  std::size_t prev_r = 0, prev_c = 0;
  bool first = true;
  for (const auto& [r, c, v] : t) {
    if (!first && r == prev_r && c == prev_c)
      throw ContractError("from_triplets: duplicate entry");
    for (std::size_t fill = prev_r + (first ? 0 : 1); fill <= r; ++fill)
      m.row_offsets[fill] = m.values.size();
    m.col_indices.push_back(c);
    m.values.push_back(v);
    prev_r = r;
    prev_c = c;
    first = false;
  }
  for (std::size_t fill = first ? 0 : prev_r + 1; fill <= rows; ++fill)
    m.row_offsets[fill] = m.values.size();
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  SparseMatrix m(n, n);
  m.col_indices.resize(n);
  m.values.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    m.row_offsets[i + 1] = i + 1;
    m.col_indices[i] = i;
  }
  return m;
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d(rows, cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
      d.at(r, col_indices[k]) = values[k];
    }
  }
  return d;
}

SparseMatrix SparseMatrix::transposed() const {
  SparseMatrix t(cols, rows);
  std::vector<std::size_t> counts(cols, 0);
  for (std::size_t c : col_indices) counts[c]++;
  for (std::size_t c = 0; c < cols; ++c) t.row_offsets[c + 1] = t.row_offsets[c] + counts[c];
  t.col_indices.resize(nnz());
  t.values.resize(nnz());
  std::vector<std::size_t> cursor(t.row_offsets.begin(), t.row_offsets.end() - 1);
  // Row-major scan of the source keeps the transposed column indices sorted.
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
      const std::size_t c = col_indices[k];
      t.col_indices[cursor[c]] = r;
      t.values[cursor[c]] = values[k];
      cursor[c]++;
    }
  }
  return t;
}

void SparseMatrix::validate() const {
  if (row_offsets.size() != rows + 1) throw ContractError("sparse: bad offsets length");
  if (row_offsets.front() != 0) throw ContractError("sparse: offsets must start at 0");
  for (std::size_t r = 0; r < rows; ++r) {
    if (row_offsets[r + 1] < row_offsets[r]) throw ContractError("sparse: offsets decrease");
    for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
      if (col_indices[k] >= cols) throw ContractError("sparse: column index out of range");
      if (k > row_offsets[r] && col_indices[k] <= col_indices[k - 1])
        throw ContractError("sparse: column indices not strictly increasing");
    }
  }
  if (row_offsets.back() != values.size() || values.size() != col_indices.size())
    throw ContractError("sparse: nnz mismatch");
}

}  // namespace hccf
