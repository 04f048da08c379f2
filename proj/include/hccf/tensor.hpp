#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "hccf/dense.hpp"
#include "hccf/sparse.hpp"

namespace hccf {

// One node of the reverse-mode tape. Nodes own their value, an optional
// gradient buffer, and a closure that pushes the node's gradient into its
// parents. The graph is built dynamically by the op functions below and is
// acyclic by construction (ops only ever reference existing nodes).
struct TapeNode {
  DenseMatrix value;
  DenseMatrix grad;  // allocated on first accumulation
  bool requires_grad = false;
  bool has_grad = false;
  std::vector<std::shared_ptr<TapeNode>> parents;
  std::function<void(TapeNode&)> backprop;  // empty for leaves

  void accumulate(const DenseMatrix& g);
  void ensure_grad();
};

// Value-semantics handle over a shared tape node. Copies alias the node, so
// a parameter Tensor can be held by the trainer and referenced by many
// forward graphs while keeping a single gradient buffer.
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(DenseMatrix v, bool requires_grad);
  static Tensor constant(DenseMatrix v) { return leaf(std::move(v), false); }
  static Tensor param(DenseMatrix v) { return leaf(std::move(v), true); }

  bool defined() const { return node_ != nullptr; }
  const DenseMatrix& value() const;
  DenseMatrix& mutable_value();  // in-place update (optimizer); old graphs must be dropped
  const DenseMatrix& grad() const;
  bool has_grad() const { return node_ && node_->has_grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void zero_grad();

  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  double scalar() const;  // value of a 1x1 tensor

  std::shared_ptr<TapeNode> node_;  // ops and backward() work on this directly
};

// --- differentiable operations -------------------------------------------
//
// Reduction contract: every accumulation below runs in a fixed, documented
// order (row-major over outputs, increasing inner index), so results are
// bit-identical across runs. Parallel implementations would be allowed to
// split over rows only, keeping per-row accumulation sequential; the current
// kernels are sequential.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Sparse-dense product with a constant sparse operand. Equals
// matmul(densify(a), b) exactly: per output row, entries are accumulated in
// increasing column order, matching the dense kernel's k-order.
Tensor spmm(const SparseMatrix& a, const Tensor& b);

// Sparse-dense product whose nonzero values are a differentiable (nnz x 1)
// tensor laid over a fixed sparsity pattern (used when the mask product
// itself is learned).
Tensor spmm(const SparseMatrix& pattern, const Tensor& values, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);

// max(v, slope*v); subgradient at v == 0 is 1 (the value branch).
Tensor leaky_relu(const Tensor& a, double slope = 0.5);
// max(v, 0) for hinge terms; subgradient at the kink is 0.
Tensor relu(const Tensor& a);

Tensor sum_all(const Tensor& a);                      // 1x1
Tensor row_sum(const Tensor& a);                      // rows x 1
Tensor sqrt_elem(const Tensor& a);                     // entries must be >= 0
Tensor inv_or_zero(const Tensor& a);                   // 1/v, 0 where v == 0
Tensor scale_rows(const Tensor& a, const Tensor& s);   // s: rows x 1
Tensor row_logsumexp(const Tensor& a);                 // rows x 1, max-shifted

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& indices);

// Rows scaled to unit L2 norm; zero-norm rows map to zero rows (their
// cosine against anything is then 0) with a once-per-process warning.
Tensor normalize_rows(const Tensor& a);

// Reverse-mode sweep from a scalar loss. Accumulates into the grad buffers
// of every reachable node with requires_grad set; leaves' gradients are NOT
// cleared first (call zero_grad between steps).
void backward(const Tensor& loss);

}  // namespace hccf
