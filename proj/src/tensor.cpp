#include "hccf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>
#include <utility>

#include "hccf/errors.hpp"
#include "hccf/log.hpp"

namespace hccf {

void TapeNode::ensure_grad() {
  if (!has_grad) {
    grad = DenseMatrix(value.rows, value.cols, 0.0);
    has_grad = true;
  }
}

void TapeNode::accumulate(const DenseMatrix& g) {
  ensure_grad();
  for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] += g.data[i];
}

Tensor Tensor::leaf(DenseMatrix v, bool requires_grad) {
  Tensor t;
  t.node_ = std::make_shared<TapeNode>();
  t.node_->value = std::move(v);
  t.node_->requires_grad = requires_grad;
  return t;
}

const DenseMatrix& Tensor::value() const {
  if (!node_) throw ContractError("Tensor: empty handle");
  return node_->value;
}

DenseMatrix& Tensor::mutable_value() {
  if (!node_) throw ContractError("Tensor: empty handle");
  return node_->value;
}

const DenseMatrix& Tensor::grad() const {
  if (!node_ || !node_->has_grad) throw ContractError("Tensor: no gradient accumulated");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && node_->has_grad) node_->grad.fill(0.0);
}

double Tensor::scalar() const {
  const DenseMatrix& v = value();
  if (v.rows != 1 || v.cols != 1) throw ContractError("Tensor::scalar: not 1x1");
  return v.data[0];
}

namespace {

Tensor make_op(DenseMatrix value, std::vector<std::shared_ptr<TapeNode>> parents,
               std::function<void(TapeNode&)> backprop) {
  Tensor t;
  t.node_ = std::make_shared<TapeNode>();
  t.node_->value = std::move(value);
  bool needs = false;
  for (const auto& p : parents) needs = needs || p->requires_grad;
  t.node_->requires_grad = needs;
  if (needs) {
    t.node_->parents = std::move(parents);
    t.node_->backprop = std::move(backprop);
  }
  return t;
}

// out (+)= A*B with optional transposes; inner accumulation runs over k in
// increasing order for every output entry.
void matmul_into(const DenseMatrix& a, bool ta, const DenseMatrix& b, bool tb, DenseMatrix& out,
                 bool accumulate_out) {
  const std::size_t m = ta ? a.cols : a.rows;
  const std::size_t k = ta ? a.rows : a.cols;
  const std::size_t n = tb ? b.rows : b.cols;
  if (!accumulate_out) out = DenseMatrix(m, n, 0.0);
  if (!ta && !tb) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = a.at(i, kk);
        if (av == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) += av * b.at(kk, j);
      }
  } else if (!ta && tb) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t kk = 0; kk < k; ++kk) s += a.at(i, kk) * b.at(j, kk);
        out.at(i, j) += s;
      }
  } else if (ta && !tb) {
    for (std::size_t kk = 0; kk < k; ++kk)
      for (std::size_t i = 0; i < m; ++i) {
        const double av = a.at(kk, i);
        if (av == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) += av * b.at(kk, j);
      }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t kk = 0; kk < k; ++kk) s += a.at(kk, i) * b.at(j, kk);
        out.at(i, j) += s;
      }
  }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw DimensionError(std::string(op) + ": shape mismatch");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
  DenseMatrix out;
  matmul_into(a.value(), false, b.value(), false, out, false);
  auto an = a.node_, bn = b.node_;
  return make_op(std::move(out), {an, bn}, [an, bn](TapeNode& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      matmul_into(self.grad, false, bn->value, true, an->grad, true);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      matmul_into(an->value, true, self.grad, false, bn->grad, true);
    }
  });
}

Tensor transpose(const Tensor& a) {
  const DenseMatrix& v = a.value();
  DenseMatrix out(v.cols, v.rows);
  for (std::size_t i = 0; i < v.rows; ++i)
    for (std::size_t j = 0; j < v.cols; ++j) out.at(j, i) = v.at(i, j);
  auto an = a.node_;
  return make_op(std::move(out), {an}, [an](TapeNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < an->grad.rows; ++i)
      for (std::size_t j = 0; j < an->grad.cols; ++j)
        an->grad.at(i, j) += self.grad.at(j, i);
  });
}

namespace {

DenseMatrix spmm_value(const SparseMatrix& a, const double* vals, const DenseMatrix& b) {
  DenseMatrix out(a.rows, b.cols, 0.0);
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t k = a.row_offsets[r]; k < a.row_offsets[r + 1]; ++k) {
      const double v = vals[k];
      const std::size_t c = a.col_indices[k];
      for (std::size_t j = 0; j < b.cols; ++j) out.at(r, j) += v * b.at(c, j);
    }
  }
  return out;
}

}  // namespace

Tensor spmm(const SparseMatrix& a, const Tensor& b) {
  if (a.cols != b.rows()) throw DimensionError("spmm: inner dimensions differ");
  DenseMatrix out = spmm_value(a, a.values.data(), b.value());
  auto bn = b.node_;
  auto sp = std::make_shared<SparseMatrix>(a);
  return make_op(std::move(out), {bn}, [bn, sp](TapeNode& self) {
    bn->ensure_grad();
    // dB[c,:] += v * G[r,:], iterated in (row, entry) order.
    for (std::size_t r = 0; r < sp->rows; ++r) {
      for (std::size_t k = sp->row_offsets[r]; k < sp->row_offsets[r + 1]; ++k) {
        const double v = sp->values[k];
        const std::size_t c = sp->col_indices[k];
        for (std::size_t j = 0; j < self.grad.cols; ++j)
          bn->grad.at(c, j) += v * self.grad.at(r, j);
      }
    }
  });
}

Tensor spmm(const SparseMatrix& pattern, const Tensor& values, const Tensor& b) {
  if (pattern.cols != b.rows()) throw DimensionError("spmm: inner dimensions differ");
  if (values.value().size() != pattern.nnz() || values.cols() != 1)
    throw DimensionError("spmm: values must be nnz x 1");
  DenseMatrix out = spmm_value(pattern, values.value().data.data(), b.value());
  auto vn = values.node_, bn = b.node_;
  auto sp = std::make_shared<SparseMatrix>(pattern);
  return make_op(std::move(out), {vn, bn}, [vn, bn, sp](TapeNode& self) {
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t r = 0; r < sp->rows; ++r) {
        for (std::size_t k = sp->row_offsets[r]; k < sp->row_offsets[r + 1]; ++k) {
          const double v = vn->value.data[k];
          const std::size_t c = sp->col_indices[k];
          for (std::size_t j = 0; j < self.grad.cols; ++j)
            bn->grad.at(c, j) += v * self.grad.at(r, j);
        }
      }
    }
    if (vn->requires_grad) {
      vn->ensure_grad();
      // dv[k] = <G[r,:], B[c,:]>
      for (std::size_t r = 0; r < sp->rows; ++r) {
        for (std::size_t k = sp->row_offsets[r]; k < sp->row_offsets[r + 1]; ++k) {
          const std::size_t c = sp->col_indices[k];
          double s = 0.0;
          for (std::size_t j = 0; j < self.grad.cols; ++j)
            s += self.grad.at(r, j) * bn->value.at(c, j);
          vn->grad.data[k] += s;
        }
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  DenseMatrix out = a.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.value().data[i];
  auto an = a.node_, bn = b.node_;
  return make_op(std::move(out), {an, bn}, [an, bn](TapeNode& self) {
    if (an->requires_grad) an->accumulate(self.grad);
    if (bn->requires_grad) bn->accumulate(self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  DenseMatrix out = a.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.value().data[i];
  auto an = a.node_, bn = b.node_;
  return make_op(std::move(out), {an, bn}, [an, bn](TapeNode& self) {
    if (an->requires_grad) an->accumulate(self.grad);
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < bn->grad.data.size(); ++i)
        bn->grad.data[i] -= self.grad.data[i];
    }
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "hadamard");
  DenseMatrix out = a.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.value().data[i];
  auto an = a.node_, bn = b.node_;
  return make_op(std::move(out), {an, bn}, [an, bn](TapeNode& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < an->grad.data.size(); ++i)
        an->grad.data[i] += self.grad.data[i] * bn->value.data[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < bn->grad.data.size(); ++i)
        bn->grad.data[i] += self.grad.data[i] * an->value.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  DenseMatrix out = a.value();
  for (double& v : out.data) v *= c;
  auto an = a.node_;
  return make_op(std::move(out), {an}, [an, c](TapeNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < an->grad.data.size(); ++i)
      an->grad.data[i] += c * self.grad.data[i];
  });
}

Tensor add_const(const Tensor& a, double c) {
  DenseMatrix out = a.value();
  for (double& v : out.data) v += c;
  auto an = a.node_;
  return make_op(std::move(out), {an},
                 [an](TapeNode& self) { an->accumulate(self.grad); });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  DenseMatrix out = a.value();
  for (double& v : out.data) v = v >= 0.0 ? v : slope * v;
  auto an = a.node_;
  return make_op(std::move(out), {an}, [an, slope](TapeNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < an->grad.data.size(); ++i) {
      const double factor = an->value.data[i] >= 0.0 ? 1.0 : slope;
      an->grad.data[i] += factor * self.grad.data[i];
    }
  });
}

Tensor relu(const Tensor& a) {
  DenseMatrix out = a.value();
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  auto an = a.node_;
  return make_op(std::move(out), {an}, [an](TapeNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < an->grad.data.size(); ++i) {
      if (an->value.data[i] > 0.0) an->grad.data[i] += self.grad.data[i];
    }
  });
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value().data) s += v;
  DenseMatrix out(1, 1, s);
  auto an = a.node_;
  return make_op(std::move(out), {an}, [an](TapeNode& self) {
    an->ensure_grad();
    const double g = self.grad.data[0];
    for (double& v : an->grad.data) v += g;
  });
}

Tensor row_sum(const Tensor& a) {
  const DenseMatrix& v = a.value();
  DenseMatrix out(v.rows, 1, 0.0);
  for (std::size_t i = 0; i < v.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < v.cols; ++j) s += v.at(i, j);
    out.at(i, 0) = s;
  }
  auto an = a.node_;
  return make_op(std::move(out), {an}, [an](TapeNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < an->grad.rows; ++i) {
      const double g = self.grad.at(i, 0);
      for (std::size_t j = 0; j < an->grad.cols; ++j) an->grad.at(i, j) += g;
    }
  });
}

Tensor sqrt_elem(const Tensor& a) {
  DenseMatrix out = a.value();
  for (double& v : out.data) {
    if (v < 0.0) throw ContractError("sqrt_elem: negative entry");
    v = std::sqrt(v);
  }
  auto an = a.node_;
  return make_op(std::move(out), {an}, [an](TapeNode& self) {
    an->ensure_grad();
    // Subgradient 0 at v == 0 keeps zero-norm guards from producing NaN.
    for (std::size_t i = 0; i < an->grad.data.size(); ++i) {
      const double sv = self.value.data[i];
      if (sv > 0.0) an->grad.data[i] += 0.5 / sv * self.grad.data[i];
    }
  });
}

Tensor inv_or_zero(const Tensor& a) {
  DenseMatrix out = a.value();
  for (double& v : out.data) v = v == 0.0 ? 0.0 : 1.0 / v;
  auto an = a.node_;
  return make_op(std::move(out), {an}, [an](TapeNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < an->grad.data.size(); ++i) {
      const double v = an->value.data[i];
      if (v != 0.0) an->grad.data[i] += -self.grad.data[i] / (v * v);
    }
  });
}

Tensor scale_rows(const Tensor& a, const Tensor& s) {
  const DenseMatrix& av = a.value();
  const DenseMatrix& sv = s.value();
  if (sv.rows != av.rows || sv.cols != 1)
    throw DimensionError("scale_rows: scale must be rows x 1");
  DenseMatrix out = av;
  for (std::size_t i = 0; i < av.rows; ++i) {
    const double f = sv.at(i, 0);
    for (std::size_t j = 0; j < av.cols; ++j) out.at(i, j) *= f;
  }
  auto an = a.node_, sn = s.node_;
  return make_op(std::move(out), {an, sn}, [an, sn](TapeNode& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < an->grad.rows; ++i) {
        const double f = sn->value.at(i, 0);
        for (std::size_t j = 0; j < an->grad.cols; ++j)
          an->grad.at(i, j) += f * self.grad.at(i, j);
      }
    }
    if (sn->requires_grad) {
      sn->ensure_grad();
      for (std::size_t i = 0; i < an->value.rows; ++i) {
        double g = 0.0;
        for (std::size_t j = 0; j < an->value.cols; ++j)
          g += self.grad.at(i, j) * an->value.at(i, j);
        sn->grad.at(i, 0) += g;
      }
    }
  });
}

Tensor row_logsumexp(const Tensor& a) {
  const DenseMatrix& v = a.value();
  if (v.cols == 0) throw ContractError("row_logsumexp: empty rows");
  DenseMatrix out(v.rows, 1, 0.0);
  for (std::size_t i = 0; i < v.rows; ++i) {
    double m = v.at(i, 0);
    for (std::size_t j = 1; j < v.cols; ++j) m = std::max(m, v.at(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < v.cols; ++j) s += std::exp(v.at(i, j) - m);
    out.at(i, 0) = m + std::log(s);
  }
  auto an = a.node_;
  return make_op(std::move(out), {an}, [an](TapeNode& self) {
    an->ensure_grad();
    // d lse / d x_j = softmax(x)_j = exp(x_j - lse)
    for (std::size_t i = 0; i < an->grad.rows; ++i) {
      const double g = self.grad.at(i, 0);
      const double lse = self.value.at(i, 0);
      for (std::size_t j = 0; j < an->grad.cols; ++j)
        an->grad.at(i, j) += g * std::exp(an->value.at(i, j) - lse);
    }
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& indices) {
  const DenseMatrix& v = a.value();
  for (std::size_t idx : indices) {
    if (idx >= v.rows) throw ContractError("gather_rows: index out of range");
  }
  DenseMatrix out(indices.size(), v.cols);
  for (std::size_t k = 0; k < indices.size(); ++k)
    for (std::size_t j = 0; j < v.cols; ++j) out.at(k, j) = v.at(indices[k], j);
  auto an = a.node_;
  auto idx = std::make_shared<std::vector<std::size_t>>(indices);
  return make_op(std::move(out), {an}, [an, idx](TapeNode& self) {
    an->ensure_grad();
    for (std::size_t k = 0; k < idx->size(); ++k) {
      const std::size_t r = (*idx)[k];
      for (std::size_t j = 0; j < an->grad.cols; ++j)
        an->grad.at(r, j) += self.grad.at(k, j);
    }
  });
}

Tensor normalize_rows(const Tensor& a) {
  Tensor norms_sq = row_sum(hadamard(a, a));
  bool any_zero = false;
  for (double v : norms_sq.value().data) any_zero = any_zero || v == 0.0;
  if (any_zero)
    warn_once("normalize_rows_zero",
              "normalize_rows: zero-norm row(s); treating their cosine as 0");
  Tensor inv = inv_or_zero(sqrt_elem(norms_sq));
  return scale_rows(a, inv);
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward: empty tensor");
  const DenseMatrix& lv = loss.value();
  if (lv.rows != 1 || lv.cols != 1) throw ContractError("backward: loss must be scalar (1x1)");

  // Iterative post-order DFS; the reversed order is a valid topological
  // order for the backward sweep.
  std::vector<TapeNode*> topo;
  std::unordered_set<TapeNode*> visited;
  struct Frame {
    TapeNode* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  if (loss.node_->requires_grad) stack.push_back({loss.node_.get(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent == 0 && visited.count(f.node)) {
      stack.pop_back();
      continue;
    }
    if (f.next_parent == 0) visited.insert(f.node);
    if (f.next_parent < f.node->parents.size()) {
      TapeNode* p = f.node->parents[f.next_parent].get();
      f.next_parent++;
      if (!visited.count(p) && p->requires_grad) stack.push_back({p, 0});
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  loss.node_->ensure_grad();
  loss.node_->grad.data[0] += 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TapeNode* n = *it;
    if (n->backprop && n->has_grad) n->backprop(*n);
  }
}

}  // namespace hccf
