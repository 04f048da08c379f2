#pragma once

#include <cstdint>
#include <vector>

#include "hccf/tensor.hpp"

namespace hccf {

// Adam moment buffers, one pair per parameter, in parameter-list order.
// beta1/beta2/eps follow the usual defaults.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<DenseMatrix> m;
  std::vector<DenseMatrix> v;

  static AdamState for_params(const std::vector<Tensor>& params);
};

// One bias-corrected Adam update over all parameters, in place:
//   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
//   theta -= lr * m_hat / sqrt(v_hat + eps)
// Epsilon sits under the square root. Parameters without an accumulated
// gradient are treated as having g = 0. The step counter increments once
// per call.
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr);

}  // namespace hccf
