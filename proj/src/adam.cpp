#include "hccf/adam.hpp"

#include <cmath>

#include "hccf/errors.hpp"

namespace hccf {

AdamState AdamState::for_params(const std::vector<Tensor>& params) {
  AdamState st;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const Tensor& p : params) {
    st.m.emplace_back(p.rows(), p.cols(), 0.0);
    st.v.emplace_back(p.rows(), p.cols(), 0.0);
  }
  return st;
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
  if (lr < 0.0) throw ContractError("adam_step: lr must be >= 0");
  if (params.size() != state.m.size())
    throw DimensionError("adam_step: state does not match parameter list");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    DenseMatrix& theta = params[p].mutable_value();
    DenseMatrix& m = state.m[p];
    DenseMatrix& v = state.v[p];
    if (!theta.same_shape(m)) throw DimensionError("adam_step: moment shape mismatch");
    const bool has_grad = params[p].has_grad();
    if (has_grad && !params[p].grad().same_shape(theta))
      throw DimensionError("adam_step: gradient shape mismatch");
    for (std::size_t i = 0; i < theta.data.size(); ++i) {
      const double g = has_grad ? params[p].grad().data[i] : 0.0;
      m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * g;
      v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m.data[i] / bc1;
      const double v_hat = v.data[i] / bc2;
      theta.data[i] -= lr * m_hat / std::sqrt(v_hat + state.eps);
    }
  }
}

}  // namespace hccf
