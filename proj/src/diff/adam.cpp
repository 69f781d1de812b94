#include "cardioflow/diff/adam.hpp"

#include <cmath>
#include <string>

#include "cardioflow/error.hpp"

namespace cardioflow::diff {

AdamState make_adam_state(std::span<const ParamBlock> params) {
  AdamState state;
  for (const auto& p : params) {
    state.first_moment.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.values.size())));
    state.second_moment.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.values.size())));
  }
  return state;
}

void adam_step(std::span<const ParamBlock> params, std::span<const std::span<const double>> grads,
               AdamState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameter blocks, " +
                     std::to_string(grads.size()) + " gradient blocks, " +
                     std::to_string(state.first_moment.size()) + " moment blocks");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (grads[b].size() != params[b].values.size() ||
        static_cast<std::size_t>(state.first_moment[b].size()) != params[b].values.size()) {
      throw ShapeError("adam_step: size mismatch in block " + std::to_string(b) + " (" + params[b].name + ")");
    }
    for (std::size_t i = 0; i < grads[b].size(); ++i) {
      if (!std::isfinite(grads[b][i])) {
        throw NonFiniteError("adam_step: non-finite gradient in block " + std::to_string(b) + " (" +
                             params[b].name + "), layer " + std::to_string(b / 2) + ", entry " +
                             std::to_string(i));
      }
    }
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    double* p = params[b].values.data();
    const double* g = grads[b].data();
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace cardioflow::diff
