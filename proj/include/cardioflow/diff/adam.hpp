#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "cardioflow/diff/dense_net.hpp"

namespace cardioflow::diff {

struct AdamState {
  std::vector<Eigen::VectorXd> first_moment;
  std::vector<Eigen::VectorXd> second_moment;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Zero moments shaped like `params`.
AdamState make_adam_state(std::span<const ParamBlock> params);

/// One bias-corrected Adam update. All gradients are checked before any
/// parameter changes; a non-finite entry throws NonFiniteError naming the
/// offending block.
void adam_step(std::span<const ParamBlock> params, std::span<const std::span<const double>> grads,
               AdamState& state, double lr);

}  // namespace cardioflow::diff
