#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cardioflow/models/networks.hpp"

namespace cardioflow::models {

struct GradSuiteOptions {
  int tuples = 50;
  double step = 1e-6;
  int weights_per_block = 1;  // weight entries probed per parameter block and tuple
  std::uint64_t seed = 0;
  /// Scales one analytic gradient entry per check by 1 + 1e-3 (negative control).
  bool inject_fault = false;
};

struct GradSuiteEntry {
  std::string target;  // "shape", "motion" or "composed"
  std::string variables;  // "inputs" or "weights"
  double max_relative_error = 0.0;
  std::size_t compared = 0;
  std::size_t kinks = 0;
};

struct GradSuiteReport {
  std::vector<GradSuiteEntry> entries;
  double max_relative_error = 0.0;
  double seconds = 0.0;
};

/// Finite-difference check of the shape network, the motion network and their
/// composition at random (code, point, tau) tuples. Inputs cover codes,
/// points and tau; weights are sampled per block.
GradSuiteReport run_grad_suite(const ShapeNet& shape, const MotionNet& motion, const GradSuiteOptions& options);

/// Same on freshly initialized networks. The motion output layer is given
/// small random weights, since the zero start would make its check vacuous.
GradSuiteReport run_grad_suite(const ShapeNetConfig& shape, const MotionNetConfig& motion,
                               const GradSuiteOptions& options);

}  // namespace cardioflow::models
