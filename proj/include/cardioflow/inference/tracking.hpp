#pragma once

#include <Eigen/Core>

#include <vector>

#include "cardioflow/models/networks.hpp"

namespace cardioflow::inference {

struct TrackOptions {
  double tolerance = 1e-6;  // on ||y + v(y) - target||
  int max_iterations = 100;
};

struct TrackResult {
  Eigen::MatrixXd points;     // 3 x n tracked positions
  Eigen::VectorXd residual;   // final ||y + v(y) - target|| per point
  std::vector<bool> converged;
  int iterations = 0;  // largest iteration count over the points

  bool all_converged() const;
};

/// Solves y + motion(code, y, tau) = target per column by damped Newton
/// iteration with a backtracking step, starting from `guess`.
TrackResult invert_deformation(const models::MotionNet& motion, const Eigen::VectorXd& code, double tau,
                               const Eigen::MatrixXd& target, const Eigen::MatrixXd& guess,
                               const TrackOptions& options = {});

/// Maps points of phase i to phase j through the end-diastolic frame:
/// x' = x + v(x; c_i, tau_i), then y with y + v(y; c_j, tau_j) = x'.
TrackResult track_points(const models::MotionNet& motion, const Eigen::VectorXd& code_from, double tau_from,
                         const Eigen::VectorXd& code_to, double tau_to, const Eigen::MatrixXd& points,
                         const TrackOptions& options = {});

}  // namespace cardioflow::inference
