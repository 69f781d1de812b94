#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <vector>

namespace cardioflow::diff {

/// Scalar function with a reverse-mode gradient. `batch_value`, when set,
/// evaluates the function at every column of a matrix in one call and lets
/// the checker batch all finite-difference probes.
struct DifferentiableFunction {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> batch_value;
};

struct GradCheckOptions {
  /// Restrict the comparison to these coordinates (all when empty).
  std::vector<Eigen::Index> coordinates;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  Eigen::Index worst_component = -1;
  std::size_t compared = 0;
  /// Coordinates where a derivative kink lies within the probe interval.
  std::vector<Eigen::Index> kinks;
};

/// Compares the reverse-mode gradient against central differences.
///
/// A coordinate is flagged as a kink (and excluded) when the second
/// differences at h, h/2 and h/4 do not follow the h^2 scaling of a smooth
/// function. The relative error of a coordinate is
///   |g - fd| / max(|g|, |fd|, floor),  floor = 1e8 * eps * max(1, |f|) / h,
/// so components too small for central differences to resolve are compared
/// on an absolute scale.
GradCheckReport grad_check(const DifferentiableFunction& f, const Eigen::VectorXd& point, double h,
                           const GradCheckOptions& options = {});

}  // namespace cardioflow::diff
