#pragma once

#include <Eigen/Core>

namespace cardioflow::edspace {

/// Principal components of column samples. `basis` holds the leading
/// left singular vectors of the centered data, `spectrum` every singular
/// value (not divided by sqrt(samples)), `coefficients` the projection of
/// each training sample onto the kept basis (one column per sample).
struct Pca {
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;
  Eigen::VectorXd spectrum;
  Eigen::MatrixXd coefficients;

  Eigen::Index dimension() const { return mean.size(); }
  Eigen::Index components() const { return basis.cols(); }
  Eigen::Index samples() const { return coefficients.cols(); }
  Eigen::VectorXd singular_values() const { return spectrum.head(components()); }

  Eigen::VectorXd reconstruct(const Eigen::VectorXd& coeffs) const;
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;

  /// Smallest component count whose squared singular values cover the given
  /// fraction of the total.
  Eigen::Index components_for_energy(double fraction) const;

  /// RMS per-coordinate error of reconstructing all training samples with
  /// the kept components: sqrt(sum of dropped sigma^2 / (dimension * samples)).
  double truncation_rmse() const;
};

/// data: one sample per column (dimension x samples). Requires
/// components <= samples - 1 and at least two samples.
Pca fit_pca(const Eigen::MatrixXd& data, Eigen::Index components);

}  // namespace cardioflow::edspace
