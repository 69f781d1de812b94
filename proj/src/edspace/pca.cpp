#include "cardioflow/edspace/pca.hpp"

#include <Eigen/SVD>

#include <cmath>

#include "cardioflow/error.hpp"

namespace cardioflow::edspace {

Eigen::VectorXd Pca::reconstruct(const Eigen::VectorXd& coeffs) const {
  if (coeffs.size() != components()) {
    throw ShapeError("expected " + std::to_string(components()) + " coefficients, got " +
                     std::to_string(coeffs.size()));
  }
  return mean + basis * coeffs;
}

Eigen::VectorXd Pca::project(const Eigen::VectorXd& x) const {
  if (x.size() != dimension()) {
    throw ShapeError("expected a vector of length " + std::to_string(dimension()) + ", got " +
                     std::to_string(x.size()));
  }
  return basis.transpose() * (x - mean);
}

Eigen::Index Pca::components_for_energy(double fraction) const {
  const double total = spectrum.squaredNorm();
  if (total == 0.0) return 0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    acc += spectrum[i] * spectrum[i];
    if (acc >= fraction * total) return i + 1;
  }
  return spectrum.size();
}

double Pca::truncation_rmse() const {
  const Eigen::Index k = components();
  const double tail = spectrum.tail(spectrum.size() - k).squaredNorm();
  return std::sqrt(tail / (static_cast<double>(dimension()) * static_cast<double>(samples())));
}

Pca fit_pca(const Eigen::MatrixXd& data, Eigen::Index components) {
  const Eigen::Index n = data.cols();
  if (n < 2) throw ShapeError("PCA needs at least two samples, got " + std::to_string(n));
  if (components < 0 || components > n - 1) {
    throw ShapeError("PCA component count " + std::to_string(components) + " must lie in [0, " +
                     std::to_string(n - 1) + "] for " + std::to_string(n) + " samples");
  }
  if (!data.allFinite()) throw NonFiniteError("PCA input contains non-finite values");
  Pca p;
  p.mean = data.rowwise().mean();
  const Eigen::MatrixXd centered = data.colwise() - p.mean;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU);
  p.spectrum = svd.singularValues();
  p.basis = svd.matrixU().leftCols(components);
  p.coefficients = p.basis.transpose() * centered;
  return p;
}

}  // namespace cardioflow::edspace
