#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <vector>

#include "cardioflow/geom/mesh.hpp"

namespace cardioflow::training {

/// Training points, one per column, with their ground-truth signed distance
/// and the (subject, phase) group they belong to.
struct SampleBatch {
  Eigen::MatrixXd points;  // 3 x B
  Eigen::RowVectorXd gt_sdf;
  std::vector<int> phase;
  Eigen::RowVectorXd tau;
  std::vector<int> subject;

  Eigen::Index size() const { return points.cols(); }
  /// Throws ShapeError for inconsistent lengths, NonFiniteError for non-finite
  /// targets and DatasetError for points outside [-1.1, 1.1]^3.
  void validate() const;
};

struct SamplingConfig {
  int surface = 8000;  // near-surface samples, half per noise level
  int uniform = 1000;  // uniform samples in [-1, 1]^3
  std::array<double, 2> sigma_near{0.005, 0.03};
};

/// Surface samples jittered by Gaussian noise (std sigma_near[0] for the
/// first half, sigma_near[1] for the rest), then uniform samples in
/// [-1, 1]^3, with exact signed distances. Jittered points are clamped to
/// [-1.1, 1.1]^3. Labels are zero.
SampleBatch sample_training_points(const geom::TriMesh& mesh, int n_surface, int n_uniform,
                                   std::array<double, 2> sigma_near, std::uint64_t seed);

inline SampleBatch sample_training_points(const geom::TriMesh& mesh, const SamplingConfig& c, std::uint64_t seed) {
  return sample_training_points(mesh, c.surface, c.uniform, c.sigma_near, seed);
}

/// Exact surface samples of a mesh as a 3 x n matrix.
Eigen::MatrixXd surface_points(const geom::TriMesh& mesh, int n, std::uint64_t seed);

}  // namespace cardioflow::training
