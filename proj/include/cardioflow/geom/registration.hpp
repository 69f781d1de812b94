#pragma once

#include <Eigen/Core>

#include "cardioflow/geom/mesh.hpp"

namespace cardioflow::geom {

/// Homogeneous 4x4 transform whose upper-left block is s * R with R a proper
/// rotation and s > 0.
class SimilarityTransform {
 public:
  SimilarityTransform() : matrix_(Eigen::Matrix4d::Identity()) {}
  /// Throws GeometryError if the matrix is not a similarity.
  explicit SimilarityTransform(const Eigen::Matrix4d& matrix);
  static SimilarityTransform from_parts(double scale, const Eigen::Matrix3d& rotation, const Vec3& translation);

  const Eigen::Matrix4d& matrix() const { return matrix_; }
  double scale() const;
  Eigen::Matrix3d rotation() const;
  Vec3 translation() const { return matrix_.block<3, 1>(0, 3); }

  Vec3 apply(const Vec3& p) const { return matrix_.block<3, 3>(0, 0) * p + translation(); }
  SimilarityTransform inverse() const;
  SimilarityTransform compose(const SimilarityTransform& inner) const;  // this * inner

 private:
  Eigen::Matrix4d matrix_;
};

PointCloud apply_transform(const SimilarityTransform& t, const PointCloud& pc);
TriMesh apply_transform(const SimilarityTransform& t, const TriMesh& mesh);

struct RegistrationOptions {
  bool rigid = false;  // fix scale to 1
  int max_iterations = 100;
  double relative_tolerance = 1e-6;
  int target_samples = 20000;  // surface samples used for the principal-axes start
};

struct RegistrationResult {
  SimilarityTransform transform;
  double rms_residual = 0.0;  // RMS distance of transformed source to target
  int iterations = 0;
};

/// Iterative closest point with a closed-form similarity step, started from
/// centroid and principal-axes alignment (all four proper axis sign choices
/// are tried, the best result is kept). Throws DegenerateInputError for fewer
/// than 4 points or (near-)coplanar sources.
RegistrationResult register_similarity(const PointCloud& source, const TriMesh& target,
                                       const RegistrationOptions& options = {});
RegistrationResult register_similarity(const PointCloud& source, const PointCloud& target,
                                       const RegistrationOptions& options = {});

}  // namespace cardioflow::geom
