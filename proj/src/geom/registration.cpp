#include "cardioflow/geom/registration.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <functional>
#include <limits>

#include "cardioflow/error.hpp"
#include "cardioflow/geom/aabb_tree.hpp"
#include "cardioflow/geom/kd_tree.hpp"

namespace cardioflow::geom {

SimilarityTransform::SimilarityTransform(const Eigen::Matrix4d& matrix) : matrix_(matrix) {
  if (!matrix.allFinite()) throw GeometryError("similarity transform has non-finite entries");
  if (matrix.row(3).transpose() != Eigen::Vector4d(0, 0, 0, 1)) {
    throw GeometryError("similarity transform must have last row (0, 0, 0, 1)");
  }
  const Eigen::Matrix3d a = matrix.block<3, 3>(0, 0);
  const double det = a.determinant();
  if (det <= 0.0) throw GeometryError("similarity transform must have positive determinant");
  const double s = std::cbrt(det);
  const Eigen::Matrix3d r = a / s;
  const double err = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (err > 1e-9) {
    throw GeometryError("upper-left block is not a scaled rotation (orthonormality error " + std::to_string(err) +
                        ")");
  }
}

SimilarityTransform SimilarityTransform::from_parts(double scale, const Eigen::Matrix3d& rotation,
                                                    const Vec3& translation) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = scale * rotation;
  m.block<3, 1>(0, 3) = translation;
  return SimilarityTransform(m);
}

double SimilarityTransform::scale() const { return std::cbrt(matrix_.block<3, 3>(0, 0).determinant()); }

Eigen::Matrix3d SimilarityTransform::rotation() const { return matrix_.block<3, 3>(0, 0) / scale(); }

SimilarityTransform SimilarityTransform::inverse() const {
  const double s = scale();
  const Eigen::Matrix3d r = rotation();
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = r.transpose() / s;
  m.block<3, 1>(0, 3) = -(r.transpose() * translation()) / s;
  SimilarityTransform out;
  out.matrix_ = m;
  return out;
}

SimilarityTransform SimilarityTransform::compose(const SimilarityTransform& inner) const {
  SimilarityTransform out;
  out.matrix_ = matrix_ * inner.matrix_;
  return out;
}

PointCloud apply_transform(const SimilarityTransform& t, const PointCloud& pc) {
  PointCloud out = pc;
  for (auto& p : out.points) p = t.apply(p);
  return out;
}

TriMesh apply_transform(const SimilarityTransform& t, const TriMesh& mesh) {
  TriMesh out = mesh;
  for (auto& p : out.vertices) p = t.apply(p);
  // Proper similarities keep orientation, so faces are unchanged.
  return out;
}

namespace {

struct Frame {
  Vec3 mean = Vec3::Zero();
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();  // columns, ascending variance, det +1
  Vec3 variances = Vec3::Zero();
};

Frame principal_frame(const std::vector<Vec3>& pts) {
  Frame f;
  f.mean = centroid(pts);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) {
    const Vec3 d = p - f.mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  f.axes = eig.eigenvectors();
  f.variances = eig.eigenvalues().cwiseMax(0.0);
  if (f.axes.determinant() < 0) f.axes.col(0) = -f.axes.col(0);
  return f;
}

using ClosestFn = std::function<Vec3(const Vec3&)>;

RegistrationResult run_icp(const std::vector<Vec3>& source, const ClosestFn& closest, SimilarityTransform start,
                           const RegistrationOptions& options) {
  const Eigen::Index n = static_cast<Eigen::Index>(source.size());
  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (Eigen::Index i = 0; i < n; ++i) src.col(i) = source[i];

  SimilarityTransform t = start;
  auto correspond = [&](const SimilarityTransform& tr) {
    double err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3 y = tr.apply(src.col(i));
      dst.col(i) = closest(y);
      err += (y - dst.col(i)).squaredNorm();
    }
    return err / static_cast<double>(n);
  };

  double err = correspond(t);
  int iterations = 0;
  while (iterations < options.max_iterations && err > 0.0) {
    const Eigen::Matrix4d m = Eigen::umeyama(src, dst, !options.rigid);
    if (!m.allFinite() || m.block<3, 3>(0, 0).determinant() <= 0.0) break;  // all pairs collapsed onto one point
    const SimilarityTransform next(m);
    const double next_err = correspond(next);
    ++iterations;
    if (next_err > err) break;  // the closed-form step cannot increase error for fixed pairs; stop on numerical noise
    const double change = std::abs(err - next_err) / err;
    t = next;
    err = next_err;
    if (change < options.relative_tolerance) break;
  }
  return {t, std::sqrt(err), iterations};
}

RegistrationResult register_impl(const PointCloud& source, const std::vector<Vec3>& target_samples,
                                 const ClosestFn& closest, const RegistrationOptions& options) {
  if (source.size() < 4) {
    throw DegenerateInputError("registration needs at least 4 source points, got " + std::to_string(source.size()));
  }
  for (const auto& p : source.points) {
    if (!p.allFinite()) throw NonFiniteError("registration source contains a non-finite point");
  }
  const Frame fs = principal_frame(source.points);
  if (fs.variances[0] <= 1e-12 * fs.variances[2]) {
    throw DegenerateInputError("registration source points are coplanar or collinear (smallest principal variance " +
                               std::to_string(fs.variances[0]) + ")");
  }
  const Frame ft = principal_frame(target_samples);
  const double scale = options.rigid ? 1.0 : std::sqrt(ft.variances.sum() / fs.variances.sum());

  // Candidates are ranked by the residual relative to the size of the
  // transformed source. With a free scale, ICP from a wrong start can shrink
  // the source onto a few target points, which drives the absolute residual
  // to zero but not the relative one.
  const double spread = std::sqrt(fs.variances.sum());
  static const std::array<Vec3, 4> flips{Vec3(1, 1, 1), Vec3(-1, -1, 1), Vec3(-1, 1, -1), Vec3(1, -1, -1)};
  RegistrationResult best;
  double best_relative = std::numeric_limits<double>::infinity();
  for (const auto& flip : flips) {
    const Eigen::Matrix3d r = ft.axes * flip.asDiagonal() * fs.axes.transpose();
    const Vec3 tr = ft.mean - scale * r * fs.mean;
    const auto result = run_icp(source.points, closest, SimilarityTransform::from_parts(scale, r, tr), options);
    const double relative = result.rms_residual / (result.transform.scale() * spread);
    if (relative < best_relative) {
      best = result;
      best_relative = relative;
    }
  }
  return best;
}

}  // namespace

RegistrationResult register_similarity(const PointCloud& source, const TriMesh& target,
                                       const RegistrationOptions& options) {
  if (target.empty()) throw DegenerateInputError("registration target mesh has no faces");
  const AabbTree tree(target);
  Rng rng = make_rng(0, "registration.target_samples");
  const auto samples = sample_surface(target, static_cast<std::size_t>(options.target_samples), rng);
  return register_impl(source, samples, [&](const Vec3& p) { return tree.closest(p).point; }, options);
}

RegistrationResult register_similarity(const PointCloud& source, const PointCloud& target,
                                       const RegistrationOptions& options) {
  if (target.empty()) throw DegenerateInputError("registration target point cloud is empty");
  const KdTree tree(target.points);
  return register_impl(source, target.points,
                       [&](const Vec3& p) { return tree.points()[tree.nearest(p).index]; }, options);
}

}  // namespace cardioflow::geom
