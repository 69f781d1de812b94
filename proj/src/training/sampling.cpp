#include "cardioflow/training/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "cardioflow/error.hpp"
#include "cardioflow/geom/signed_distance.hpp"

namespace cardioflow::training {

void SampleBatch::validate() const {
  const Eigen::Index n = points.cols();
  if (points.rows() != 3 || gt_sdf.size() != n || tau.size() != n || static_cast<Eigen::Index>(phase.size()) != n ||
      static_cast<Eigen::Index>(subject.size()) != n) {
    throw ShapeError("sample batch fields have inconsistent lengths");
  }
  if (!gt_sdf.allFinite() || !points.allFinite()) throw NonFiniteError("sample batch has non-finite entries");
  if (n > 0 && points.cwiseAbs().maxCoeff() > 1.1) throw DatasetError("sample point outside [-1.1, 1.1]^3");
}

SampleBatch sample_training_points(const geom::TriMesh& mesh, int n_surface, int n_uniform,
                                   std::array<double, 2> sigma_near, std::uint64_t seed) {
  if (n_surface < 0 || n_uniform < 0) throw ConfigError("sample counts must be non-negative");
  if (!(sigma_near[0] >= 0.0 && sigma_near[1] >= 0.0)) throw ConfigError("sampling noise must be non-negative");
  const geom::SignedDistanceField field(mesh);
  Rng rng = make_rng(seed, "sampling");
  std::vector<geom::Vec3> pts;
  pts.reserve(static_cast<std::size_t>(n_surface + n_uniform));
  if (n_surface > 0) {
    const auto surf = geom::sample_surface(mesh, static_cast<std::size_t>(n_surface), rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < n_surface; ++i) {
      const double s = i < n_surface / 2 ? sigma_near[0] : sigma_near[1];
      geom::Vec3 p = surf[static_cast<std::size_t>(i)];
      if (s > 0.0)
        for (int d = 0; d < 3; ++d) p[d] += s * normal(rng);
      pts.push_back(p.cwiseMax(-1.1).cwiseMin(1.1));
    }
  }
  std::uniform_real_distribution<double> box(-1.0, 1.0);
  for (int i = 0; i < n_uniform; ++i) {
    const double x = box(rng), y = box(rng), z = box(rng);
    pts.emplace_back(x, y, z);
  }
  const std::vector<double> sdf = field.evaluate(pts);

  SampleBatch b;
  const auto n = static_cast<Eigen::Index>(pts.size());
  b.points.resize(3, n);
  b.gt_sdf.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b.points.col(i) = pts[static_cast<std::size_t>(i)];
    b.gt_sdf[i] = sdf[static_cast<std::size_t>(i)];
  }
  b.phase.assign(pts.size(), 0);
  b.subject.assign(pts.size(), 0);
  b.tau = Eigen::RowVectorXd::Zero(n);
  return b;
}

Eigen::MatrixXd surface_points(const geom::TriMesh& mesh, int n, std::uint64_t seed) {
  Rng rng = make_rng(seed, "surface");
  const auto pts = geom::sample_surface(mesh, static_cast<std::size_t>(n), rng);
  Eigen::MatrixXd m(3, n);
  for (int i = 0; i < n; ++i) m.col(i) = pts[static_cast<std::size_t>(i)];
  return m;
}

}  // namespace cardioflow::training
