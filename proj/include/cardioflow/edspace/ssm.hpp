#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <vector>

#include "cardioflow/edspace/pca.hpp"
#include "cardioflow/geom/mesh.hpp"

namespace cardioflow::edspace {

/// Shapes in vertex correspondence: identical face arrays and vertex counts.
struct Atlas {
  std::vector<geom::TriMesh> shapes;

  /// Throws AtlasError when there are fewer than two shapes or the
  /// topologies differ.
  void validate() const;
};

/// Stacks vertices as x0 y0 z0 x1 y1 z1 ... and back.
Eigen::VectorXd flatten(const geom::TriMesh& mesh);
std::vector<geom::Vec3> unflatten(const Eigen::VectorXd& v);

/// Linear shape model over an atlas: shapes are mean + basis * alpha.
struct Ssm {
  Pca pca;
  std::vector<geom::Face> faces;

  Eigen::Index modes() const { return pca.components(); }
  geom::TriMesh mean_shape() const;
};

/// k_alpha < 0 selects min(shapes - 1, 32).
Ssm build_ssm(const Atlas& atlas, int k_alpha = -1);

geom::TriMesh sample_shape(const Ssm& ssm, const Eigen::VectorXd& alpha);

/// Least-squares coefficients of a mesh with the atlas topology.
Eigen::VectorXd project_shape(const Ssm& ssm, const geom::TriMesh& mesh);

/// Draws `count` coefficient vectors: a uniformly chosen training sample's
/// coefficients plus Gaussian noise with std spread * sigma_i / sqrt(samples)
/// per mode.
std::vector<Eigen::VectorXd> augment(const Ssm& ssm, int count, double spread, std::uint64_t seed);

struct AugmentedSample {
  Eigen::VectorXd alpha;
  Eigen::Index source = 0;  // training sample the draw scatters around
};
std::vector<AugmentedSample> augment_labeled(const Ssm& ssm, int count, double spread, std::uint64_t seed);

/// Maps world coordinates into the canonical frame: (x - center) / scale.
struct NormalizationSpec {
  geom::Vec3 center = geom::Vec3::Zero();
  double scale = 1.0;

  geom::Vec3 apply(const geom::Vec3& x) const { return (x - center) / scale; }
  geom::Vec3 invert(const geom::Vec3& x) const { return x * scale + center; }
};

/// Center at the mean shape's vertex centroid, scaled so that its farthest
/// vertex lands on radius `radius`.
NormalizationSpec make_normalization(const Ssm& ssm, double radius = 0.9);

geom::TriMesh normalize(const geom::TriMesh& mesh, const NormalizationSpec& spec);
geom::PointCloud normalize(const geom::PointCloud& pc, const NormalizationSpec& spec);
geom::TriMesh denormalize(const geom::TriMesh& mesh, const NormalizationSpec& spec);
geom::PointCloud denormalize(const geom::PointCloud& pc, const NormalizationSpec& spec);

/// Directory of OBJ files listed in `atlas.json` ({"shapes": ["a.obj", ...]}).
Atlas load_atlas(const std::filesystem::path& dir);
void save_atlas(const std::filesystem::path& dir, const Atlas& atlas);

}  // namespace cardioflow::edspace
