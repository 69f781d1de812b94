#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "cardioflow/geom/mesh.hpp"
#include "cardioflow/geom/slicing.hpp"

namespace cardioflow::metrics {

/// mean_a min_b ||a - b|| + mean_b min_a ||a - b||, nearest neighbours from a
/// kd-tree. Throws DegenerateInputError for an empty cloud.
double chamfer(const std::vector<geom::Vec3>& a, const std::vector<geom::Vec3>& b);
/// Mean distance from each point of `from` to its nearest point of `to`.
double directed_mean_distance(const std::vector<geom::Vec3>& from, const std::vector<geom::Vec3>& to);

/// Seeded subsample of n distinct points (order of the returned indices is
/// the draw order). Clouds of equal size get identical index sets.
std::vector<std::size_t> subsample_indices(std::size_t size, std::size_t n, std::uint64_t seed);

/// Minimum-cost perfect matching (rows to columns) of a square cost matrix.
/// Returns the column assigned to each row.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

/// Both clouds subsampled to n_sub points, exact optimal matching on the
/// Euclidean cost, mean matched distance.
double emd(const std::vector<geom::Vec3>& a, const std::vector<geom::Vec3>& b, std::size_t n_sub = 256,
           std::uint64_t seed = 0);

/// Pixel grid on a plane: pixel (r, c) has its centre at
/// origin + (c + 0.5) * spacing * u + (r + 0.5) * spacing * v.
struct SliceMask {
  int rows = 0, cols = 0;
  double spacing = 1.0;
  geom::Vec3 origin = geom::Vec3::Zero();
  geom::Vec3 u = geom::Vec3::UnitX();
  geom::Vec3 v = geom::Vec3::UnitY();
  std::vector<std::uint8_t> inside;  // row-major

  bool at(int r, int c) const { return inside[static_cast<std::size_t>(r) * cols + c] != 0; }
  std::size_t count() const;
  geom::Plane plane() const { return {origin, u.cross(v).normalized()}; }
  geom::Vec3 pixel_center(int r, int c) const {
    return origin + (c + 0.5) * spacing * u + (r + 0.5) * spacing * v;
  }
  void validate() const;  // throws ConfigError
};

/// Empty mask covering the square [-half, half]^2 around `center` on the
/// plane with normal `normal`.
SliceMask make_mask(const geom::Vec3& center, const geom::Vec3& normal, double half, double spacing);

/// Pixels whose centres lie inside the mesh cross-section (even-odd rule over
/// all contours, so a shell section becomes an annulus).
SliceMask rasterize(const geom::TriMesh& mesh, const SliceMask& frame);

struct DiceHausdorff {
  double dice = 0.0;
  double hausdorff = 0.0;  // mask units
  bool empty = false;      // mesh does not cut the plane or a mask is empty
};

/// percentile = 100 gives the maximum; lower values take that percentile of
/// the pooled directed boundary distances.
DiceHausdorff dice_hausdorff(const geom::TriMesh& pred, const SliceMask& gt, double percentile = 100.0);
DiceHausdorff compare_masks(const SliceMask& a, const SliceMask& b, double percentile = 100.0);

/// Signed volume enclosed by the mesh (sum of origin tetrahedra). For a shell
/// with an inward-facing inner surface this is outer minus inner.
double signed_volume(const geom::TriMesh& mesh);

struct VolumeCurve {
  std::vector<double> volumes;
  std::vector<bool> negative;  // inverted orientation
};

/// Throws GeometryError for meshes that are not watertight.
VolumeCurve volume_curve(const std::vector<geom::TriMesh>& meshes);

/// (max - min) / max of a volume curve.
double ejection_fraction(const std::vector<double>& volumes);

}  // namespace cardioflow::metrics
