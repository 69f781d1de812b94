#pragma once

#include <vector>

#include "cardioflow/geom/mesh.hpp"

namespace cardioflow::geom {

/// Regular grid of samples. Sample (i, j, k) sits at
/// origin + (i, j, k) * spacing and is stored at i + nx * (j + ny * k).
struct ScalarGrid {
  int nx = 0, ny = 0, nz = 0;
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Ones();
  std::vector<double> values;

  static ScalarGrid cube(int resolution, const Vec3& lo, const Vec3& hi);

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(nx) * (j + static_cast<std::size_t>(ny) * k);
  }
  Vec3 position(int i, int j, int k) const {
    return origin + Vec3(i * spacing.x(), j * spacing.y(), k * spacing.z());
  }
  double& at(int i, int j, int k) { return values[index(i, j, k)]; }
  double at(int i, int j, int k) const { return values[index(i, j, k)]; }
  std::size_t size() const { return static_cast<std::size_t>(nx) * ny * nz; }

  /// Trilinear interpolation; points outside the grid are clamped.
  double interpolate(const Vec3& p) const;
};

/// Iso-surface of the grid. Vertices are shared between neighbouring cells,
/// faces are oriented so normals point toward increasing field values.
/// Samples below iso count as inside. A field without crossings yields an
/// empty mesh.
TriMesh marching_cubes(const ScalarGrid& grid, double iso = 0.0);

}  // namespace cardioflow::geom
