#pragma once

#include <vector>

#include "cardioflow/geom/mesh.hpp"

namespace cardioflow::geom {

struct Plane {
  Vec3 origin = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // unit length

  double signed_distance(const Vec3& p) const { return normal.dot(p - origin); }
};

/// Polyline where a mesh crosses a plane. Closed loops do not repeat their
/// first point.
struct Contour {
  std::vector<Vec3> points;
  bool closed = true;

  double length() const;
};

/// Intersection polylines of the mesh with one plane. Vertices exactly on
/// the plane count as lying on the positive side.
std::vector<Contour> intersect_plane(const TriMesh& mesh, const Plane& plane);

/// Points evenly spaced by arc length along the contour.
std::vector<Vec3> resample(const Contour& contour, int count);

/// Slices the mesh with every plane and resamples each contour to
/// samples_per_contour points. Points carry the plane index as their slice
/// label; planes that miss the mesh contribute nothing.
PointCloud slice_mesh(const TriMesh& mesh, const std::vector<Plane>& planes, int samples_per_contour);

}  // namespace cardioflow::geom
