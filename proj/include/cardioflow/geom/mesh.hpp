#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <vector>

#include "cardioflow/random.hpp"

namespace cardioflow::geom {

using Vec3 = Eigen::Vector3d;
using Face = Eigen::Vector3i;

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  bool empty() const { return faces.empty(); }
};

/// Points with optional per-point labels. `phase` and `slice` are either
/// empty or the same length as `points`.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<int> phase;
  std::vector<int> slice;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_phase() const { return !phase.empty(); }
  bool has_slice() const { return !slice.empty(); }
};

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);
double surface_area(const TriMesh& mesh);

/// True when every undirected edge is shared by exactly two faces and each
/// face index is in range.
bool is_watertight(const TriMesh& mesh);

/// True when every shared edge is traversed in opposite directions by its two
/// faces.
bool is_consistently_oriented(const TriMesh& mesh);

/// Merges bit-identical vertices, drops zero-area and repeated-index faces and
/// unreferenced vertices.
TriMesh cleanup(const TriMesh& mesh);

/// Throws GeometryError when a face index is out of range.
void check_indices(const TriMesh& mesh);

/// Area-weighted uniform samples on the surface.
std::vector<Vec3> sample_surface(const TriMesh& mesh, std::size_t count, Rng& rng);

/// Triangle pairs that do not share a vertex but overlap (separating-axis
/// test over BVH-culled candidates). Returns true at the first hit.
bool has_self_intersections(const TriMesh& mesh);

Vec3 centroid(const std::vector<Vec3>& points);

PointCloud to_point_cloud(const TriMesh& mesh);

}  // namespace cardioflow::geom
