#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <vector>

#include "cardioflow/geom/mesh.hpp"

namespace cardioflow::geom {

struct ClosestPoint {
  Vec3 point = Vec3::Zero();
  double squared_distance = 0.0;
  int face = -1;
};

/// Closest point on triangle (a, b, c) to p (Ericson, Real-Time Collision
/// Detection, 5.1.5). Returns exactly a, b or c when p coincides with them.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Signed solid angle of triangle (a, b, c) seen from p, divided by 4 pi
/// (van Oosterom & Strackee).
double triangle_winding(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Bounding-volume hierarchy over the faces of a mesh. Supports exact
/// closest-point queries and hierarchical generalized winding numbers (exact
/// triangle sums near the query, dipole expansion for distant clusters).
class AabbTree {
 public:
  explicit AabbTree(const TriMesh& mesh);

  ClosestPoint closest(const Vec3& p) const;
  double winding_number(const Vec3& p) const;

  /// Indices of faces whose boxes overlap the given box.
  void faces_in_box(const Eigen::AlignedBox3d& box, std::vector<int>& out) const;

  const TriMesh& mesh() const { return mesh_; }

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1, right = -1;  // children, -1 for leaves
    int begin = 0, end = 0;     // range in order_ for leaves
    Vec3 area_normal = Vec3::Zero();  // sum of area-weighted normals
    Vec3 center = Vec3::Zero();       // area-weighted centroid
    double radius = 0.0;              // max distance of vertices from center
  };

  int build(int begin, int end);
  double winding_recursive(int node, const Vec3& p) const;

  TriMesh mesh_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  std::vector<Eigen::AlignedBox3d> face_boxes_;
  std::vector<Vec3> face_centroids_;
};

}  // namespace cardioflow::geom
