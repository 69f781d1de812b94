#pragma once

#include <vector>

#include "cardioflow/geom/aabb_tree.hpp"

namespace cardioflow::geom {

/// Exact unsigned distance from the BVH, sign from the generalized winding
/// number (inside when w > 0.5). Negative inside, positive outside.
class SignedDistanceField {
 public:
  /// Throws GeometryError for meshes that are not watertight.
  explicit SignedDistanceField(const TriMesh& mesh);

  double operator()(const Vec3& p) const;
  std::vector<double> evaluate(const std::vector<Vec3>& points) const;

  const AabbTree& tree() const { return tree_; }

 private:
  AabbTree tree_;
};

/// Convenience wrapper that builds the tree for a single query.
double signed_distance(const TriMesh& mesh, const Vec3& query);

}  // namespace cardioflow::geom
