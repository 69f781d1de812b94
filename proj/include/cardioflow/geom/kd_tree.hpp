#pragma once

#include <vector>

#include "cardioflow/geom/mesh.hpp"

namespace cardioflow::geom {

struct Neighbor {
  int index = -1;
  double squared_distance = 0.0;
};

/// Static 3-d tree for nearest-neighbour queries. Ties go to the lowest
/// point index.
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points);

  Neighbor nearest(const Vec3& query) const;
  const std::vector<Vec3>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1, right = -1;
  };
  int build(int begin, int end, int depth);
  void search(int node, const Vec3& q, Neighbor& best) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace cardioflow::geom
