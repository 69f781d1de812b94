#include "cardioflow/geom/kd_tree.hpp"

#include <algorithm>
#include <limits>

#include "cardioflow/error.hpp"

namespace cardioflow::geom {

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  order_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  nodes_.reserve(points_.size());
  root_ = build(0, static_cast<int>(points_.size()), 0);
}

int KdTree::build(int begin, int end, int depth) {
  if (begin >= end) return -1;
  Eigen::AlignedBox3d box;
  for (int i = begin; i < end; ++i) box.extend(points_[order_[i]]);
  int axis = 0;
  box.diagonal().maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
    return points_[a][axis] < points_[b][axis] || (points_[a][axis] == points_[b][axis] && a < b);
  });
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back({order_[mid], axis, -1, -1});
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid + 1, end, depth + 1);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

Neighbor KdTree::nearest(const Vec3& query) const {
  if (root_ < 0) throw GeometryError("nearest-neighbour query on an empty point set");
  Neighbor best{-1, std::numeric_limits<double>::infinity()};
  search(root_, query, best);
  return best;
}

void KdTree::search(int ni, const Vec3& q, Neighbor& best) const {
  if (ni < 0) return;
  const Node& node = nodes_[ni];
  const Vec3& p = points_[node.point];
  const double d2 = (p - q).squaredNorm();
  if (d2 < best.squared_distance || (d2 == best.squared_distance && node.point < best.index)) {
    best = {node.point, d2};
  }
  const double diff = q[node.axis] - p[node.axis];
  const int near = diff < 0 ? node.left : node.right;
  const int far = diff < 0 ? node.right : node.left;
  search(near, q, best);
  // <= keeps equal-distance candidates on the far side reachable for the
  // lowest-index tie rule.
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

}  // namespace cardioflow::geom
