#include "cardioflow/geom/aabb_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cardioflow/error.hpp"

namespace cardioflow::geom {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double triangle_winding(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 x = a - p, y = b - p, z = c - p;
  const double lx = x.norm(), ly = y.norm(), lz = z.norm();
  const double det = x.dot(y.cross(z));
  const double denom = lx * ly * lz + x.dot(y) * lz + y.dot(z) * lx + z.dot(x) * ly;
  return std::atan2(det, denom) / (2.0 * std::numbers::pi);
}

namespace {
constexpr int kLeafSize = 8;
// Clusters farther than this many radii use the dipole approximation.
constexpr double kFarFieldRatio = 4.0;
}  // namespace

AabbTree::AabbTree(const TriMesh& mesh) : mesh_(mesh) {
  check_indices(mesh_);
  const std::size_t n = mesh_.faces.size();
  order_.resize(n);
  face_boxes_.resize(n);
  face_centroids_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    order_[i] = static_cast<int>(i);
    const auto& f = mesh_.faces[i];
    Eigen::AlignedBox3d box;
    for (int k = 0; k < 3; ++k) box.extend(mesh_.vertices[f[k]]);
    face_boxes_[i] = box;
    face_centroids_[i] = (mesh_.vertices[f[0]] + mesh_.vertices[f[1]] + mesh_.vertices[f[2]]) / 3.0;
  }
  if (n > 0) {
    nodes_.reserve(2 * n / kLeafSize + 2);
    build(0, static_cast<int>(n));
  }
}

int AabbTree::build(int begin, int end) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  Eigen::AlignedBox3d centroid_box;
  double area_sum = 0.0;
  for (int i = begin; i < end; ++i) {
    const int fi = order_[i];
    node.box.extend(face_boxes_[fi]);
    centroid_box.extend(face_centroids_[fi]);
    const auto& f = mesh_.faces[fi];
    const Vec3 an = 0.5 * (mesh_.vertices[f[1]] - mesh_.vertices[f[0]])
                              .cross(mesh_.vertices[f[2]] - mesh_.vertices[f[0]]);
    const double area = an.norm();
    node.area_normal += an;
    node.center += area * face_centroids_[fi];
    area_sum += area;
  }
  node.center = area_sum > 0.0 ? Vec3(node.center / area_sum) : centroid_box.center();
  for (int i = begin; i < end; ++i) {
    const auto& f = mesh_.faces[order_[i]];
    for (int k = 0; k < 3; ++k) node.radius = std::max(node.radius, (mesh_.vertices[f[k]] - node.center).norm());
  }

  if (end - begin <= kLeafSize) {
    node.begin = begin;
    node.end = end;
    nodes_[index] = node;
    return index;
  }
  int axis = 0;
  centroid_box.diagonal().maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
    const double ca = face_centroids_[a][axis], cb = face_centroids_[b][axis];
    return ca < cb || (ca == cb && a < b);
  });
  node.left = build(begin, mid);
  node.right = build(mid, end);
  nodes_[index] = node;
  return index;
}

ClosestPoint AabbTree::closest(const Vec3& p) const {
  ClosestPoint best;
  best.squared_distance = std::numeric_limits<double>::infinity();
  if (nodes_.empty()) throw GeometryError("closest-point query on an empty mesh");
  std::vector<std::pair<double, int>> stack;
  stack.emplace_back(nodes_[0].box.squaredExteriorDistance(p), 0);
  while (!stack.empty()) {
    auto [d2, ni] = stack.back();
    stack.pop_back();
    if (d2 > best.squared_distance) continue;
    const Node& node = nodes_[ni];
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int fi = order_[i];
        const auto& f = mesh_.faces[fi];
        const Vec3 q = closest_point_on_triangle(p, mesh_.vertices[f[0]], mesh_.vertices[f[1]], mesh_.vertices[f[2]]);
        const double dq = (q - p).squaredNorm();
        // Ties resolve to the lowest face index so results do not depend on
        // traversal order.
        if (dq < best.squared_distance || (dq == best.squared_distance && fi < best.face)) {
          best = {q, dq, fi};
        }
      }
      continue;
    }
    const double dl = nodes_[node.left].box.squaredExteriorDistance(p);
    const double dr = nodes_[node.right].box.squaredExteriorDistance(p);
    // Push the farther child first so the nearer one is visited next.
    if (dl < dr) {
      stack.emplace_back(dr, node.right);
      stack.emplace_back(dl, node.left);
    } else {
      stack.emplace_back(dl, node.left);
      stack.emplace_back(dr, node.right);
    }
  }
  return best;
}

double AabbTree::winding_number(const Vec3& p) const {
  if (nodes_.empty()) return 0.0;
  return winding_recursive(0, p);
}

double AabbTree::winding_recursive(int ni, const Vec3& p) const {
  const Node& node = nodes_[ni];
  const Vec3 r = node.center - p;
  const double dist = r.norm();
  if (dist > kFarFieldRatio * node.radius && node.radius > 0.0) {
    return node.area_normal.dot(r) / (4.0 * std::numbers::pi * dist * dist * dist);
  }
  if (node.left < 0) {
    double w = 0.0;
    for (int i = node.begin; i < node.end; ++i) {
      const auto& f = mesh_.faces[order_[i]];
      w += triangle_winding(p, mesh_.vertices[f[0]], mesh_.vertices[f[1]], mesh_.vertices[f[2]]);
    }
    return w;
  }
  return winding_recursive(node.left, p) + winding_recursive(node.right, p);
}

void AabbTree::faces_in_box(const Eigen::AlignedBox3d& box, std::vector<int>& out) const {
  if (nodes_.empty()) return;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (!node.box.intersects(box)) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        if (face_boxes_[order_[i]].intersects(box)) out.push_back(order_[i]);
      }
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
}

}  // namespace cardioflow::geom
