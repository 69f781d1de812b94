#include "cardioflow/geom/slicing.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cardioflow/error.hpp"

namespace cardioflow::geom {

double Contour::length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += (points[i] - points[i - 1]).norm();
  if (closed && points.size() > 1) total += (points.front() - points.back()).norm();
  return total;
}

namespace {
using EdgeKey = std::pair<int, int>;
EdgeKey make_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }
}  // namespace

std::vector<Contour> intersect_plane(const TriMesh& mesh, const Plane& plane) {
  if (std::abs(plane.normal.norm() - 1.0) > 1e-9) {
    throw GeometryError("slicing plane normal must have unit length");
  }
  check_indices(mesh);
  std::vector<double> side(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) side[i] = plane.signed_distance(mesh.vertices[i]);
  auto positive = [&](int v) { return side[v] >= 0.0; };

  std::map<EdgeKey, int> node_of_edge;
  std::vector<Vec3> node_point;
  std::vector<std::vector<int>> adjacency;
  auto node = [&](int a, int b) {
    const EdgeKey key = make_key(a, b);
    auto [it, inserted] = node_of_edge.try_emplace(key, static_cast<int>(node_point.size()));
    if (inserted) {
      const int lo = key.first, hi = key.second;
      const double t = side[lo] / (side[lo] - side[hi]);
      node_point.push_back(mesh.vertices[lo] + t * (mesh.vertices[hi] - mesh.vertices[lo]));
      adjacency.emplace_back();
    }
    return it->second;
  };

  for (const auto& f : mesh.faces) {
    int ends[2];
    int n = 0;
    for (int k = 0; k < 3; ++k) {
      const int a = f[k], b = f[(k + 1) % 3];
      if (positive(a) != positive(b)) ends[n++] = node(a, b);
    }
    if (n == 2) {
      adjacency[ends[0]].push_back(ends[1]);
      adjacency[ends[1]].push_back(ends[0]);
    }
  }

  std::vector<Contour> contours;
  std::vector<bool> used(node_point.size(), false);
  auto walk = [&](int start, bool closed) {
    Contour c;
    c.closed = closed;
    int prev = -1, cur = start;
    while (cur >= 0 && !used[cur]) {
      used[cur] = true;
      c.points.push_back(node_point[cur]);
      int next = -1;
      for (int nb : adjacency[cur]) {
        if (nb != prev && !used[nb]) {
          next = nb;
          break;
        }
      }
      prev = cur;
      cur = next;
    }
    if (c.points.size() >= 2) contours.push_back(std::move(c));
  };
  // Open chains (boundary of open meshes) start at degree-1 nodes.
  for (std::size_t i = 0; i < node_point.size(); ++i) {
    if (!used[i] && adjacency[i].size() == 1) walk(static_cast<int>(i), false);
  }
  for (std::size_t i = 0; i < node_point.size(); ++i) {
    if (!used[i] && !adjacency[i].empty()) walk(static_cast<int>(i), true);
  }
  return contours;
}

std::vector<Vec3> resample(const Contour& contour, int count) {
  std::vector<Vec3> out;
  if (count <= 0 || contour.points.empty()) return out;
  std::vector<Vec3> pts = contour.points;
  if (contour.closed) pts.push_back(pts.front());
  std::vector<double> arc(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) arc[i] = arc[i - 1] + (pts[i] - pts[i - 1]).norm();
  const double total = arc.back();
  if (total == 0.0) return std::vector<Vec3>(static_cast<std::size_t>(count), pts.front());
  // Closed loops: count points over the full loop; open chains include both ends.
  const double step = contour.closed ? total / count : (count > 1 ? total / (count - 1) : 0.0);
  std::size_t seg = 1;
  for (int s = 0; s < count; ++s) {
    const double target = std::min(s * step, total);
    while (seg + 1 < arc.size() && arc[seg] < target) ++seg;
    const double len = arc[seg] - arc[seg - 1];
    const double t = len > 0.0 ? (target - arc[seg - 1]) / len : 0.0;
    out.push_back(pts[seg - 1] + t * (pts[seg] - pts[seg - 1]));
  }
  return out;
}

PointCloud slice_mesh(const TriMesh& mesh, const std::vector<Plane>& planes, int samples_per_contour) {
  PointCloud pc;
  for (std::size_t s = 0; s < planes.size(); ++s) {
    for (const auto& contour : intersect_plane(mesh, planes[s])) {
      for (const auto& p : resample(contour, samples_per_contour)) {
        pc.points.push_back(p);
        pc.slice.push_back(static_cast<int>(s));
      }
    }
  }
  return pc;
}

}  // namespace cardioflow::geom
