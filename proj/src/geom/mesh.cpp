#include "cardioflow/geom/mesh.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <map>
#include <unordered_map>

#include "cardioflow/error.hpp"
#include "cardioflow/geom/aabb_tree.hpp"

namespace cardioflow::geom {

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

double surface_area(const TriMesh& mesh) {
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    total += triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
  }
  return total;
}

void check_indices(const TriMesh& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    for (int k = 0; k < 3; ++k) {
      if (f[k] < 0 || f[k] >= n) {
        throw GeometryError("face " + std::to_string(i) + " references vertex " + std::to_string(f[k]) +
                            " but the mesh has " + std::to_string(n) + " vertices");
      }
    }
  }
}

namespace {

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

}  // namespace

bool is_watertight(const TriMesh& mesh) {
  if (mesh.faces.empty()) return false;
  const int n = static_cast<int>(mesh.vertices.size());
  std::unordered_map<std::uint64_t, int> count;
  count.reserve(mesh.faces.size() * 3);
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      if (f[k] < 0 || f[k] >= n) return false;
      ++count[edge_key(f[k], f[(k + 1) % 3])];
    }
  }
  return std::all_of(count.begin(), count.end(), [](const auto& kv) { return kv.second == 2; });
}

bool is_consistently_oriented(const TriMesh& mesh) {
  // Each directed edge may appear at most once, and its reverse must exist.
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(mesh.faces.size() * 3);
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const auto key = (static_cast<std::uint64_t>(f[k]) << 32) | static_cast<std::uint32_t>(f[(k + 1) % 3]);
      if (++directed[key] > 1) return false;
    }
  }
  for (const auto& [key, c] : directed) {
    const std::uint64_t rev = (key << 32) | (key >> 32);
    if (!directed.count(rev)) return false;
  }
  return true;
}

TriMesh cleanup(const TriMesh& mesh) {
  check_indices(mesh);
  std::map<std::array<double, 3>, int> index_of;
  std::vector<int> remap(mesh.vertices.size());
  std::vector<Vec3> welded;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    auto [it, inserted] = index_of.try_emplace({v.x(), v.y(), v.z()}, static_cast<int>(welded.size()));
    if (inserted) welded.push_back(v);
    remap[i] = it->second;
  }
  std::vector<Face> faces;
  faces.reserve(mesh.faces.size());
  for (const auto& f : mesh.faces) {
    Face g(remap[f[0]], remap[f[1]], remap[f[2]]);
    if (g[0] == g[1] || g[1] == g[2] || g[0] == g[2]) continue;
    if (triangle_area(welded[g[0]], welded[g[1]], welded[g[2]]) == 0.0) continue;
    faces.push_back(g);
  }
  std::vector<int> used(welded.size(), -1);
  TriMesh out;
  for (auto& f : faces) {
    for (int k = 0; k < 3; ++k) {
      if (used[f[k]] < 0) {
        used[f[k]] = static_cast<int>(out.vertices.size());
        out.vertices.push_back(welded[f[k]]);
      }
      f[k] = used[f[k]];
    }
  }
  out.faces = std::move(faces);
  return out;
}

std::vector<Vec3> sample_surface(const TriMesh& mesh, std::size_t count, Rng& rng) {
  if (mesh.faces.empty()) throw GeometryError("cannot sample an empty mesh");
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    total += triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
    cumulative[i] = total;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const double r = unit(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    const std::size_t fi = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                                 mesh.faces.size() - 1);
    const auto& f = mesh.faces[fi];
    const double u = std::sqrt(unit(rng));
    const double v = unit(rng);
    out.push_back((1.0 - u) * mesh.vertices[f[0]] + u * (1.0 - v) * mesh.vertices[f[1]] +
                  u * v * mesh.vertices[f[2]]);
  }
  return out;
}

namespace {

bool separated_on_axis(const Vec3& axis, const std::array<Vec3, 3>& t1, const std::array<Vec3, 3>& t2) {
  if (axis.squaredNorm() < 1e-30) return false;
  double min1 = axis.dot(t1[0]), max1 = min1, min2 = axis.dot(t2[0]), max2 = min2;
  for (int k = 1; k < 3; ++k) {
    const double a = axis.dot(t1[k]);
    const double b = axis.dot(t2[k]);
    min1 = std::min(min1, a);
    max1 = std::max(max1, a);
    min2 = std::min(min2, b);
    max2 = std::max(max2, b);
  }
  return max1 < min2 || max2 < min1;
}

bool triangles_overlap(const std::array<Vec3, 3>& t1, const std::array<Vec3, 3>& t2) {
  const Vec3 n1 = (t1[1] - t1[0]).cross(t1[2] - t1[0]);
  const Vec3 n2 = (t2[1] - t2[0]).cross(t2[2] - t2[0]);
  if (separated_on_axis(n1, t1, t2) || separated_on_axis(n2, t1, t2)) return false;
  for (int i = 0; i < 3; ++i) {
    const Vec3 e1 = t1[(i + 1) % 3] - t1[i];
    for (int j = 0; j < 3; ++j) {
      const Vec3 e2 = t2[(j + 1) % 3] - t2[j];
      if (separated_on_axis(e1.cross(e2), t1, t2)) return false;
    }
    // In-plane edge normals cover the coplanar case.
    if (separated_on_axis(n1.cross(e1), t1, t2)) return false;
    const Vec3 e2 = t2[(i + 1) % 3] - t2[i];
    if (separated_on_axis(n2.cross(e2), t1, t2)) return false;
  }
  return true;
}

}  // namespace

bool has_self_intersections(const TriMesh& mesh) {
  AabbTree tree(mesh);
  std::vector<int> candidates;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    Eigen::AlignedBox3d box;
    for (int k = 0; k < 3; ++k) box.extend(mesh.vertices[f[k]]);
    candidates.clear();
    tree.faces_in_box(box, candidates);
    const std::array<Vec3, 3> t1{mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]};
    for (int j : candidates) {
      if (j <= static_cast<int>(i)) continue;
      const auto& g = mesh.faces[j];
      bool shares = false;
      for (int a = 0; a < 3 && !shares; ++a) {
        for (int b = 0; b < 3; ++b) shares = shares || f[a] == g[b];
      }
      if (shares) continue;
      const std::array<Vec3, 3> t2{mesh.vertices[g[0]], mesh.vertices[g[1]], mesh.vertices[g[2]]};
      if (triangles_overlap(t1, t2)) return true;
    }
  }
  return false;
}

Vec3 centroid(const std::vector<Vec3>& points) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  return points.empty() ? c : Vec3(c / static_cast<double>(points.size()));
}

PointCloud to_point_cloud(const TriMesh& mesh) {
  PointCloud pc;
  pc.points = mesh.vertices;
  return pc;
}

}  // namespace cardioflow::geom
