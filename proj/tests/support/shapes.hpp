#pragma once

#include <array>
#include <map>
#include <utility>

#include "cardioflow/geom/mesh.hpp"

namespace cardioflow::testing {

// Subdivided icosahedron projected to the sphere of the given radius,
// outward oriented.
inline geom::TriMesh icosphere(int levels, double radius = 1.0) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  geom::TriMesh m;
  const double raw[12][3] = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                             {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (const auto& r : raw) m.vertices.push_back(geom::Vec3(r[0], r[1], r[2]).normalized());
  const int faces[20][3] = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                            {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                            {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (const auto& f : faces) m.faces.emplace_back(f[0], f[1], f[2]);
  for (int l = 0; l < levels; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      const int id = static_cast<int>(m.vertices.size());
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      mid.emplace(key, id);
      return id;
    };
    std::vector<geom::Face> next;
    for (const auto& f : m.faces) {
      const int a = midpoint(f[0], f[1]), b = midpoint(f[1], f[2]), c = midpoint(f[2], f[0]);
      next.emplace_back(f[0], a, c);
      next.emplace_back(f[1], b, a);
      next.emplace_back(f[2], c, b);
      next.emplace_back(a, b, c);
    }
    m.faces = std::move(next);
  }
  for (auto& v : m.vertices) v *= radius;
  return m;
}

// Closed shell between two concentric spheres; the inner surface faces the
// cavity.
inline geom::TriMesh spherical_shell(int levels, double inner, double outer) {
  geom::TriMesh out = icosphere(levels, outer);
  const geom::TriMesh in = icosphere(levels, inner);
  const int offset = static_cast<int>(out.vertices.size());
  out.vertices.insert(out.vertices.end(), in.vertices.begin(), in.vertices.end());
  for (const auto& f : in.faces) out.faces.emplace_back(f[0] + offset, f[2] + offset, f[1] + offset);
  return out;
}

}  // namespace cardioflow::testing
