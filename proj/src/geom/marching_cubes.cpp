#include "cardioflow/geom/marching_cubes.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

#include "cardioflow/error.hpp"

namespace cardioflow::geom {

ScalarGrid ScalarGrid::cube(int resolution, const Vec3& lo, const Vec3& hi) {
  if (resolution < 2) throw ShapeError("grid resolution must be at least 2, got " + std::to_string(resolution));
  ScalarGrid g;
  g.nx = g.ny = g.nz = resolution;
  g.origin = lo;
  g.spacing = (hi - lo) / static_cast<double>(resolution - 1);
  g.values.assign(g.size(), 0.0);
  return g;
}

double ScalarGrid::interpolate(const Vec3& p) const {
  const Vec3 u = (p - origin).cwiseQuotient(spacing);
  const std::array<int, 3> n{nx, ny, nz};
  std::array<int, 3> i0{};
  std::array<double, 3> f{};
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(u[a], 0.0, static_cast<double>(n[a] - 1));
    i0[a] = std::min(static_cast<int>(std::floor(c)), n[a] - 2);
    f[a] = c - i0[a];
  }
  double v = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
    v += w * at(i0[0] + dx, i0[1] + dy, i0[2] + dz);
  }
  return v;
}

namespace {

// Cube corners: bit 0 = x, bit 1 = y, bit 2 = z.
struct CubeTopology {
  std::array<std::array<int, 2>, 12> edge_corners{};
  std::array<std::array<int, 4>, 6> face_corners{};  // counter-clockwise seen from outside
  std::array<std::vector<std::array<int, 3>>, 256> triangles;  // edge indices per case
};

int edge_between(const CubeTopology& t, int a, int b) {
  for (int e = 0; e < 12; ++e) {
    if ((t.edge_corners[e][0] == a && t.edge_corners[e][1] == b) ||
        (t.edge_corners[e][0] == b && t.edge_corners[e][1] == a)) {
      return e;
    }
  }
  return -1;
}

Vec3 corner_position(int c) { return Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1); }

// Bitmask of the two cube faces (axis * 2 + side) that contain an edge.
int edge_faces(int a, int b) {
  int mask = 0;
  for (int axis = 0; axis < 3; ++axis) {
    if (((a ^ b) >> axis) & 1) continue;
    mask |= 1 << (axis * 2 + ((a >> axis) & 1));
  }
  return mask;
}

// Triangulates a crossing loop without chords between two crossings on the
// same cube face. Such a chord would not be matched by the neighbouring cell
// and would leave a crack.
void triangulate_loop(const std::vector<int>& loop, std::vector<std::array<int, 3>>& out) {
  static const std::array<std::array<int, 2>, 12> corners = [] {
    std::array<std::array<int, 2>, 12> c{};
    int e = 0;
    for (int a = 0; a < 8; ++a) {
      for (int bit = 0; bit < 3; ++bit) {
        const int b = a | (1 << bit);
        if (b != a) c[e++] = {a, b};
      }
    }
    return c;
  }();
  const int n = static_cast<int>(loop.size());
  if (n < 3) return;
  auto bad = [&](int i, int j) {
    if ((j - i + n) % n == 1 || (i - j + n) % n == 1) return 0;  // loop side
    const auto& ei = corners[loop[i]];
    const auto& ej = corners[loop[j]];
    return (edge_faces(ei[0], ei[1]) & edge_faces(ej[0], ej[1])) ? 1 : 0;
  };
  // Interval DP over polygon triangulations minimising bad chords.
  std::vector<std::vector<int>> cost(n, std::vector<int>(n, 0)), split(n, std::vector<int>(n, -1));
  for (int len = 2; len < n; ++len) {
    for (int i = 0; i + len < n; ++i) {
      const int j = i + len;
      cost[i][j] = 1 << 20;
      for (int k = i + 1; k < j; ++k) {
        const int c = cost[i][k] + cost[k][j] + bad(i, k) + bad(k, j);
        if (c < cost[i][j]) {
          cost[i][j] = c;
          split[i][j] = k;
        }
      }
    }
  }
  std::vector<std::pair<int, int>> stack{{0, n - 1}};
  while (!stack.empty()) {
    auto [i, j] = stack.back();
    stack.pop_back();
    if (j - i < 2) continue;
    const int k = split[i][j];
    out.push_back({loop[i], loop[k], loop[j]});
    stack.emplace_back(i, k);
    stack.emplace_back(k, j);
  }
}

CubeTopology build_topology() {
  CubeTopology t;
  int e = 0;
  for (int a = 0; a < 8; ++a) {
    for (int bit = 0; bit < 3; ++bit) {
      const int b = a | (1 << bit);
      if (b != a) t.edge_corners[e++] = {a, b};
    }
  }
  // Faces: fixed axis and side; order the four corners by angle around the
  // outward normal.
  int f = 0;
  for (int axis = 0; axis < 3; ++axis) {
    for (int side = 0; side < 2; ++side) {
      Vec3 normal = Vec3::Zero();
      normal[axis] = side ? 1.0 : -1.0;
      const Vec3 u = Vec3::Unit((axis + 1) % 3);
      const Vec3 v = normal.cross(u);
      std::vector<int> corners;
      for (int c = 0; c < 8; ++c) {
        if (((c >> axis) & 1) == side) corners.push_back(c);
      }
      const Vec3 center = Vec3::Constant(0.5);
      std::sort(corners.begin(), corners.end(), [&](int a, int b) {
        const Vec3 pa = corner_position(a) - center, pb = corner_position(b) - center;
        return std::atan2(pa.dot(v), pa.dot(u)) < std::atan2(pb.dot(v), pb.dot(u));
      });
      std::copy(corners.begin(), corners.end(), t.face_corners[f].begin());
      ++f;
    }
  }

  for (int config = 0; config < 256; ++config) {
    auto inside = [&](int c) { return (config >> c) & 1; };
    // Directed segments between edge crossings; each crossed edge has exactly
    // one outgoing segment.
    std::array<int, 12> next;
    next.fill(-1);
    for (const auto& face : t.face_corners) {
      // Walk the face counter-clockwise. A crossing that enters the inside
      // region is linked to the next crossing that leaves it, which keeps
      // diagonal inside corners apart on ambiguous faces.
      std::array<int, 4> order{};  // position of crossing along the walk
      std::array<int, 4> kind{};   // +1 entering, -1 leaving, 0 none
      for (int k = 0; k < 4; ++k) {
        const int a = face[k], b = face[(k + 1) % 4];
        order[k] = edge_between(t, a, b);
        kind[k] = inside(a) == inside(b) ? 0 : (inside(b) ? 1 : -1);
      }
      for (int k = 0; k < 4; ++k) {
        if (kind[k] != 1) continue;
        for (int s = 1; s < 4; ++s) {
          const int m = (k + s) % 4;
          if (kind[m] == -1) {
            // Entering -> leaving winds the loops so that fan triangles face
            // away from the inside corners.
            next[order[k]] = order[m];
            break;
          }
        }
      }
    }
    std::array<bool, 12> visited{};
    for (int start = 0; start < 12; ++start) {
      if (next[start] < 0 || visited[start]) continue;
      std::vector<int> loop;
      for (int cur = start; !visited[cur]; cur = next[cur]) {
        visited[cur] = true;
        loop.push_back(cur);
      }
      triangulate_loop(loop, t.triangles[config]);
    }
  }
  return t;
}

const CubeTopology& topology() {
  static const CubeTopology t = build_topology();
  return t;
}

}  // namespace

TriMesh marching_cubes(const ScalarGrid& grid, double iso) {
  if (grid.nx < 2 || grid.ny < 2 || grid.nz < 2) {
    throw ShapeError("marching cubes needs at least 2 samples per axis, got " + std::to_string(grid.nx) + "x" +
                     std::to_string(grid.ny) + "x" + std::to_string(grid.nz));
  }
  if (grid.values.size() != grid.size()) {
    throw ShapeError("grid has " + std::to_string(grid.values.size()) + " values, expected " +
                     std::to_string(grid.size()));
  }
  const CubeTopology& topo = topology();
  TriMesh mesh;
  std::unordered_map<std::size_t, int> vertex_of_edge;

  auto crossing = [&](int i, int j, int k, int a, int b) -> int {
    const int ia = i + (a & 1), ja = j + ((a >> 1) & 1), ka = k + ((a >> 2) & 1);
    const int ib = i + (b & 1), jb = j + ((b >> 1) & 1), kb = k + ((b >> 2) & 1);
    const int axis = (a ^ b) == 1 ? 0 : ((a ^ b) == 2 ? 1 : 2);
    // Corner a always has the lower coordinate along the edge axis.
    const std::size_t key = grid.index(ia, ja, ka) * 3 + static_cast<std::size_t>(axis);
    auto it = vertex_of_edge.find(key);
    if (it != vertex_of_edge.end()) return it->second;
    const double va = grid.at(ia, ja, ka), vb = grid.at(ib, jb, kb);
    const double t = (iso - va) / (vb - va);
    const Vec3 pa = grid.position(ia, ja, ka), pb = grid.position(ib, jb, kb);
    const int id = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(pa + t * (pb - pa));
    vertex_of_edge.emplace(key, id);
    return id;
  };

  for (int k = 0; k + 1 < grid.nz; ++k) {
    for (int j = 0; j + 1 < grid.ny; ++j) {
      for (int i = 0; i + 1 < grid.nx; ++i) {
        int config = 0;
        for (int c = 0; c < 8; ++c) {
          const double v = grid.at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
          if (!std::isfinite(v)) {
            throw NonFiniteError("non-finite grid value at cell (" + std::to_string(i) + ", " + std::to_string(j) +
                                 ", " + std::to_string(k) + ")");
          }
          if (v < iso) config |= 1 << c;
        }
        if (config == 0 || config == 255) continue;
        for (const auto& tri : topo.triangles[config]) {
          Face f;
          for (int m = 0; m < 3; ++m) {
            const auto& ec = topo.edge_corners[tri[m]];
            f[m] = crossing(i, j, k, ec[0], ec[1]);
          }
          mesh.faces.push_back(f);
        }
      }
    }
  }
  if (mesh.faces.empty()) return mesh;
  return cleanup(mesh);
}

}  // namespace cardioflow::geom
