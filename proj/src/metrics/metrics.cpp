#include "cardioflow/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cardioflow/error.hpp"
#include "cardioflow/geom/kd_tree.hpp"

namespace cardioflow::metrics {

using geom::Vec3;

double directed_mean_distance(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  if (from.empty() || to.empty()) throw DegenerateInputError("distance between empty point clouds");
  const geom::KdTree tree(to);
  double sum = 0.0;
  for (const Vec3& p : from) sum += std::sqrt(tree.nearest(p).squared_distance);
  return sum / static_cast<double>(from.size());
}

double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  return directed_mean_distance(a, b) + directed_mean_distance(b, a);
}

std::vector<std::size_t> subsample_indices(std::size_t size, std::size_t n, std::uint64_t seed) {
  if (n > size) throw ConfigError("cannot draw " + std::to_string(n) + " of " + std::to_string(size) + " points");
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed, "emd.subsample");
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, size - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  return idx;
}

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw ShapeError("assignment needs a square cost matrix");
  const int n = static_cast<int>(cost.rows());
  if (n == 0) return {};
  // Potentials formulation (1-based, column 0 is a sentinel).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) assignment[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return assignment;
}

double emd(const std::vector<Vec3>& a, const std::vector<Vec3>& b, std::size_t n_sub, std::uint64_t seed) {
  if (n_sub == 0) throw ConfigError("EMD subsample size must be positive");
  if (a.empty() || b.empty()) throw DegenerateInputError("EMD of an empty point cloud");
  const auto ia = subsample_indices(a.size(), n_sub, seed);
  const auto ib = subsample_indices(b.size(), n_sub, seed);
  const auto n = static_cast<Eigen::Index>(n_sub);
  Eigen::MatrixXd cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = (a[ia[static_cast<std::size_t>(i)]] - b[ib[static_cast<std::size_t>(j)]]).norm();
  const auto match = hungarian(cost);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) sum += cost(i, match[static_cast<std::size_t>(i)]);
  return sum / static_cast<double>(n);
}

std::size_t SliceMask::count() const {
  return static_cast<std::size_t>(std::count_if(inside.begin(), inside.end(), [](std::uint8_t b) { return b != 0; }));
}

void SliceMask::validate() const {
  if (rows < 1 || cols < 1) throw ConfigError("slice mask needs at least one pixel");
  if (!(spacing > 0.0)) throw ConfigError("slice mask spacing must be positive");
  if (inside.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw ConfigError("slice mask pixel count mismatch");
  }
  if (std::abs(u.norm() - 1.0) > 1e-9 || std::abs(v.norm() - 1.0) > 1e-9 || std::abs(u.dot(v)) > 1e-9) {
    throw ConfigError("slice mask axes must be orthonormal");
  }
}

SliceMask make_mask(const Vec3& center, const Vec3& normal, double half, double spacing) {
  if (!(spacing > 0.0) || !(half > 0.0)) throw ConfigError("mask extent and spacing must be positive");
  const Vec3 n = normal.normalized();
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  SliceMask m;
  m.u = (helper - helper.dot(n) * n).normalized();
  m.v = n.cross(m.u);
  m.spacing = spacing;
  m.cols = m.rows = static_cast<int>(std::ceil(2.0 * half / spacing));
  m.origin = center - 0.5 * m.cols * spacing * m.u - 0.5 * m.rows * spacing * m.v;
  m.inside.assign(static_cast<std::size_t>(m.rows) * static_cast<std::size_t>(m.cols), 0);
  return m;
}

SliceMask rasterize(const geom::TriMesh& mesh, const SliceMask& frame) {
  SliceMask out = frame;
  out.inside.assign(static_cast<std::size_t>(frame.rows) * static_cast<std::size_t>(frame.cols), 0);
  out.validate();
  const auto contours = geom::intersect_plane(mesh, frame.plane());
  // Segments in pixel coordinates.
  struct Seg {
    double x0, y0, x1, y1;
  };
  std::vector<Seg> segs;
  for (const auto& c : contours) {
    const std::size_t n = c.points.size();
    if (n < 2) continue;
    const std::size_t m = c.closed ? n : n - 1;
    for (std::size_t i = 0; i < m; ++i) {
      const Vec3 a = c.points[i] - frame.origin, b = c.points[(i + 1) % n] - frame.origin;
      segs.push_back({a.dot(frame.u) / frame.spacing, a.dot(frame.v) / frame.spacing, b.dot(frame.u) / frame.spacing,
                      b.dot(frame.v) / frame.spacing});
    }
  }
  // Even-odd scanline fill at pixel centres.
  std::vector<double> xs;
  for (int r = 0; r < frame.rows; ++r) {
    const double y = r + 0.5;
    xs.clear();
    for (const Seg& s : segs) {
      if ((s.y0 <= y) == (s.y1 <= y)) continue;
      xs.push_back(s.x0 + (y - s.y0) / (s.y1 - s.y0) * (s.x1 - s.x0));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int c0 = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
      const int c1 = std::min(frame.cols - 1, static_cast<int>(std::floor(xs[k + 1] - 0.5)));
      for (int c = c0; c <= c1; ++c) out.inside[static_cast<std::size_t>(r) * frame.cols + c] = 1;
    }
  }
  return out;
}

namespace {

std::vector<Eigen::Vector2d> boundary_pixels(const SliceMask& m) {
  std::vector<Eigen::Vector2d> out;
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      if (!m.at(r, c)) continue;
      const bool edge = r == 0 || c == 0 || r == m.rows - 1 || c == m.cols - 1 || !m.at(r - 1, c) || !m.at(r + 1, c) ||
                        !m.at(r, c - 1) || !m.at(r, c + 1);
      if (edge) out.emplace_back(c, r);
    }
  return out;
}

std::vector<double> directed_distances(const std::vector<Eigen::Vector2d>& from, const std::vector<Eigen::Vector2d>& to) {
  std::vector<Vec3> pts;
  pts.reserve(to.size());
  for (const auto& p : to) pts.emplace_back(p.x(), p.y(), 0.0);
  const geom::KdTree tree(pts);
  std::vector<double> d;
  d.reserve(from.size());
  for (const auto& p : from) d.push_back(std::sqrt(tree.nearest(Vec3(p.x(), p.y(), 0.0)).squared_distance));
  return d;
}

}  // namespace

DiceHausdorff compare_masks(const SliceMask& a, const SliceMask& b, double percentile) {
  a.validate();
  b.validate();
  if (a.rows != b.rows || a.cols != b.cols) throw ShapeError("masks differ in size");
  if (!(percentile > 0.0 && percentile <= 100.0)) throw ConfigError("percentile must be in (0, 100]");
  DiceHausdorff out;
  const std::size_t na = a.count(), nb = b.count();
  std::size_t both = 0;
  for (std::size_t i = 0; i < a.inside.size(); ++i) both += (a.inside[i] && b.inside[i]) ? 1 : 0;
  out.dice = na + nb > 0 ? 2.0 * static_cast<double>(both) / static_cast<double>(na + nb) : 0.0;
  if (na == 0 || nb == 0) {
    out.empty = true;
    out.hausdorff = std::hypot(a.rows, a.cols) * a.spacing;
    return out;
  }
  const auto ba = boundary_pixels(a), bb = boundary_pixels(b);
  std::vector<double> d = directed_distances(ba, bb);
  const std::vector<double> d2 = directed_distances(bb, ba);
  if (percentile >= 100.0) {
    out.hausdorff = std::max(*std::max_element(d.begin(), d.end()), *std::max_element(d2.begin(), d2.end()));
  } else {
    d.insert(d.end(), d2.begin(), d2.end());
    std::sort(d.begin(), d.end());
    const auto k = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(d.size()))) - 1;
    out.hausdorff = d[std::min(k, d.size() - 1)];
  }
  out.hausdorff *= a.spacing;
  return out;
}

DiceHausdorff dice_hausdorff(const geom::TriMesh& pred, const SliceMask& gt, double percentile) {
  return compare_masks(rasterize(pred, gt), gt, percentile);
}

double signed_volume(const geom::TriMesh& mesh) {
  double v = 0.0;
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(f[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(f[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(f[2])];
    v += a.dot(b.cross(c));
  }
  return v / 6.0;
}

VolumeCurve volume_curve(const std::vector<geom::TriMesh>& meshes) {
  VolumeCurve out;
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    if (!geom::is_watertight(meshes[i])) {
      throw GeometryError("mesh " + std::to_string(i) + " is not watertight; its volume is undefined");
    }
    const double v = signed_volume(meshes[i]);
    out.volumes.push_back(v);
    out.negative.push_back(v < 0.0);
  }
  return out;
}

double ejection_fraction(const std::vector<double>& volumes) {
  if (volumes.empty()) throw DegenerateInputError("empty volume curve");
  const auto [lo, hi] = std::minmax_element(volumes.begin(), volumes.end());
  return *hi > 0.0 ? (*hi - *lo) / *hi : 0.0;
}

}  // namespace cardioflow::metrics
