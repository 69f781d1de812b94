#include "cardioflow/inference/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cardioflow/error.hpp"

namespace cardioflow::inference {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;

namespace {

void evaluate(const FieldFunction& field, geom::ScalarGrid& grid, const std::vector<std::size_t>& which, int batch) {
  for (std::size_t b0 = 0; b0 < which.size(); b0 += static_cast<std::size_t>(batch)) {
    const std::size_t n = std::min(static_cast<std::size_t>(batch), which.size() - b0);
    MatrixXd pts(3, static_cast<Index>(n));
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t id = which[b0 + t];
      const int i = static_cast<int>(id % static_cast<std::size_t>(grid.nx));
      const int j = static_cast<int>((id / static_cast<std::size_t>(grid.nx)) % static_cast<std::size_t>(grid.ny));
      const int k = static_cast<int>(id / (static_cast<std::size_t>(grid.nx) * static_cast<std::size_t>(grid.ny)));
      pts.col(static_cast<Index>(t)) = grid.position(i, j, k);
    }
    const RowVectorXd v = field(pts);
    if (v.size() != static_cast<Index>(n)) throw ShapeError("field returned the wrong number of values");
    for (std::size_t t = 0; t < n; ++t) grid.values[which[b0 + t]] = v[static_cast<Index>(t)];
  }
}

}  // namespace

geom::ScalarGrid sample_field(const FieldFunction& field, const ExtractionOptions& options) {
  if (options.grid_res < 2) throw ConfigError("grid resolution must be at least 2");
  if (options.batch < 1 || !(options.band_factor > 0.0)) throw ConfigError("bad extraction options");
  const geom::Vec3 lo = geom::Vec3::Constant(-1.0), hi = geom::Vec3::Constant(1.0);

  // Resolution ladder ending at grid_res; each level about doubles the cells.
  std::vector<int> levels{options.grid_res};
  while (levels.back() > std::max(2, options.coarse_res)) {
    const int cells = levels.back() - 1;
    if (cells < 2 * (std::max(2, options.coarse_res) - 1)) break;
    levels.push_back((cells + 1) / 2 + 1);
  }
  std::reverse(levels.begin(), levels.end());

  geom::ScalarGrid prev = geom::ScalarGrid::cube(levels.front(), lo, hi);
  std::vector<std::size_t> all(prev.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  evaluate(field, prev, all, options.batch);
  for (std::size_t l = 1; l < levels.size(); ++l) {
    geom::ScalarGrid grid = geom::ScalarGrid::cube(levels[l], lo, hi);
    const double band = options.band_factor * prev.spacing.norm();
    std::vector<std::size_t> refine;
    for (int k = 0; k < grid.nz; ++k)
      for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
          const double v = prev.interpolate(grid.position(i, j, k));
          grid.at(i, j, k) = v;
          if (std::abs(v) < band) refine.push_back(grid.index(i, j, k));
        }
    evaluate(field, grid, refine, options.batch);
    prev = std::move(grid);
  }
  return prev;
}

namespace {

geom::TriMesh extract(const FieldFunction& f, const ExtractionOptions& options, bool* empty) {
  const geom::ScalarGrid grid = sample_field(f, options);
  geom::TriMesh mesh = geom::marching_cubes(grid, 0.0);
  if (empty) *empty = mesh.empty();
  return mesh;
}

}  // namespace

geom::TriMesh reconstruct_phase(const models::MotionNet& motion, const models::ShapeNet& shape,
                                const Eigen::VectorXd& motion_code, const Eigen::VectorXd& shape_code, double tau,
                                const ExtractionOptions& options, bool* empty) {
  const models::ComposedSdf composed(motion, shape);
  return extract(
      [&](const MatrixXd& x) {
        const Index n = x.cols();
        return composed.forward(motion_code.replicate(1, n), shape_code.replicate(1, n), x,
                                RowVectorXd::Constant(n, tau));
      },
      options, empty);
}

geom::TriMesh reconstruct_shape(const models::ShapeNet& shape, const Eigen::VectorXd& shape_code,
                                const ExtractionOptions& options, bool* empty) {
  return extract([&](const MatrixXd& x) { return shape.forward(shape_code.replicate(1, x.cols()), x); }, options,
                 empty);
}

}  // namespace cardioflow::inference
