#include "cardioflow/geom/signed_distance.hpp"

#include <cmath>

#include "cardioflow/error.hpp"
#include "cardioflow/parallel.hpp"

namespace cardioflow::geom {

namespace {
const TriMesh& require_watertight(const TriMesh& mesh) {
  if (!is_watertight(mesh)) {
    throw GeometryError("signed distance needs a watertight mesh: some edge is not shared by exactly two faces, "
                        "so inside/outside is undefined");
  }
  return mesh;
}
}  // namespace

SignedDistanceField::SignedDistanceField(const TriMesh& mesh) : tree_(require_watertight(mesh)) {}

double SignedDistanceField::operator()(const Vec3& p) const {
  const ClosestPoint cp = tree_.closest(p);
  const double d = std::sqrt(cp.squared_distance);
  if (d == 0.0) return 0.0;
  return tree_.winding_number(p) > 0.5 ? -d : d;
}

std::vector<double> SignedDistanceField::evaluate(const std::vector<Vec3>& points) const {
  std::vector<double> out(points.size());
  parallel_for(points.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = (*this)(points[i]);
  });
  return out;
}

double signed_distance(const TriMesh& mesh, const Vec3& query) { return SignedDistanceField(mesh)(query); }

}  // namespace cardioflow::geom
