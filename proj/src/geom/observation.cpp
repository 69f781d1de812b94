#include "cardioflow/geom/observation.hpp"

#include <algorithm>
#include <set>

#include "cardioflow/error.hpp"

namespace cardioflow::geom {

std::vector<int> SliceObservation::phases() const {
  std::set<int> s(points.phase.begin(), points.phase.end());
  return {s.begin(), s.end()};
}

PointCloud SliceObservation::phase_points(int phase) const {
  PointCloud out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points.phase[i] != phase) continue;
    out.points.push_back(points.points[i]);
    out.phase.push_back(phase);
    if (points.has_slice()) out.slice.push_back(points.slice[i]);
  }
  return out;
}

void SliceObservation::validate() const {
  if (sequence_length < 1) throw DatasetError("observation sequence length must be positive");
  if (points.empty()) throw DatasetError("observation has no contour points");
  if (points.phase.size() != points.size()) throw DatasetError("every observed point needs a phase label");
  if (points.has_slice() && points.slice.size() != points.size()) {
    throw DatasetError("slice labels must cover every point");
  }
  for (int p : points.phase) {
    if (p < 0 || p >= sequence_length) {
      throw DatasetError("phase " + std::to_string(p) + " outside [0, " + std::to_string(sequence_length) + ")");
    }
  }
  if (!planes.empty()) {
    for (int s : points.slice) {
      if (s < 0 || s >= static_cast<int>(planes.size())) {
        throw DatasetError("slice label " + std::to_string(s) + " has no plane");
      }
    }
  }
}

}  // namespace cardioflow::geom
