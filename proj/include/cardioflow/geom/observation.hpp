#pragma once

#include <vector>

#include "cardioflow/geom/mesh.hpp"
#include "cardioflow/geom/slicing.hpp"

namespace cardioflow::geom {

/// Sparse contour observations of one cardiac sequence. `points` carries a
/// phase label and a slice label per point; slice labels index `planes`.
struct SliceObservation {
  PointCloud points;
  std::vector<Plane> planes;
  int sequence_length = 0;  // number of phases in the full cycle

  /// Sorted distinct phase indices present in the observation.
  std::vector<int> phases() const;
  PointCloud phase_points(int phase) const;
  double tau(int phase) const { return static_cast<double>(phase) / sequence_length; }

  /// Throws DatasetError for missing labels, out-of-range phases or slices.
  void validate() const;
};

}  // namespace cardioflow::geom
