#pragma once

#include <Eigen/Core>

#include <vector>

#include "cardioflow/edspace/ssm.hpp"
#include "cardioflow/geom/observation.hpp"
#include "cardioflow/geom/registration.hpp"

namespace cardioflow::inference {

/// World -> canonical map: the registration onto the mean shape (world to
/// atlas millimetres) followed by the normalization into [-1, 1]^3.
struct CanonicalFrame {
  geom::SimilarityTransform registration;
  edspace::NormalizationSpec normalization;

  geom::Vec3 to_canonical(const geom::Vec3& world) const {
    return normalization.apply(registration.apply(world));
  }
  geom::Vec3 to_world(const geom::Vec3& canonical) const {
    return registration.inverse().apply(normalization.invert(canonical));
  }
  geom::TriMesh to_world(const geom::TriMesh& canonical) const;
  geom::TriMesh to_canonical(const geom::TriMesh& world) const;
  /// Canonical units per world unit.
  double scale() const { return registration.scale() / normalization.scale; }
};

/// Contour points of the observed phases in canonical coordinates.
struct CanonicalObservation {
  int sequence_length = 0;
  std::vector<int> phases;              // observed phase indices, sorted
  std::vector<Eigen::MatrixXd> points;  // 3 x n per observed phase

  double tau(std::size_t k) const { return static_cast<double>(phases[k]) / sequence_length; }
};

/// Registers the end-diastolic (phase 0) contour points onto the mean shape
/// and returns the frame applied to the whole sequence. Throws
/// RegistrationError when phase 0 is not observed.
CanonicalFrame align_observation(const geom::SliceObservation& obs, const geom::TriMesh& mean_shape,
                                 const edspace::NormalizationSpec& normalization, bool rigid = false);

CanonicalObservation to_canonical(const geom::SliceObservation& obs, const CanonicalFrame& frame);

/// Keeps only the listed phases (which must be observed).
CanonicalObservation select_phases(const CanonicalObservation& obs, const std::vector<int>& phases);

}  // namespace cardioflow::inference
