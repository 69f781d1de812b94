#include "cardioflow/inference/align.hpp"

#include <algorithm>

#include "cardioflow/error.hpp"

namespace cardioflow::inference {

geom::TriMesh CanonicalFrame::to_world(const geom::TriMesh& canonical) const {
  geom::TriMesh out = canonical;
  const geom::SimilarityTransform inv = registration.inverse();
  for (auto& v : out.vertices) v = inv.apply(normalization.invert(v));
  return out;
}

geom::TriMesh CanonicalFrame::to_canonical(const geom::TriMesh& world) const {
  geom::TriMesh out = world;
  for (auto& v : out.vertices) v = to_canonical(v);
  return out;
}

CanonicalFrame align_observation(const geom::SliceObservation& obs, const geom::TriMesh& mean_shape,
                                 const edspace::NormalizationSpec& normalization, bool rigid) {
  obs.validate();
  const geom::PointCloud ed = obs.phase_points(0);
  if (ed.empty()) throw RegistrationError("no end-diastolic (phase 0) contour points to register");
  geom::RegistrationOptions options;
  options.rigid = rigid;
  geom::RegistrationResult r;
  try {
    r = geom::register_similarity(ed, mean_shape, options);
  } catch (const DegenerateInputError& e) {
    throw RegistrationError(std::string("end-diastolic contours cannot be registered: ") + e.what());
  }
  return CanonicalFrame{r.transform, normalization};
}

CanonicalObservation to_canonical(const geom::SliceObservation& obs, const CanonicalFrame& frame) {
  obs.validate();
  CanonicalObservation out;
  out.sequence_length = obs.sequence_length;
  out.phases = obs.phases();
  for (int p : out.phases) {
    const geom::PointCloud pc = obs.phase_points(p);
    Eigen::MatrixXd m(3, static_cast<Eigen::Index>(pc.size()));
    for (std::size_t i = 0; i < pc.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = frame.to_canonical(pc.points[i]);
    out.points.push_back(std::move(m));
  }
  return out;
}

CanonicalObservation select_phases(const CanonicalObservation& obs, const std::vector<int>& phases) {
  CanonicalObservation out;
  out.sequence_length = obs.sequence_length;
  std::vector<int> sorted = phases;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (int p : sorted) {
    const auto it = std::find(obs.phases.begin(), obs.phases.end(), p);
    if (it == obs.phases.end()) throw DatasetError("phase " + std::to_string(p) + " is not observed");
    out.phases.push_back(p);
    out.points.push_back(obs.points[static_cast<std::size_t>(it - obs.phases.begin())]);
  }
  return out;
}

}  // namespace cardioflow::inference
