#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cardioflow/edspace/ssm.hpp"
#include "cardioflow/geom/observation.hpp"
#include "cardioflow/geom/registration.hpp"

namespace cardioflow::synth {

using geom::TriMesh;
using geom::Vec3;

/// Thick truncated ellipsoidal cup with its long axis on z, apex at
/// z = -semi_axes.z(), cut by the plane z = base_height. Lengths in mm.
struct SubjectParams {
  Vec3 semi_axes{27.0, 25.0, 67.0};  // outer surface
  double base_thickness = 9.5;       // wall thickness at the equator
  double apex_thickness = 7.5;
  double base_height = 16.0;  // z of the truncation plane
  double contraction = 0.15;  // in-plane radial shrink at end-systole, in [0, 0.5]
  double twist = 0.0;         // rotation (rad) of the base relative to the apex at end-systole
  int phases = 25;
  int rings = 24;    // latitude rings per surface
  int sectors = 48;  // samples around the long axis

  /// Throws DatasetError for parameter combinations that would give an
  /// invalid or self-intersecting shell.
  void validate() const;
};

/// Ranges used for random subjects.
struct ParamRanges {
  double semi_x[2] = {24.0, 30.0};
  double semi_y[2] = {22.0, 28.0};
  double semi_z[2] = {62.0, 72.0};
  double base_thickness[2] = {8.0, 11.0};
  double apex_thickness[2] = {6.0, 9.0};
  double base_fraction[2] = {0.2, 0.3};  // base_height / semi_z
  double contraction[2] = {0.1, 0.2};
  double twist[2] = {0.0, 0.03};
};

SubjectParams sample_params(Rng& rng, const ParamRanges& ranges = {});

/// End-systolic phase index: round(0.35 * phases).
int es_phase(int phases);

/// Contraction weight in [0, 1]: raised-cosine rise from 0 at phase 0 to 1
/// at end-systole, then a raised-cosine fall that would reach 0 at
/// t = phases.
double contraction_weight(double t, int phases);

/// Analytic motion of the generator: in-plane scaling about the long axis
/// by 1 - contraction * w(t) and a twist growing linearly from apex to base.
/// z is unchanged.
class ContractionMap {
 public:
  explicit ContractionMap(const SubjectParams& params);
  Vec3 forward(const Vec3& ed_point, double t) const;
  Vec3 inverse(const Vec3& point, double t) const;

 private:
  double angle(double z, double t) const;
  SubjectParams params_;
};

/// End-diastolic shell (watertight, outward oriented).
TriMesh ed_mesh(const SubjectParams& params);

struct Subject {
  SubjectParams params;
  std::vector<TriMesh> phases;  // phase t = ContractionMap::forward(ed, t)

  ContractionMap motion() const { return ContractionMap(params); }
};

Subject generate_subject(const SubjectParams& params);

/// n end-diastolic shells with randomly drawn parameters, sharing topology.
edspace::Atlas make_atlas(int n, std::uint64_t seed, const ParamRanges& ranges = {});

struct CmrOptions {
  int sax_slices = 9;
  double sax_spacing = 10.0;     // mm
  double first_slice_offset = 4.0;  // mm below the base plane
  int lax_slices = 0;            // planes containing the long axis, 0, 2 or 3
  double point_spacing = 2.0;    // mm between contour samples
  double noise = 0.0;            // Gaussian noise std (mm)
  std::uint64_t seed = 0;
  /// Rigid pose from the subject frame into scanner coordinates.
  std::optional<geom::SimilarityTransform> pose;
};

/// Short-axis (and optional long-axis) contours at every phase.
geom::SliceObservation make_cmr_observations(const Subject& subject, const CmrOptions& options = {});

/// Dense short-axis slicing (1 mm) at the end-diastolic and end-systolic
/// phases only.
geom::SliceObservation make_ct_observations(const Subject& subject, const CmrOptions& options = {});

/// Short-axis planes used by make_cmr_observations, in the subject frame.
std::vector<geom::Plane> sax_planes(const SubjectParams& params, int count, double spacing, double offset);

}  // namespace cardioflow::synth
