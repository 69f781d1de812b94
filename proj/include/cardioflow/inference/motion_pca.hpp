#pragma once

#include <Eigen/Core>

#include <optional>
#include <utility>
#include <vector>

#include "cardioflow/edspace/pca.hpp"

namespace cardioflow::inference {

/// Linear model of whole-sequence motion codes. A sequence is flattened
/// phase by phase into a vector of length phases * code_dim.
struct MotionPca {
  edspace::Pca pca;
  int phases = 0;
  int code_dim = 0;

  int components() const { return static_cast<int>(pca.components()); }
  /// Unflattens a sequence vector into code_dim x phases.
  Eigen::MatrixXd reshape(const Eigen::VectorXd& flat) const;
  Eigen::VectorXd flatten(const Eigen::MatrixXd& codes) const;
};

/// sequences: code_dim x phases per training sequence. components < 0
/// selects the smallest count covering 95% of the variance. Throws
/// DatasetError for ragged sequences and ShapeError for components outside
/// [0, sequences - 1].
MotionPca build_motion_pca(const std::vector<Eigen::MatrixXd>& sequences, int components = -1,
                           double energy = 0.95);

/// Observation of the motion code at normalized time tau.
struct ObservedCode {
  double tau;
  Eigen::VectorXd code;
};

struct Interpolation {
  Eigen::MatrixXd codes;  // code_dim x phases
  Eigen::VectorXd coefficients;
  bool rank_deficient = false;
  bool low_confidence = false;  // fewer than two observations
};

/// Least-squares fit of the model coefficients to the observed codes, then
/// the full sequence mean + basis * coefficients. Observations at
/// fractional model phases (tau * phases) use rows interpolated linearly
/// between neighbouring phases. `centered` regresses observed codes minus
/// the mean rows; otherwise the raw codes are regressed (the mean is still
/// added back). The misfit at each observation is spread over the unobserved
/// phases by linear interpolation in tau (cyclic) between the neighbouring
/// observations, so the sequence has no step next to an observed phase. Rows
/// of observations that fall on a model phase are then set to the observed
/// codes exactly.
Interpolation interpolate_motion(const MotionPca& pca, const std::vector<ObservedCode>& observed,
                                 bool centered = true);

/// End-diastole plus optional end-systole codes; without the latter the fit
/// falls back to the single observation and is flagged low-confidence.
Interpolation interpolate_two_phase(const MotionPca& pca, const Eigen::VectorXd& ed_code,
                                    const std::optional<Eigen::VectorXd>& es_code, int es_phase,
                                    bool centered = true);

/// Resamples a code sequence of any length to `phases` columns by linear
/// interpolation in tau (the cycle wraps from the last phase to phase 0).
Eigen::MatrixXd resample_codes(const Eigen::MatrixXd& codes, int phases);

}  // namespace cardioflow::inference
