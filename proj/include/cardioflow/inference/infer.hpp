#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "cardioflow/inference/align.hpp"
#include "cardioflow/models/networks.hpp"
#include "cardioflow/training/losses.hpp"

namespace cardioflow::inference {

struct InferenceConfig {
  int iterations = 400;
  double lr = 5e-3;
  int lr_decay_every = 200;  // iterations, 0 disables
  double lr_decay_factor = 0.5;
  int points_per_phase = 64;  // contour points drawn per phase and iteration
  bool regularize_motion = true;  // displacement and distortion terms
  training::LossWeights weights;
  training::LossParams params;
  double code_init_std = 0.01;
  std::uint64_t seed = 0;
};

struct InferredCodes {
  Eigen::VectorXd shape;
  std::vector<int> phases;  // observed phase indices
  Eigen::MatrixXd motion;   // one column per observed phase
  int sequence_length = 0;
  std::vector<double> loss;  // per iteration
  double mean_abs_sdf = 0.0;  // over all contour points after the last step
  bool diverged = false;

  Eigen::VectorXd motion_code(int phase) const;  // throws when not observed
};

/// Fits one shape code and one motion code per observed phase so that the
/// composed field vanishes on the contour points; network weights stay fixed.
InferredCodes infer_codes(const CanonicalObservation& obs, const models::MotionNet& motion,
                          const models::ShapeNet& shape, const InferenceConfig& config);

/// Mean |composed sdf| over all points of the observation.
double observation_residual(const CanonicalObservation& obs, const models::MotionNet& motion,
                            const models::ShapeNet& shape, const Eigen::VectorXd& shape_code,
                            const Eigen::MatrixXd& motion_codes);

}  // namespace cardioflow::inference
