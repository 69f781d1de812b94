#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cardioflow/geom/mesh.hpp"
#include "cardioflow/models/code_table.hpp"
#include "cardioflow/models/networks.hpp"
#include "cardioflow/training/losses.hpp"
#include "cardioflow/training/pretrain.hpp"

namespace cardioflow::training {

/// One subject's meshes in canonical coordinates, one per phase; phase 0 is
/// end-diastole.
struct TrainingSequence {
  std::string id;
  std::vector<geom::TriMesh> phases;
};

struct JointConfig {
  int epochs = 200;
  int groups_per_batch = 10;  // (subject, phase) groups per optimizer step
  int points_per_group = 64;
  SamplingConfig pool{3000, 500, {0.005, 0.03}};
  double lr_motion = 1e-3;
  double lr_shape = 1e-4;
  double lr_codes = 1e-3;
  int lr_decay_every = 0;
  double lr_decay_factor = 0.5;
  LossWeights weights;
  LossParams params;
  /// Weight of mean ||v||^2 at tau = 0 (pins end-diastole to the identity).
  double ed_identity_weight = 0.0;
  double code_init_std = 0.01;
  bool fine_tune_shape = true;
  models::MotionNetConfig motion;
  std::uint64_t seed = 0;
};

struct JointState {
  int epoch;
  const models::MotionNet& motion;
  const models::ShapeNet& shape;
  const models::CodeTable& codes;
};

using JointProgress = std::function<void(const EpochRecord&, const JointState&)>;

struct JointResult {
  models::MotionNet motion;
  models::ShapeNet shape;
  models::CodeTable codes;
  std::vector<EpochRecord> history;
  int epochs_completed = 0;
  bool diverged = false;
};

/// Throws DatasetError for empty or duplicate sequences and missing phases.
void validate_sequences(const std::vector<TrainingSequence>& sequences);

/// Trains the motion network, fine-tunes the shape network and fits one
/// shape code per sequence and one motion code per phase, on the weighted sum
/// of the SDF, displacement, distortion and code losses evaluated through the
/// composition shape(x + motion(x)).
JointResult train_joint(const std::vector<TrainingSequence>& sequences, const models::ShapeNet& shape,
                        const JointConfig& config, const JointProgress& progress = {});

/// Mean |composed sdf| at n exact surface samples of every phase mesh.
double sequence_surface_error(const models::MotionNet& motion, const models::ShapeNet& shape,
                              const models::CodeTable& codes, const TrainingSequence& sequence, int n,
                              std::uint64_t seed);

}  // namespace cardioflow::training
