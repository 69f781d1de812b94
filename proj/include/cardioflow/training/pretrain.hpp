#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

#include "cardioflow/diff/adam.hpp"
#include "cardioflow/geom/mesh.hpp"
#include "cardioflow/models/networks.hpp"
#include "cardioflow/training/sampling.hpp"

namespace cardioflow::training {

/// Adam over a set of latent codes where only the codes present in a batch
/// are updated (each keeps its own moments and step count).
class SparseCodeAdam {
 public:
  SparseCodeAdam() = default;
  SparseCodeAdam(std::size_t count, Eigen::Index dim);
  void step(std::size_t which, double* code, const Eigen::VectorXd& grad, double lr);

 private:
  Eigen::Index dim_ = 0;
  std::vector<diff::AdamState> states_;
};

/// Learning rate after the step-decay schedule lr * factor^floor(epoch / every).
double decayed_lr(double lr, int epoch, int every, double factor);

struct PretrainConfig {
  int epochs = 2000;
  int shapes_per_batch = 10;
  int points_per_shape = 40;
  SamplingConfig pool;  // per-shape sample pool drawn once up front
  double lr_weights = 5e-4;
  double lr_codes = 1e-3;
  int lr_decay_every = 500;  // epochs, 0 disables
  double lr_decay_factor = 0.5;
  double clamp = 0.1;
  double code_weight = 1e-4;
  double code_init_std = 0.01;
  models::ShapeNetConfig network;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double sdf = 0.0;
  double pointwise = 0.0;
  double pairwise = 0.0;
  double code = 0.0;
};

struct PretrainResult {
  models::ShapeNet net;
  Eigen::MatrixXd codes;  // code_dim x shapes
  std::vector<EpochRecord> history;
  int epochs_completed = 0;
  bool diverged = false;
};

using PretrainProgress = std::function<void(const EpochRecord&)>;

/// Auto-decoder training of the shape network and one code per shape on the
/// clamped SDF loss plus the code-norm penalty. `shapes` are in canonical
/// coordinates. On a non-finite loss or gradient the result holds the state
/// at the end of the last finite epoch and `diverged` is set.
PretrainResult pretrain_shape(const std::vector<geom::TriMesh>& shapes, const PretrainConfig& config,
                              const PretrainProgress& progress = {});

/// Same starting from a given network (warm start); codes start random.
PretrainResult pretrain_shape(const std::vector<geom::TriMesh>& shapes, const models::ShapeNet& init,
                              const PretrainConfig& config, const PretrainProgress& progress = {});

/// Mean |sdf| of the network at n exact surface samples of `mesh`.
double surface_error(const models::ShapeNet& net, const Eigen::VectorXd& code, const geom::TriMesh& mesh, int n,
                     std::uint64_t seed);

}  // namespace cardioflow::training
