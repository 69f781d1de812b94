#include "cardioflow/training/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cardioflow/error.hpp"
#include "cardioflow/training/losses.hpp"

namespace cardioflow::training {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

SparseCodeAdam::SparseCodeAdam(std::size_t count, Index dim) : dim_(dim) {
  states_.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    diff::AdamState s;
    s.first_moment.push_back(VectorXd::Zero(dim));
    s.second_moment.push_back(VectorXd::Zero(dim));
    states_.push_back(std::move(s));
  }
}

void SparseCodeAdam::step(std::size_t which, double* code, const VectorXd& grad, double lr) {
  if (which >= states_.size() || grad.size() != dim_) throw ShapeError("code optimizer: bad code index or size");
  const diff::ParamBlock block{"code" + std::to_string(which), {code, static_cast<std::size_t>(dim_)}};
  const std::span<const double> g(grad.data(), static_cast<std::size_t>(dim_));
  diff::adam_step(std::span<const diff::ParamBlock>(&block, 1), std::span<const std::span<const double>>(&g, 1),
                  states_[which], lr);
}

double decayed_lr(double lr, int epoch, int every, double factor) {
  if (every <= 0) return lr;
  return lr * std::pow(factor, epoch / every);
}

namespace {

void check_config(const PretrainConfig& c, std::size_t shapes) {
  if (shapes < 1) throw DatasetError("pre-training needs at least one shape");
  if (c.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (c.shapes_per_batch < 1 || c.points_per_shape < 1) throw ConfigError("batch sizes must be positive");
  if (c.pool.surface + c.pool.uniform < 1) throw ConfigError("sample pool is empty");
  if (!(c.lr_weights >= 0.0 && c.lr_codes >= 0.0)) throw ConfigError("learning rates must be non-negative");
}

}  // namespace

PretrainResult pretrain_shape(const std::vector<geom::TriMesh>& shapes, const PretrainConfig& config,
                              const PretrainProgress& progress) {
  Rng init = make_rng(config.seed, "init.shape");
  return pretrain_shape(shapes, models::ShapeNet(config.network, init), config, progress);
}

PretrainResult pretrain_shape(const std::vector<geom::TriMesh>& shapes, const models::ShapeNet& init_net,
                              const PretrainConfig& config, const PretrainProgress& progress) {
  check_config(config, shapes.size());
  const std::size_t n_shapes = shapes.size();
  const Index k = init_net.code_dim();

  std::vector<SampleBatch> pools;
  pools.reserve(n_shapes);
  for (std::size_t s = 0; s < n_shapes; ++s) {
    pools.push_back(sample_training_points(shapes[s], config.pool,
                                           derive_seed(config.seed, "pretrain.pool." + std::to_string(s))));
  }

  PretrainResult result{init_net, MatrixXd(k, static_cast<Index>(n_shapes)), {}, 0, false};
  {
    Rng code_rng = make_rng(config.seed, "init.codes");
    std::normal_distribution<double> normal(0.0, config.code_init_std);
    for (Index j = 0; j < result.codes.cols(); ++j)
      for (Index i = 0; i < k; ++i) result.codes(i, j) = normal(code_rng);
  }

  models::ShapeNet net = result.net;
  MatrixXd codes = result.codes;
  std::vector<diff::ParamBlock> params = net.net().parameter_blocks();
  diff::AdamState adam = diff::make_adam_state(params);
  SparseCodeAdam code_adam(n_shapes, k);
  diff::NetGradients grads = net.net().zero_gradients();
  Rng rng = make_rng(config.seed, "pretrain.batches");

  std::vector<std::size_t> order(n_shapes);
  std::iota(order.begin(), order.end(), 0);
  const auto per_batch = static_cast<std::size_t>(config.shapes_per_batch);
  const Index pts = config.points_per_shape;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr_w = decayed_lr(config.lr_weights, epoch, config.lr_decay_every, config.lr_decay_factor);
    const double lr_c = decayed_lr(config.lr_codes, epoch, config.lr_decay_every, config.lr_decay_factor);
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec{epoch + 1};
    std::size_t batches = 0;
    bool bad = false;
    for (std::size_t b0 = 0; b0 < n_shapes && !bad; b0 += per_batch) {
      const std::size_t nb = std::min(per_batch, n_shapes - b0);
      const Index cols = static_cast<Index>(nb) * pts;
      MatrixXd batch_codes(k, cols), points(3, cols);
      RowVectorXd gt(cols);
      for (std::size_t s = 0; s < nb; ++s) {
        const std::size_t shape = order[b0 + s];
        const SampleBatch& pool = pools[shape];
        std::uniform_int_distribution<Index> pick(0, pool.size() - 1);
        for (Index p = 0; p < pts; ++p) {
          const Index c = static_cast<Index>(s) * pts + p, i = pick(rng);
          points.col(c) = pool.points.col(i);
          gt[c] = pool.gt_sdf[i];
          batch_codes.col(c) = codes.col(static_cast<Index>(shape));
        }
      }
      models::ShapeNet::Trace trace;
      const RowVectorXd pred = net.forward(batch_codes, points, trace);
      RowVectorXd dpred;
      const double l_sdf = loss_sdf(pred, gt, config.clamp, &dpred);
      double reg = 0.0;
      for (std::size_t s = 0; s < nb; ++s) reg += codes.col(static_cast<Index>(order[b0 + s])).norm();
      reg /= static_cast<double>(nb);
      const double loss = l_sdf + config.code_weight * reg;
      if (!std::isfinite(loss)) {
        bad = true;
        break;
      }
      grads.set_zero();
      MatrixXd dcodes;
      net.backward(trace, dpred, &grads, &dcodes, nullptr);
      try {
        diff::adam_step(params, grads.blocks(), adam, lr_w);
        for (std::size_t s = 0; s < nb; ++s) {
          const auto shape = static_cast<Index>(order[b0 + s]);
          VectorXd g = dcodes.middleCols(static_cast<Index>(s) * pts, pts).rowwise().sum();
          g += config.code_weight / static_cast<double>(nb) * norm_gradient(codes.col(shape));
          code_adam.step(static_cast<std::size_t>(shape), codes.col(shape).data(), g, lr_c);
        }
      } catch (const NonFiniteError&) {
        bad = true;
        break;
      }
      rec.loss += loss;
      rec.sdf += l_sdf;
      rec.code += reg;
      ++batches;
    }
    if (bad) {
      result.diverged = true;
      break;
    }
    rec.loss /= static_cast<double>(batches);
    rec.sdf /= static_cast<double>(batches);
    rec.code /= static_cast<double>(batches);
    result.history.push_back(rec);
    result.epochs_completed = epoch + 1;
    result.net = net;
    result.codes = codes;
    if (progress) progress(rec);
  }
  return result;
}

double surface_error(const models::ShapeNet& net, const VectorXd& code, const geom::TriMesh& mesh, int n,
                     std::uint64_t seed) {
  const MatrixXd pts = surface_points(mesh, n, seed);
  return net.forward(code.replicate(1, n), pts).cwiseAbs().mean();
}

}  // namespace cardioflow::training
