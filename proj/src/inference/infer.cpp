#include "cardioflow/inference/infer.hpp"

#include <algorithm>
#include <cmath>

#include "cardioflow/error.hpp"
#include "cardioflow/training/pretrain.hpp"

namespace cardioflow::inference {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

VectorXd InferredCodes::motion_code(int phase) const {
  const auto it = std::find(phases.begin(), phases.end(), phase);
  if (it == phases.end()) throw DatasetError("no motion code for phase " + std::to_string(phase));
  return motion.col(it - phases.begin());
}

InferredCodes infer_codes(const CanonicalObservation& obs, const models::MotionNet& motion,
                          const models::ShapeNet& shape, const InferenceConfig& config) {
  if (obs.phases.empty()) throw DatasetError("observation has no phases");
  if (obs.points.size() != obs.phases.size()) throw ShapeError("observation phases and point sets differ");
  if (config.iterations < 0 || config.points_per_phase < 2) throw ConfigError("bad inference iteration settings");
  for (const auto& p : obs.points)
    if (p.cols() == 0) throw DatasetError("observed phase without contour points");

  const Index km = motion.code_dim(), ks = shape.code_dim();
  const auto n_phases = static_cast<Index>(obs.phases.size());
  InferredCodes out;
  out.phases = obs.phases;
  out.sequence_length = obs.sequence_length;
  Rng init = make_rng(config.seed, "inference.codes");
  std::normal_distribution<double> normal(0.0, config.code_init_std);
  out.shape.resize(ks);
  for (auto& v : out.shape) v = normal(init);
  out.motion.resize(km, n_phases);
  for (auto& v : out.motion.reshaped()) v = normal(init);

  training::SparseCodeAdam shape_adam(1, ks), motion_adam(static_cast<std::size_t>(n_phases), km);
  Rng rng = make_rng(config.seed, "inference.batches");
  const Index pts = config.points_per_phase;
  const Index cols = pts * n_phases;
  const training::LossWeights& w = config.weights;
  VectorXd best_shape = out.shape;
  MatrixXd best_motion = out.motion;

  for (int it = 0; it < config.iterations; ++it) {
    const double lr = training::decayed_lr(config.lr, it, config.lr_decay_every, config.lr_decay_factor);
    MatrixXd x(3, cols), mc(km, cols);
    RowVectorXd tau(cols);
    std::vector<int> label(static_cast<std::size_t>(cols));
    for (Index k = 0; k < n_phases; ++k) {
      const MatrixXd& pool = obs.points[static_cast<std::size_t>(k)];
      std::uniform_int_distribution<Index> pick(0, pool.cols() - 1);
      for (Index p = 0; p < pts; ++p) {
        const Index c = k * pts + p;
        x.col(c) = pool.col(pick(rng));
        mc.col(c) = out.motion.col(k);
        tau[c] = obs.tau(static_cast<std::size_t>(k));
        label[static_cast<std::size_t>(c)] = static_cast<int>(k);
      }
    }
    const MatrixXd sc = out.shape.replicate(1, cols);
    models::MotionNet::Trace mtrace;
    models::ShapeNet::Trace strace;
    const MatrixXd v = motion.forward(mc, x, tau, mtrace);
    const MatrixXd deformed = x + v;
    const RowVectorXd sdf = shape.forward(sc, deformed, strace);

    double loss = sdf.cwiseAbs().mean();
    RowVectorXd dsdf = sdf.unaryExpr([](double s) { return s > 0.0 ? 1.0 : s < 0.0 ? -1.0 : 0.0; }) /
                       static_cast<double>(cols);
    MatrixXd dv = MatrixXd::Zero(3, cols);
    if (config.regularize_motion) {
      MatrixXd g_pw, g_pp;
      loss += w.pointwise * training::loss_pointwise(v, config.params.huber, &g_pw);
      const training::PairList pairs = training::random_pairs(label, cols, rng);
      loss += w.pairwise * training::loss_pairwise(x, deformed, pairs, config.params.distortion, &g_pp);
      dv = w.pointwise * g_pw + w.pairwise * g_pp;
    }
    double reg = 0.0;
    for (Index k = 0; k < n_phases; ++k) reg += training::code_regularizer(out.motion.col(k), out.shape);
    loss += w.code * reg / static_cast<double>(n_phases);
    if (!std::isfinite(loss)) {
      out.diverged = true;
      break;
    }
    out.loss.push_back(loss);

    MatrixXd dsc, ddef, dmc;
    shape.backward(strace, w.sdf * dsdf, nullptr, &dsc, &ddef);
    motion.backward(mtrace, ddef + dv, nullptr, &dmc, nullptr, nullptr);
    const double reg_scale = w.code / static_cast<double>(n_phases);
    VectorXd gs = dsc.rowwise().sum() + w.code * training::norm_gradient(out.shape);
    try {
      for (Index k = 0; k < n_phases; ++k) {
        VectorXd gm = dmc.middleCols(k * pts, pts).rowwise().sum() + reg_scale * training::norm_gradient(out.motion.col(k));
        motion_adam.step(static_cast<std::size_t>(k), out.motion.col(k).data(), gm, lr);
      }
      shape_adam.step(0, out.shape.data(), gs, lr);
    } catch (const NonFiniteError&) {
      out.diverged = true;
      break;
    }
    best_shape = out.shape;
    best_motion = out.motion;
  }
  out.shape = best_shape;
  out.motion = best_motion;
  out.mean_abs_sdf = observation_residual(obs, motion, shape, out.shape, out.motion);
  return out;
}

double observation_residual(const CanonicalObservation& obs, const models::MotionNet& motion,
                            const models::ShapeNet& shape, const VectorXd& shape_code, const MatrixXd& motion_codes) {
  const models::ComposedSdf f(motion, shape);
  double sum = 0.0;
  Index count = 0;
  for (std::size_t k = 0; k < obs.phases.size(); ++k) {
    const MatrixXd& x = obs.points[k];
    const Index n = x.cols();
    const RowVectorXd sdf = f.forward(motion_codes.col(static_cast<Index>(k)).replicate(1, n),
                                      shape_code.replicate(1, n), x, RowVectorXd::Constant(n, obs.tau(k)));
    sum += sdf.cwiseAbs().sum();
    count += n;
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace cardioflow::inference
