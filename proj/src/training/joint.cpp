#include "cardioflow/training/joint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cardioflow/error.hpp"

namespace cardioflow::training {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

void validate_sequences(const std::vector<TrainingSequence>& sequences) {
  if (sequences.empty()) throw DatasetError("no training sequences");
  std::set<std::string> ids;
  for (const auto& s : sequences) {
    if (!ids.insert(s.id).second) throw DatasetError("duplicate sequence id '" + s.id + "'");
    if (s.phases.empty()) throw DatasetError("sequence '" + s.id + "' has no phases");
    for (std::size_t p = 0; p < s.phases.size(); ++p) {
      if (s.phases[p].empty()) {
        throw DatasetError("sequence '" + s.id + "' is missing the mesh of phase " + std::to_string(p));
      }
    }
  }
}

namespace {

struct Group {
  int subject;
  int phase;
  double tau;
};

}  // namespace

JointResult train_joint(const std::vector<TrainingSequence>& sequences, const models::ShapeNet& shape_init,
                        const JointConfig& config, const JointProgress& progress) {
  validate_sequences(sequences);
  if (config.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (config.groups_per_batch < 1 || config.points_per_group < 2) {
    throw ConfigError("joint training needs at least one group and two points per group");
  }

  Rng init = make_rng(config.seed, "init.motion");
  models::MotionNet motion(config.motion, init);
  models::ShapeNet shape = shape_init;
  models::CodeTable codes(static_cast<int>(shape.code_dim()), static_cast<int>(motion.code_dim()));
  Rng code_rng = make_rng(config.seed, "init.codes");
  std::vector<Group> groups;
  std::vector<SampleBatch> pools;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const auto& seq = sequences[s];
    const int t_n = static_cast<int>(seq.phases.size());
    codes.add_random_subject(seq.id, t_n, code_rng, config.code_init_std);
    for (int p = 0; p < t_n; ++p) {
      groups.push_back({static_cast<int>(s), p, static_cast<double>(p) / t_n});
      pools.push_back(sample_training_points(
          seq.phases[static_cast<std::size_t>(p)], config.pool,
          derive_seed(config.seed, "joint.pool." + std::to_string(s) + "." + std::to_string(p))));
    }
  }

  JointResult result{motion, shape, codes, {}, 0, false};
  std::vector<diff::ParamBlock> mparams = motion.net().parameter_blocks();
  std::vector<diff::ParamBlock> sparams = shape.net().parameter_blocks();
  diff::AdamState madam = diff::make_adam_state(mparams), sadam = diff::make_adam_state(sparams);
  std::size_t n_motion_codes = 0;
  std::vector<std::size_t> motion_offset;
  for (const auto& seq : sequences) {
    motion_offset.push_back(n_motion_codes);
    n_motion_codes += seq.phases.size();
  }
  SparseCodeAdam shape_code_adam(sequences.size(), shape.code_dim());
  SparseCodeAdam motion_code_adam(n_motion_codes, motion.code_dim());
  diff::NetGradients mgrads = motion.net().zero_gradients(), sgrads = shape.net().zero_gradients();
  Rng rng = make_rng(config.seed, "joint.batches");

  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  const auto per_batch = static_cast<std::size_t>(config.groups_per_batch);
  const Index pts = config.points_per_group;
  const Index km = motion.code_dim(), ks = shape.code_dim();
  const LossWeights& w = config.weights;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double decay = decayed_lr(1.0, epoch, config.lr_decay_every, config.lr_decay_factor);
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec{epoch + 1};
    std::size_t batches = 0;
    bool bad = false;
    for (std::size_t b0 = 0; b0 < groups.size(); b0 += per_batch) {
      const std::size_t nb = std::min(per_batch, groups.size() - b0);
      const Index cols = static_cast<Index>(nb) * pts;
      MatrixXd mc(km, cols), sc(ks, cols), x(3, cols);
      RowVectorXd tau(cols), gt(cols);
      std::vector<int> label(static_cast<std::size_t>(cols));
      for (std::size_t g = 0; g < nb; ++g) {
        const Group& grp = groups[order[b0 + g]];
        const SampleBatch& pool = pools[order[b0 + g]];
        std::uniform_int_distribution<Index> pick(0, pool.size() - 1);
        for (Index p = 0; p < pts; ++p) {
          const Index c = static_cast<Index>(g) * pts + p, i = pick(rng);
          x.col(c) = pool.points.col(i);
          gt[c] = pool.gt_sdf[i];
          tau[c] = grp.tau;
          mc.col(c) = codes.motion_code(grp.subject, grp.phase);
          sc.col(c) = codes.shape_code(grp.subject);
          label[static_cast<std::size_t>(c)] = static_cast<int>(g);
        }
      }

      models::MotionNet::Trace mtrace;
      models::ShapeNet::Trace strace;
      const MatrixXd v = motion.forward(mc, x, tau, mtrace);
      const MatrixXd deformed = x + v;
      const RowVectorXd pred = shape.forward(sc, deformed, strace);

      LossComponents comp;
      RowVectorXd dpred;
      MatrixXd dv_pw, dv_pp;
      comp.sdf = loss_sdf(pred, gt, config.params.clamp, &dpred);
      comp.pointwise = loss_pointwise(v, config.params.huber, &dv_pw);
      const PairList pairs = random_pairs(label, cols, rng);
      comp.pairwise = loss_pairwise(x, deformed, pairs, config.params.distortion, &dv_pp);
      for (std::size_t g = 0; g < nb; ++g) {
        const Group& grp = groups[order[b0 + g]];
        comp.code += code_regularizer(codes.motion_code(grp.subject, grp.phase), codes.shape_code(grp.subject));
      }
      comp.code /= static_cast<double>(nb);
      double loss = loss_total(comp, w);
      MatrixXd dv = w.pointwise * dv_pw + w.pairwise * dv_pp;
      if (config.ed_identity_weight > 0.0) {
        Index n0 = 0;
        for (Index c = 0; c < cols; ++c) n0 += tau[c] == 0.0 ? 1 : 0;
        if (n0 > 0) {
          for (Index c = 0; c < cols; ++c) {
            if (tau[c] != 0.0) continue;
            loss += config.ed_identity_weight * v.col(c).squaredNorm() / static_cast<double>(n0);
            dv.col(c) += 2.0 * config.ed_identity_weight / static_cast<double>(n0) * v.col(c);
          }
        }
      }
      if (!std::isfinite(loss)) {
        bad = true;
        break;
      }

      mgrads.set_zero();
      sgrads.set_zero();
      MatrixXd dsc, ddeformed, dmc;
      shape.backward(strace, w.sdf * dpred, config.fine_tune_shape ? &sgrads : nullptr, &dsc, &ddeformed);
      motion.backward(mtrace, ddeformed + dv, &mgrads, &dmc, nullptr, nullptr);

      try {
        diff::adam_step(mparams, mgrads.blocks(), madam, config.lr_motion * decay);
        if (config.fine_tune_shape) diff::adam_step(sparams, sgrads.blocks(), sadam, config.lr_shape * decay);
        // Shape codes collect the gradient of every group of their subject.
        std::vector<VectorXd> shape_grad(sequences.size());
        for (std::size_t g = 0; g < nb; ++g) {
          const Group& grp = groups[order[b0 + g]];
          const Index c0 = static_cast<Index>(g) * pts;
          const double reg = w.code / static_cast<double>(nb);
          VectorXd gm = dmc.middleCols(c0, pts).rowwise().sum();
          gm += reg * norm_gradient(codes.motion_code(grp.subject, grp.phase));
          auto& gs = shape_grad[static_cast<std::size_t>(grp.subject)];
          if (gs.size() == 0) gs = VectorXd::Zero(ks);
          gs += dsc.middleCols(c0, pts).rowwise().sum() + reg * norm_gradient(codes.shape_code(grp.subject));
          motion_code_adam.step(motion_offset[static_cast<std::size_t>(grp.subject)] + static_cast<std::size_t>(grp.phase),
                                codes.motion_code(grp.subject, grp.phase).data(), gm, config.lr_codes * decay);
        }
        for (std::size_t s = 0; s < shape_grad.size(); ++s) {
          if (shape_grad[s].size() == 0) continue;
          shape_code_adam.step(s, codes.shape_code(static_cast<int>(s)).data(), shape_grad[s], config.lr_codes * decay);
        }
      } catch (const NonFiniteError&) {
        bad = true;
        break;
      }
      rec.loss += loss;
      rec.sdf += comp.sdf;
      rec.pointwise += comp.pointwise;
      rec.pairwise += comp.pairwise;
      rec.code += comp.code;
      ++batches;
    }
    if (bad) {
      result.diverged = true;
      break;
    }
    const double nbatch = static_cast<double>(batches);
    rec.loss /= nbatch;
    rec.sdf /= nbatch;
    rec.pointwise /= nbatch;
    rec.pairwise /= nbatch;
    rec.code /= nbatch;
    result.history.push_back(rec);
    result.epochs_completed = epoch + 1;
    result.motion = motion;
    result.shape = shape;
    result.codes = codes;
    if (progress) progress(rec, JointState{epoch + 1, motion, shape, codes});
  }
  return result;
}

double sequence_surface_error(const models::MotionNet& motion, const models::ShapeNet& shape,
                              const models::CodeTable& codes, const TrainingSequence& sequence, int n,
                              std::uint64_t seed) {
  const int s = codes.index(sequence.id);
  const models::ComposedSdf f(motion, shape);
  double sum = 0.0;
  const int t_n = static_cast<int>(sequence.phases.size());
  for (int p = 0; p < t_n; ++p) {
    const MatrixXd x = surface_points(sequence.phases[static_cast<std::size_t>(p)], n,
                                      derive_seed(seed, std::to_string(p)));
    const RowVectorXd sdf = f.forward(codes.motion_code(s, p).replicate(1, n), codes.shape_code(s).replicate(1, n), x,
                                      RowVectorXd::Constant(n, static_cast<double>(p) / t_n));
    sum += sdf.cwiseAbs().mean();
  }
  return sum / t_n;
}

}  // namespace cardioflow::training
