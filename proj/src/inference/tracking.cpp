#include "cardioflow/inference/tracking.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <array>

#include "cardioflow/error.hpp"

namespace cardioflow::inference {

using Eigen::Index;
using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;

bool TrackResult::all_converged() const {
  return std::all_of(converged.begin(), converged.end(), [](bool c) { return c; });
}

namespace {

MatrixXd residual_of(const models::MotionNet& motion, const MatrixXd& codes, const RowVectorXd& tau,
                     const MatrixXd& y, const MatrixXd& target) {
  return y + motion.forward(codes, y, tau) - target;
}

}  // namespace

TrackResult invert_deformation(const models::MotionNet& motion, const Eigen::VectorXd& code, double tau,
                               const MatrixXd& target, const MatrixXd& guess, const TrackOptions& options) {
  if (target.rows() != 3 || guess.rows() != 3 || guess.cols() != target.cols()) {
    throw ShapeError("invert_deformation: target and guess must both be 3 x n");
  }
  if (!(options.tolerance > 0.0) || options.max_iterations < 0) throw ConfigError("bad tracking options");
  const Index n = target.cols();
  TrackResult r;
  r.points = guess;
  r.converged.assign(static_cast<std::size_t>(n), false);
  const MatrixXd codes = code.replicate(1, n);
  const RowVectorXd taus = RowVectorXd::Constant(n, tau);
  MatrixXd res = residual_of(motion, codes, taus, r.points, target);
  r.residual = res.colwise().norm().transpose();

  std::vector<Index> active;
  for (Index c = 0; c < n; ++c) {
    if (r.residual[c] <= options.tolerance) r.converged[static_cast<std::size_t>(c)] = true;
    else active.push_back(c);
  }
  for (int it = 0; it < options.max_iterations && !active.empty(); ++it) {
    r.iterations = it + 1;
    const auto m = static_cast<Index>(active.size());
    MatrixXd y(3, m), tgt(3, m), cur(3, m);
    for (Index a = 0; a < m; ++a) {
      y.col(a) = r.points.col(active[static_cast<std::size_t>(a)]);
      tgt.col(a) = target.col(active[static_cast<std::size_t>(a)]);
      cur.col(a) = res.col(active[static_cast<std::size_t>(a)]);
    }
    const MatrixXd ca = code.replicate(1, m);
    const RowVectorXd ta = RowVectorXd::Constant(m, tau);
    // Jacobian rows of v from one backward pass per output component.
    models::MotionNet::Trace trace;
    motion.forward(ca, y, ta, trace);
    std::array<MatrixXd, 3> rows;
    for (int d = 0; d < 3; ++d) {
      MatrixXd up = MatrixXd::Zero(3, m);
      up.row(d).setOnes();
      motion.backward(trace, up, nullptr, nullptr, &rows[static_cast<std::size_t>(d)], nullptr);
    }
    MatrixXd step(3, m);
    for (Index a = 0; a < m; ++a) {
      Matrix3d jac = Matrix3d::Identity();
      for (int d = 0; d < 3; ++d) jac.row(d) += rows[static_cast<std::size_t>(d)].col(a).transpose();
      Eigen::FullPivLU<Matrix3d> lu(jac);
      step.col(a) = lu.isInvertible() ? Eigen::Vector3d(lu.solve(cur.col(a))) : Eigen::Vector3d(cur.col(a));
    }
    // Backtracking: halve the step for points whose residual does not drop.
    Eigen::VectorXd t = Eigen::VectorXd::Ones(m);
    Eigen::VectorXd cur_norm = cur.colwise().norm().transpose();
    MatrixXd best_y = y, best_res = cur;
    std::vector<bool> done(static_cast<std::size_t>(m), false);
    for (int halving = 0; halving < 12; ++halving) {
      MatrixXd trial = y - step * t.asDiagonal();
      const MatrixXd tres = residual_of(motion, ca, ta, trial, tgt);
      bool pending = false;
      for (Index a = 0; a < m; ++a) {
        if (done[static_cast<std::size_t>(a)]) continue;
        if (tres.col(a).norm() < cur_norm[a] || halving == 11) {
          best_y.col(a) = trial.col(a);
          best_res.col(a) = tres.col(a);
          done[static_cast<std::size_t>(a)] = true;
        } else {
          t[a] *= 0.5;
          pending = true;
        }
      }
      if (!pending) break;
    }
    std::vector<Index> next;
    for (Index a = 0; a < m; ++a) {
      const Index c = active[static_cast<std::size_t>(a)];
      const double rn = best_res.col(a).norm();
      // Keep the better of the old and new iterate.
      if (rn < r.residual[c]) {
        r.points.col(c) = best_y.col(a);
        res.col(c) = best_res.col(a);
        r.residual[c] = rn;
      }
      if (r.residual[c] <= options.tolerance) r.converged[static_cast<std::size_t>(c)] = true;
      else next.push_back(c);
    }
    active.swap(next);
  }
  return r;
}

TrackResult track_points(const models::MotionNet& motion, const Eigen::VectorXd& code_from, double tau_from,
                         const Eigen::VectorXd& code_to, double tau_to, const MatrixXd& points,
                         const TrackOptions& options) {
  if (points.rows() != 3) throw ShapeError("track_points: points must be 3 x n");
  const Index n = points.cols();
  const MatrixXd ed = deform_to_ed(motion, code_from.replicate(1, n), points, RowVectorXd::Constant(n, tau_from));
  // Start from the fixed-point guess ed - v(ed), or from the input itself
  // when that already solves the system (same phase).
  const MatrixXd fixed = ed - motion.forward(code_to.replicate(1, n), ed, RowVectorXd::Constant(n, tau_to));
  MatrixXd guess = fixed;
  const MatrixXd codes = code_to.replicate(1, n);
  const RowVectorXd taus = RowVectorXd::Constant(n, tau_to);
  const Eigen::VectorXd r_fixed = residual_of(motion, codes, taus, fixed, ed).colwise().norm().transpose();
  const Eigen::VectorXd r_input = residual_of(motion, codes, taus, points, ed).colwise().norm().transpose();
  for (Index c = 0; c < n; ++c)
    if (r_input[c] < r_fixed[c]) guess.col(c) = points.col(c);
  return invert_deformation(motion, code_to, tau_to, ed, guess, options);
}

}  // namespace cardioflow::inference
