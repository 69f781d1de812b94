#pragma once

#include <Eigen/Core>

#include <utility>
#include <vector>

#include "cardioflow/random.hpp"

namespace cardioflow::training {

struct LossWeights {
  double sdf = 1.0;
  double pointwise = 5e-3;
  double pairwise = 1e-4;
  double code = 1e-4;
};

struct LossParams {
  double clamp = 0.1;        // SDF clamp band
  double huber = 0.05;       // knee of the displacement penalty
  double distortion = 0.5;   // tolerated displacement-difference ratio
};

/// Mean |clamp(pred) - clamp(gt)|. `grad` receives d/dpred.
double loss_sdf(const Eigen::RowVectorXd& pred, const Eigen::RowVectorXd& gt, double clamp,
                Eigen::RowVectorXd* grad = nullptr);

/// Huber penalty of a scalar: r^2 / (2 delta) below delta, r - delta / 2 above.
double huber(double r, double delta);

/// Mean Huber(||v_j||) over the columns of v. `grad` receives d/dv.
double loss_pointwise(const Eigen::MatrixXd& v, double delta, Eigen::MatrixXd* grad = nullptr);

using PairList = std::vector<std::pair<Eigen::Index, Eigen::Index>>;

/// All unordered pairs j < k of n points.
PairList all_pairs(Eigen::Index n);
/// `count` random pairs of distinct columns sharing a group label. Groups with
/// a single member contribute nothing.
PairList random_pairs(const std::vector<int>& groups, Eigen::Index count, Rng& rng);

/// Mean over pairs with ||x_j - x_k|| > 1e-6 of
///   max(||d_j - d_k|| / ||x_j - x_k|| - tolerance, 0),  d = deformed - points.
/// `grad` receives d/d(deformed).
double loss_pairwise(const Eigen::MatrixXd& points, const Eigen::MatrixXd& deformed, const PairList& pairs,
                     double tolerance, Eigen::MatrixXd* grad = nullptr);

/// ||motion code|| + ||shape code||.
double code_regularizer(const Eigen::VectorXd& motion_code, const Eigen::VectorXd& shape_code);
/// d||c|| / dc, zero at the origin.
Eigen::VectorXd norm_gradient(const Eigen::VectorXd& code);

struct LossComponents {
  double sdf = 0.0;
  double pointwise = 0.0;
  double pairwise = 0.0;
  double code = 0.0;  // code_regularizer value
};

double loss_total(const LossComponents& c, const LossWeights& w);

}  // namespace cardioflow::training
