#include "cardioflow/training/losses.hpp"

#include <algorithm>
#include <cmath>

#include "cardioflow/error.hpp"

namespace cardioflow::training {

using Eigen::Index;

double loss_sdf(const Eigen::RowVectorXd& pred, const Eigen::RowVectorXd& gt, double clamp, Eigen::RowVectorXd* grad) {
  if (pred.size() != gt.size()) throw ShapeError("loss_sdf: prediction and target sizes differ");
  const Index n = pred.size();
  if (grad) grad->setZero(n);
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double p = std::clamp(pred[i], -clamp, clamp);
    const double d = p - std::clamp(gt[i], -clamp, clamp);
    sum += std::abs(d);
    // Zero slope outside the band; sign(0) = 0.
    if (grad && std::abs(pred[i]) < clamp) (*grad)[i] = (d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0) / static_cast<double>(n);
  }
  return sum / static_cast<double>(n);
}

double huber(double r, double delta) {
  if (!(delta > 0.0)) throw ConfigError("huber knee must be positive");
  return r <= delta ? r * r / (2.0 * delta) : r - 0.5 * delta;
}

double loss_pointwise(const Eigen::MatrixXd& v, double delta, Eigen::MatrixXd* grad) {
  const Index n = v.cols();
  if (grad) grad->setZero(v.rows(), n);
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (Index j = 0; j < n; ++j) {
    const double r = v.col(j).norm();
    sum += huber(r, delta);
    if (grad) {
      if (r <= delta) grad->col(j) = v.col(j) / (delta * static_cast<double>(n));
      else grad->col(j) = v.col(j) / (r * static_cast<double>(n));
    }
  }
  return sum / static_cast<double>(n);
}

PairList all_pairs(Index n) {
  PairList pairs;
  for (Index j = 0; j < n; ++j)
    for (Index k = j + 1; k < n; ++k) pairs.emplace_back(j, k);
  return pairs;
}

PairList random_pairs(const std::vector<int>& groups, Index count, Rng& rng) {
  // Members of each group, in column order.
  std::vector<std::pair<int, Index>> sorted;
  for (std::size_t i = 0; i < groups.size(); ++i) sorted.emplace_back(groups[i], static_cast<Index>(i));
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Index> start(groups.size()), size(groups.size()), pos(groups.size());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t e = i;
    while (e < sorted.size() && sorted[e].first == sorted[i].first) ++e;
    for (std::size_t m = i; m < e; ++m) {
      start[static_cast<std::size_t>(sorted[m].second)] = static_cast<Index>(i);
      size[static_cast<std::size_t>(sorted[m].second)] = static_cast<Index>(e - i);
      pos[static_cast<std::size_t>(sorted[m].second)] = static_cast<Index>(m - i);
    }
    i = e;
  }
  PairList pairs;
  if (groups.empty()) return pairs;
  std::uniform_int_distribution<std::size_t> any(0, groups.size() - 1);
  Index attempts = 0;
  while (static_cast<Index>(pairs.size()) < count && attempts < 4 * count + 16) {
    ++attempts;
    const std::size_t j = any(rng);
    const Index n = size[j];
    if (n < 2) continue;
    std::uniform_int_distribution<Index> other(0, n - 2);
    Index m = other(rng);
    if (m >= pos[j]) ++m;
    pairs.emplace_back(static_cast<Index>(j), sorted[static_cast<std::size_t>(start[j] + m)].second);
  }
  return pairs;
}

double loss_pairwise(const Eigen::MatrixXd& points, const Eigen::MatrixXd& deformed, const PairList& pairs,
                     double tolerance, Eigen::MatrixXd* grad) {
  if (points.rows() != deformed.rows() || points.cols() != deformed.cols()) {
    throw ShapeError("loss_pairwise: points and deformed points differ in shape");
  }
  if (grad) grad->setZero(deformed.rows(), deformed.cols());
  double sum = 0.0;
  Index used = 0;
  struct Active {
    Index j, k;
    Eigen::Vector3d dir;
  };
  std::vector<Active> active;
  for (const auto& [j, k] : pairs) {
    const double dx = (points.col(j) - points.col(k)).norm();
    if (!(dx > 1e-6)) continue;
    ++used;
    const Eigen::Vector3d dv = (deformed.col(j) - points.col(j)) - (deformed.col(k) - points.col(k));
    const double dvn = dv.norm();
    const double excess = dvn / dx - tolerance;
    if (excess <= 0.0) continue;
    sum += excess;
    if (grad && dvn > 0.0) active.push_back({j, k, dv / (dvn * dx)});
  }
  if (used == 0) return 0.0;
  if (grad) {
    for (const Active& a : active) {
      grad->col(a.j) += a.dir / static_cast<double>(used);
      grad->col(a.k) -= a.dir / static_cast<double>(used);
    }
  }
  return sum / static_cast<double>(used);
}

double code_regularizer(const Eigen::VectorXd& motion_code, const Eigen::VectorXd& shape_code) {
  return motion_code.norm() + shape_code.norm();
}

Eigen::VectorXd norm_gradient(const Eigen::VectorXd& code) {
  const double n = code.norm();
  return n > 0.0 ? Eigen::VectorXd(code / n) : Eigen::VectorXd::Zero(code.size());
}

double loss_total(const LossComponents& c, const LossWeights& w) {
  return w.sdf * c.sdf + w.pointwise * c.pointwise + w.pairwise * c.pairwise + w.code * c.code;
}

}  // namespace cardioflow::training
