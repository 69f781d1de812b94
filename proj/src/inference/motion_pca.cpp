#include "cardioflow/inference/motion_pca.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

#include "cardioflow/error.hpp"

namespace cardioflow::inference {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd MotionPca::reshape(const VectorXd& flat) const {
  if (flat.size() != static_cast<Index>(phases) * code_dim) throw ShapeError("motion sequence length mismatch");
  return Eigen::Map<const MatrixXd>(flat.data(), code_dim, phases);
}

VectorXd MotionPca::flatten(const MatrixXd& codes) const {
  if (codes.rows() != code_dim || codes.cols() != phases) throw ShapeError("motion sequence shape mismatch");
  return codes.reshaped();
}

MotionPca build_motion_pca(const std::vector<MatrixXd>& sequences, int components, double energy) {
  if (sequences.size() < 2) throw DatasetError("motion model needs at least two sequences");
  const Index dim = sequences.front().rows(), phases = sequences.front().cols();
  for (const auto& s : sequences) {
    if (s.rows() != dim || s.cols() != phases) {
      throw DatasetError("motion sequences differ in shape (" + std::to_string(s.rows()) + " x " +
                         std::to_string(s.cols()) + " vs " + std::to_string(dim) + " x " + std::to_string(phases) + ")");
    }
  }
  MatrixXd data(dim * phases, static_cast<Index>(sequences.size()));
  for (std::size_t s = 0; s < sequences.size(); ++s) data.col(static_cast<Index>(s)) = sequences[s].reshaped();
  const Index max_k = static_cast<Index>(sequences.size()) - 1;
  Index k = components;
  if (components < 0) {
    const edspace::Pca full = edspace::fit_pca(data, max_k);
    k = std::max<Index>(1, full.components_for_energy(energy));
  }
  if (k > max_k) throw ShapeError("motion model supports at most " + std::to_string(max_k) + " components");
  return MotionPca{edspace::fit_pca(data, k), static_cast<int>(phases), static_cast<int>(dim)};
}

namespace {

// Rows (code_dim x ...) of a flattened per-phase quantity at fractional phase.
MatrixXd rows_at(const MatrixXd& flat_rows, int code_dim, int phases, double tau) {
  const double u = tau * phases;
  const int i0 = static_cast<int>(std::floor(u));
  const double f = u - i0;
  const int a = ((i0 % phases) + phases) % phases, b = (a + 1) % phases;
  MatrixXd out = (1.0 - f) * flat_rows.middleRows(static_cast<Index>(a) * code_dim, code_dim);
  if (f > 0.0) out += f * flat_rows.middleRows(static_cast<Index>(b) * code_dim, code_dim);
  return out;
}

}  // namespace

Interpolation interpolate_motion(const MotionPca& model, const std::vector<ObservedCode>& observed, bool centered) {
  if (observed.empty()) throw DatasetError("motion interpolation needs at least one observed phase");
  const Index kd = model.code_dim;
  const auto l = static_cast<Index>(observed.size());
  const Index kb = model.pca.components();
  MatrixXd a(l * kd, kb);
  VectorXd rhs(l * kd);
  const MatrixXd mean_rows = model.pca.mean;
  for (Index o = 0; o < l; ++o) {
    const ObservedCode& ob = observed[static_cast<std::size_t>(o)];
    if (ob.code.size() != kd) throw ShapeError("observed motion code has the wrong length");
    if (!(ob.tau >= 0.0 && ob.tau <= 1.0)) throw DatasetError("observed tau outside [0, 1]");
    a.middleRows(o * kd, kd) = rows_at(model.pca.basis, model.code_dim, model.phases, ob.tau);
    rhs.segment(o * kd, kd) = ob.code;
    if (centered) rhs.segment(o * kd, kd) -= rows_at(mean_rows, model.code_dim, model.phases, ob.tau);
  }
  Interpolation out;
  out.low_confidence = l < 2;
  if (kb == 0) {
    out.coefficients = VectorXd::Zero(0);
  } else {
    Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& sv = svd.singularValues();
    const double tol = std::max(a.rows(), a.cols()) * std::numeric_limits<double>::epsilon() * sv[0];
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i) rank += sv[i] > tol ? 1 : 0;
    out.rank_deficient = rank < kb;
    svd.setThreshold(tol / std::max(sv[0], std::numeric_limits<double>::min()));
    out.coefficients = svd.solve(rhs);
  }
  const VectorXd fitted = model.pca.reconstruct(out.coefficients);
  out.codes = model.reshape(fitted);

  // Misfit of the model at each observation, spread over the cycle by
  // linear interpolation in tau between the neighbouring observations.
  std::vector<std::pair<double, VectorXd>> misfit;
  for (const ObservedCode& ob : observed)
    misfit.emplace_back(ob.tau - std::floor(ob.tau), ob.code - rows_at(fitted, model.code_dim, model.phases, ob.tau));
  std::stable_sort(misfit.begin(), misfit.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  const auto m = misfit.size();
  for (int p = 0; p < model.phases; ++p) {
    const double tau = static_cast<double>(p) / model.phases;
    std::size_t next = 0;
    while (next < m && misfit[next].first <= tau) ++next;
    const auto& lo = misfit[(next + m - 1) % m];
    const auto& hi = misfit[next % m];
    const double gap = hi.first - lo.first + (hi.first <= lo.first ? 1.0 : 0.0);
    double f = tau - lo.first;
    if (f < 0.0) f += 1.0;
    const double w = gap > 0.0 && gap < 1.0 ? f / gap : 0.0;
    out.codes.col(p) += (1.0 - w) * lo.second + w * hi.second;
  }
  for (const ObservedCode& ob : observed) {
    const double u = ob.tau * model.phases;
    const double r = std::round(u);
    if (std::abs(u - r) < 1e-9 && r < model.phases) out.codes.col(static_cast<Index>(r)) = ob.code;
  }
  return out;
}

Interpolation interpolate_two_phase(const MotionPca& model, const VectorXd& ed_code,
                                    const std::optional<VectorXd>& es_code, int es_phase, bool centered) {
  std::vector<ObservedCode> obs{{0.0, ed_code}};
  if (es_code) {
    if (es_phase <= 0 || es_phase >= model.phases) throw DatasetError("end-systolic phase out of range");
    obs.push_back({static_cast<double>(es_phase) / model.phases, *es_code});
  }
  return interpolate_motion(model, obs, centered);
}

MatrixXd resample_codes(const MatrixXd& codes, int phases) {
  if (codes.cols() < 1 || phases < 1) throw ShapeError("resample_codes: empty sequence");
  const auto n = static_cast<int>(codes.cols());
  MatrixXd out(codes.rows(), phases);
  for (int p = 0; p < phases; ++p) {
    const double u = static_cast<double>(p) / phases * n;
    const int i0 = static_cast<int>(std::floor(u));
    const double f = u - i0;
    out.col(p) = (1.0 - f) * codes.col(i0 % n) + f * codes.col((i0 + 1) % n);
  }
  return out;
}

}  // namespace cardioflow::inference
