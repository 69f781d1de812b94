#include "cardioflow/diff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cardioflow/error.hpp"

namespace cardioflow::diff {

namespace {

constexpr int kProbes = 6;  // x +- h, x +- h/2, x +- h/4
constexpr double kOffsets[kProbes] = {1.0, -1.0, 0.5, -0.5, 0.25, -0.25};

}  // namespace

GradCheckReport grad_check(const DifferentiableFunction& f, const Eigen::VectorXd& point, double h,
                           const GradCheckOptions& options) {
  if (!(h > 0.0)) throw ShapeError("grad_check: step h must be positive");
  std::vector<Eigen::Index> coords = options.coordinates;
  if (coords.empty()) {
    coords.resize(static_cast<std::size_t>(point.size()));
    for (Eigen::Index i = 0; i < point.size(); ++i) coords[static_cast<std::size_t>(i)] = i;
  }

  const Eigen::VectorXd analytic = f.gradient(point);
  if (analytic.size() != point.size()) {
    throw ShapeError("grad_check: gradient has " + std::to_string(analytic.size()) +
                     " entries for a point of size " + std::to_string(point.size()));
  }

  // Column 0 is the centre; then kProbes columns per coordinate.
  const Eigen::Index n_cols = 1 + kProbes * static_cast<Eigen::Index>(coords.size());
  Eigen::VectorXd values(n_cols);
  if (f.batch_value) {
    constexpr Eigen::Index kChunk = 4096;
    for (Eigen::Index start = 0; start < n_cols; start += kChunk) {
      const Eigen::Index count = std::min(kChunk, n_cols - start);
      Eigen::MatrixXd probes = point.replicate(1, count);
      for (Eigen::Index c = 0; c < count; ++c) {
        const Eigen::Index col = start + c;
        if (col == 0) continue;
        const Eigen::Index k = (col - 1) / kProbes;
        const int p = static_cast<int>((col - 1) % kProbes);
        probes(coords[static_cast<std::size_t>(k)], c) += kOffsets[p] * h;
      }
      values.segment(start, count) = f.batch_value(probes);
    }
  } else {
    values[0] = f.value(point);
    Eigen::VectorXd probe = point;
    for (std::size_t k = 0; k < coords.size(); ++k) {
      const Eigen::Index i = coords[k];
      for (int p = 0; p < kProbes; ++p) {
        probe[i] = point[i] + kOffsets[p] * h;
        values[1 + static_cast<Eigen::Index>(k) * kProbes + p] = f.value(probe);
      }
      probe[i] = point[i];
    }
  }

  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double f0 = values[0];
  GradCheckReport report;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const Eigen::Index i = coords[k];
    const double* v = values.data() + 1 + static_cast<Eigen::Index>(k) * kProbes;
    const double fp = v[0], fm = v[1], fp2 = v[2], fm2 = v[3], fp4 = v[4], fm4 = v[5];

    const double d2_h = fp - 2.0 * f0 + fm;
    const double d2_h2 = fp2 - 2.0 * f0 + fm2;
    const double d2_h4 = fp4 - 2.0 * f0 + fm4;
    const double scale = std::max({std::abs(f0), std::abs(fp), std::abs(fm), std::abs(fp2), std::abs(fm2)});
    const double noise = 1e3 * eps * std::max(scale, 1.0);
    const bool kink = std::abs(d2_h - 4.0 * d2_h2) > std::max(0.1 * std::abs(d2_h), noise) ||
                      std::abs(d2_h2 - 4.0 * d2_h4) > std::max(0.1 * std::abs(d2_h2), noise);
    if (kink) {
      report.kinks.push_back(i);
      continue;
    }
    const double fd = (fp - fm) / (2.0 * h);
    const double g = analytic[i];
    const double floor = 1e8 * eps * std::max(1.0, std::abs(f0)) / h;
    const double rel = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), floor});
    ++report.compared;
    if (report.worst_component < 0 || rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_component = i;
    }
  }
  return report;
}

}  // namespace cardioflow::diff
