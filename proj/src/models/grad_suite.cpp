#include "cardioflow/models/grad_suite.hpp"

#include <algorithm>
#include <chrono>

#include "cardioflow/diff/grad_check.hpp"
#include "cardioflow/error.hpp"

namespace cardioflow::models {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

namespace {

struct WeightRef {
  diff::DenseNet* net;
  std::size_t block;
  Index entry;
};

// Layout of the probed input vector: [motion code; shape code; x; tau] with
// absent parts of zero length.
struct Layout {
  Index km = 0, ks = 0;
  bool has_tau = false;
  Index size() const { return km + ks + 3 + (has_tau ? 1 : 0); }
};

struct Batch {
  MatrixXd mcodes, scodes, points;
  RowVectorXd tau;
};

Batch split(const Layout& l, const MatrixXd& z) {
  Batch b;
  b.mcodes = z.topRows(l.km);
  b.scodes = z.middleRows(l.km, l.ks);
  b.points = z.middleRows(l.km + l.ks, 3);
  if (l.has_tau) b.tau = z.row(l.km + l.ks + 3);
  return b;
}

class Checker {
 public:
  Checker(const ShapeNet* shape, const MotionNet* motion, const GradSuiteOptions& options)
      : shape_(shape), motion_(motion), options_(options) {}

  // Scalar objective <u, output> over a batch of columns.
  VectorXd values(const Layout& l, const MatrixXd& z, const VectorXd& u) const {
    const Batch b = split(l, z);
    if (shape_ && motion_) return ComposedSdf(*motion_, *shape_).forward(b.mcodes, b.scodes, b.points, b.tau).transpose();
    if (shape_) return shape_->forward(b.scodes, b.points).transpose();
    return (u.transpose() * motion_->forward(b.mcodes, b.points, b.tau)).transpose();
  }

  // Gradient w.r.t. the input vector, with weight gradients accumulated.
  VectorXd gradient(const Layout& l, const VectorXd& z, const VectorXd& u, diff::NetGradients* gs,
                    diff::NetGradients* gm) const {
    const Batch b = split(l, z);
    VectorXd g(l.size());
    if (shape_ && motion_) {
      ComposedSdf composed(*motion_, *shape_);
      ComposedSdf::Trace trace;
      composed.forward(b.mcodes, b.scodes, b.points, b.tau, trace);
      MatrixXd dm, ds, dx;
      RowVectorXd dt;
      composed.backward(trace, RowVectorXd::Ones(1), {gm, gs, &dm, &ds, &dx, &dt});
      g << dm, ds, dx, dt.transpose();
    } else if (shape_) {
      ShapeNet::Trace trace;
      shape_->forward(b.scodes, b.points, trace);
      MatrixXd ds, dx;
      shape_->backward(trace, RowVectorXd::Ones(1), gs, &ds, &dx);
      g << ds, dx;
    } else {
      MotionNet::Trace trace;
      motion_->forward(b.mcodes, b.points, b.tau, trace);
      MatrixXd dm, dx;
      RowVectorXd dt;
      motion_->backward(trace, u, gm, &dm, &dx, &dt);
      g << dm, dx, dt.transpose();
    }
    return g;
  }

 private:
  const ShapeNet* shape_;
  const MotionNet* motion_;
  const GradSuiteOptions& options_;
};

void record(GradSuiteEntry& entry, const diff::GradCheckReport& r) {
  entry.max_relative_error = std::max(entry.max_relative_error, r.max_relative_error);
  entry.compared += r.compared;
  entry.kinks += r.kinks.size();
}

}  // namespace

GradSuiteReport run_grad_suite(const ShapeNet& shape_in, const MotionNet& motion_in, const GradSuiteOptions& options) {
  if (options.tuples < 1) throw ConfigError("gradcheck needs at least one tuple");
  if (!(options.step > 0.0)) throw ConfigError("gradcheck step must be positive");
  const auto start = std::chrono::steady_clock::now();
  // Private copies: weight probes write into the networks.
  ShapeNet shape = shape_in;
  MotionNet motion = motion_in;
  Rng rng = make_rng(options.seed, "gradcheck");
  std::uniform_real_distribution<double> unit(-1.0, 1.0), phase(0.0, 1.0);
  std::normal_distribution<double> code(0.0, 0.1);

  struct Target {
    const char* name;
    const ShapeNet* shape;
    const MotionNet* motion;
    Layout layout;
  };
  const Target targets[] = {
      {"shape", &shape, nullptr, {0, shape.code_dim(), false}},
      {"motion", nullptr, &motion, {motion.code_dim(), 0, true}},
      {"composed", &shape, &motion, {motion.code_dim(), shape.code_dim(), true}},
  };

  GradSuiteReport report;
  for (const Target& t : targets) {
    GradSuiteEntry inputs{t.name, "inputs"}, weights{t.name, "weights"};
    const Checker checker(t.shape, t.motion, options);
    for (int k = 0; k < options.tuples; ++k) {
      VectorXd z(t.layout.size());
      for (Index i = 0; i < t.layout.km + t.layout.ks; ++i) z[i] = code(rng);
      for (Index i = 0; i < 3; ++i) z[t.layout.km + t.layout.ks + i] = 0.9 * unit(rng);
      if (t.layout.has_tau) z[z.size() - 1] = phase(rng);
      VectorXd u(3);
      for (auto& v : u) v = unit(rng);

      diff::NetGradients gs = shape.net().zero_gradients(), gm = motion.net().zero_gradients();
      VectorXd g = checker.gradient(t.layout, z, u, t.shape ? &gs : nullptr, t.motion ? &gm : nullptr);
      if (options.inject_fault) g[0] *= 1.0 + 1e-3;

      diff::DifferentiableFunction fi;
      fi.value = [&](const VectorXd& p) { return checker.values(t.layout, p, u)[0]; };
      fi.gradient = [&](const VectorXd&) { return g; };
      fi.batch_value = [&](const MatrixXd& p) { return checker.values(t.layout, p, u); };
      record(inputs, diff::grad_check(fi, z, options.step));

      // Sampled weight entries of every block of the involved networks.
      std::vector<WeightRef> refs;
      VectorXd wg;
      std::vector<double> analytic;
      auto sample = [&](diff::DenseNet& net, const diff::NetGradients& grads) {
        auto blocks = net.parameter_blocks();
        auto gblocks = grads.blocks();
        for (std::size_t b = 0; b < blocks.size(); ++b) {
          const Index n = static_cast<Index>(blocks[b].values.size());
          std::uniform_int_distribution<Index> pick(0, n - 1);
          std::vector<Index> chosen;
          while (static_cast<Index>(chosen.size()) < std::min<Index>(options.weights_per_block, n)) {
            const Index e = pick(rng);
            if (std::find(chosen.begin(), chosen.end(), e) != chosen.end()) continue;
            chosen.push_back(e);
            refs.push_back({&net, b, e});
            analytic.push_back(gblocks[b][static_cast<std::size_t>(e)]);
          }
        }
      };
      if (t.shape) sample(shape.net(), gs);
      if (t.motion) sample(motion.net(), gm);
      if (options.inject_fault && !analytic.empty()) analytic[0] = analytic[0] * (1.0 + 1e-3) + 1e-3;
      VectorXd w0(static_cast<Index>(refs.size()));
      for (std::size_t r = 0; r < refs.size(); ++r)
        w0[static_cast<Index>(r)] = refs[r].net->parameter_blocks()[refs[r].block].values[static_cast<std::size_t>(refs[r].entry)];
      auto assign = [&](const VectorXd& w) {
        for (std::size_t r = 0; r < refs.size(); ++r)
          refs[r].net->parameter_blocks()[refs[r].block].values[static_cast<std::size_t>(refs[r].entry)] = w[static_cast<Index>(r)];
      };
      diff::DifferentiableFunction fw;
      fw.value = [&](const VectorXd& w) {
        assign(w);
        const double v = checker.values(t.layout, z, u)[0];
        assign(w0);
        return v;
      };
      const VectorXd ga = Eigen::Map<const VectorXd>(analytic.data(), static_cast<Index>(analytic.size()));
      fw.gradient = [&](const VectorXd&) { return ga; };
      record(weights, diff::grad_check(fw, w0, options.step));
    }
    report.entries.push_back(inputs);
    report.entries.push_back(weights);
  }
  for (const auto& e : report.entries) report.max_relative_error = std::max(report.max_relative_error, e.max_relative_error);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

GradSuiteReport run_grad_suite(const ShapeNetConfig& shape_config, const MotionNetConfig& motion_config,
                               const GradSuiteOptions& options) {
  Rng rng = make_rng(options.seed, "gradcheck.init");
  ShapeNet shape(shape_config, rng);
  MotionNet motion(motion_config, rng);
  auto& out = motion.net().layers().back();
  std::uniform_real_distribution<double> small(-0.1, 0.1);
  const double bound = std::sqrt(3.0 / static_cast<double>(out.weight.cols()));
  for (Index j = 0; j < out.weight.cols(); ++j)
    for (Index i = 0; i < out.weight.rows(); ++i) out.weight(i, j) = bound * small(rng);
  for (auto& b : out.bias) b = small(rng);
  return run_grad_suite(shape, motion, options);
}

}  // namespace cardioflow::models
