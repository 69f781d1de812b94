#include "cardioflow/models/networks.hpp"

#include <cmath>
#include <numbers>

#include "cardioflow/error.hpp"

namespace cardioflow::models {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;

MatrixXd positional_encoding(const MatrixXd& v, int frequencies) {
  if (frequencies <= 0) return v;
  const Index d = v.rows();
  MatrixXd out(d * (1 + 2 * frequencies), v.cols());
  out.topRows(d) = v;
  for (int k = 0; k < frequencies; ++k) {
    const double w = std::ldexp(std::numbers::pi, k);
    out.middleRows(d * (1 + 2 * k), d) = (w * v.array()).sin().matrix();
    out.middleRows(d * (2 + 2 * k), d) = (w * v.array()).cos().matrix();
  }
  return out;
}

MatrixXd positional_encoding_backward(const MatrixXd& v, const MatrixXd& grad, int frequencies) {
  if (frequencies <= 0) return grad;
  const Index d = v.rows();
  MatrixXd out = grad.topRows(d);
  for (int k = 0; k < frequencies; ++k) {
    const double w = std::ldexp(std::numbers::pi, k);
    const auto arg = (w * v.array()).eval();
    out.array() += w * (arg.cos() * grad.middleRows(d * (1 + 2 * k), d).array() -
                        arg.sin() * grad.middleRows(d * (2 + 2 * k), d).array());
  }
  return out;
}

std::string to_string(ShapeInit init) { return init == ShapeInit::kHe ? "he" : "geometric"; }

ShapeInit shape_init_from_string(const std::string& s) {
  if (s == "he") return ShapeInit::kHe;
  if (s == "geometric") return ShapeInit::kGeometric;
  throw ConfigError("unknown shape network init '" + s + "' (expected \"he\" or \"geometric\")");
}

namespace {

void fill_uniform(MatrixXd& m, double bound, Rng& rng) {
  std::uniform_real_distribution<double> d(-bound, bound);
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = d(rng);
}

void fill_normal(MatrixXd& m, double mean, double stddev, Rng& rng) {
  std::normal_distribution<double> d(mean, stddev);
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = d(rng);
}

void check_batch(const MatrixXd& codes, Index code_dim, const MatrixXd& points, const char* what) {
  if (codes.rows() != code_dim) {
    throw ShapeError(std::string(what) + ": code length " + std::to_string(codes.rows()) + " does not match " +
                     std::to_string(code_dim));
  }
  if (points.rows() != 3) throw ShapeError(std::string(what) + ": points must be 3 x B");
  if (codes.cols() != points.cols()) {
    throw ShapeError(std::string(what) + ": " + std::to_string(codes.cols()) + " codes for " +
                     std::to_string(points.cols()) + " points");
  }
}

}  // namespace

ShapeNet::ShapeNet(const ShapeNetConfig& config, Rng& rng) : config_(config) {
  const Index point_width = 3 * (1 + 2 * config.positional_frequencies);
  const Index in = config.code_dim + point_width;
  if (config.hidden_layers < 1 || config.skip_layer < 0 || config.skip_layer >= config.hidden_layers + 1) {
    throw ShapeError("shape network: skip layer " + std::to_string(config.skip_layer) + " out of range");
  }
  const bool use_skip = config.skip_layer > 0;
  if (use_skip && config.hidden <= in) {
    throw ShapeError("shape network: hidden width " + std::to_string(config.hidden) +
                     " must exceed the input width " + std::to_string(in) + " to host the skip connection");
  }
  std::vector<diff::DenseLayer> layers;
  Index prev = in;
  for (int l = 0; l <= config.hidden_layers; ++l) {
    const bool last = l == config.hidden_layers;
    Index out = last ? 1 : config.hidden;
    if (use_skip && l + 1 == config.skip_layer) out = config.hidden - in;
    const Index cols = prev + (use_skip && l == config.skip_layer ? in : 0);
    diff::DenseLayer layer;
    layer.weight.resize(out, cols);
    layer.bias = Eigen::VectorXd::Zero(out);
    layer.activation = last ? diff::Activation::kIdentity : diff::Activation::kRelu;
    if (config.init == ShapeInit::kHe) {
      fill_uniform(layer.weight, last ? std::sqrt(3.0 / cols) : std::sqrt(6.0 / cols), rng);
    } else if (last) {
      fill_normal(layer.weight, std::sqrt(std::numbers::pi / static_cast<double>(cols)), 1e-4, rng);
      layer.bias.setConstant(-config.init_radius);
    } else {
      fill_normal(layer.weight, 0.0, std::sqrt(2.0) / std::sqrt(static_cast<double>(out)), rng);
      if (use_skip && l == config.skip_layer) layer.weight /= std::sqrt(2.0);
    }
    if (config.init == ShapeInit::kGeometric && config.positional_frequencies > 0) {
      // Sinusoidal features start switched off so the initial field stays radial.
      auto zero_features = [&](Index offset) {
        layer.weight.middleCols(offset + config.code_dim + 3, point_width - 3).setZero();
      };
      if (l == 0) zero_features(0);
      if (use_skip && l == config.skip_layer) zero_features(prev);
    }
    layers.push_back(std::move(layer));
    prev = out;
  }
  std::vector<diff::SkipConnection> skips;
  if (use_skip) skips.push_back({0, static_cast<std::size_t>(config.skip_layer)});
  net_ = diff::DenseNet(std::move(layers), std::move(skips));
}

ShapeNet::ShapeNet(const ShapeNetConfig& config, diff::DenseNet net) : config_(config), net_(std::move(net)) {
  const Index in = config.code_dim + 3 * (1 + 2 * config.positional_frequencies);
  if (net_.input_width() != in || net_.output_width() != 1) {
    throw ShapeError("shape network weights have input width " + std::to_string(net_.input_width()) +
                     " and output width " + std::to_string(net_.output_width()) + ", expected " +
                     std::to_string(in) + " and 1");
  }
}

MatrixXd ShapeNet::assemble(const MatrixXd& codes, const MatrixXd& points) const {
  check_batch(codes, config_.code_dim, points, "shape network");
  const MatrixXd enc = positional_encoding(points, config_.positional_frequencies);
  MatrixXd in(codes.rows() + enc.rows(), codes.cols());
  in.topRows(codes.rows()) = codes;
  in.bottomRows(enc.rows()) = enc;
  return in;
}

RowVectorXd ShapeNet::forward(const MatrixXd& codes, const MatrixXd& points) const {
  return net_.forward(assemble(codes, points));
}

RowVectorXd ShapeNet::forward(const MatrixXd& codes, const MatrixXd& points, Trace& trace) const {
  trace.points = points;
  return net_.forward(assemble(codes, points), trace.net);
}

void ShapeNet::backward(const Trace& trace, const RowVectorXd& upstream, diff::NetGradients* grads,
                        MatrixXd* dcodes, MatrixXd* dpoints) const {
  const bool want_input = dcodes || dpoints;
  const MatrixXd din = net_.backward(trace.net, upstream, grads, want_input);
  if (dcodes) *dcodes = din.topRows(config_.code_dim);
  if (dpoints) {
    *dpoints = positional_encoding_backward(trace.points, din.bottomRows(din.rows() - config_.code_dim),
                                            config_.positional_frequencies);
  }
}

MotionNet::MotionNet(const MotionNetConfig& config, Rng& rng) : config_(config) {
  const int f = config.positional_frequencies;
  const Index in = (1 + 2 * f) + 3 * (1 + 2 * f) + config.code_dim;
  std::vector<Index> widths{in};
  for (int l = 0; l < config.hidden_layers; ++l) widths.push_back(config.hidden);
  widths.push_back(3);
  net_ = diff::make_mlp(widths, diff::Activation::kRelu, diff::Activation::kIdentity, rng);
  net_.layers().back().weight.setZero();
  net_.layers().back().bias.setZero();
}

MotionNet::MotionNet(const MotionNetConfig& config, diff::DenseNet net) : config_(config), net_(std::move(net)) {
  const int f = config.positional_frequencies;
  const Index in = (1 + 2 * f) + 3 * (1 + 2 * f) + config.code_dim;
  if (net_.input_width() != in || net_.output_width() != 3) {
    throw ShapeError("motion network weights have input width " + std::to_string(net_.input_width()) +
                     " and output width " + std::to_string(net_.output_width()) + ", expected " +
                     std::to_string(in) + " and 3");
  }
}

MatrixXd MotionNet::assemble(const MatrixXd& codes, const MatrixXd& points, const RowVectorXd& tau) const {
  check_batch(codes, config_.code_dim, points, "motion network");
  if (tau.size() != points.cols()) {
    throw ShapeError("motion network: " + std::to_string(tau.size()) + " phase values for " +
                     std::to_string(points.cols()) + " points");
  }
  const int f = config_.positional_frequencies;
  const MatrixXd et = positional_encoding(tau, f);
  const MatrixXd ex = positional_encoding(points, f);
  MatrixXd in(et.rows() + ex.rows() + codes.rows(), codes.cols());
  in.topRows(et.rows()) = et;
  in.middleRows(et.rows(), ex.rows()) = ex;
  in.bottomRows(codes.rows()) = codes;
  return in;
}

MatrixXd MotionNet::forward(const MatrixXd& codes, const MatrixXd& points, const RowVectorXd& tau) const {
  return net_.forward(assemble(codes, points, tau));
}

MatrixXd MotionNet::forward(const MatrixXd& codes, const MatrixXd& points, const RowVectorXd& tau,
                            Trace& trace) const {
  trace.tau = tau;
  trace.points = points;
  return net_.forward(assemble(codes, points, tau), trace.net);
}

void MotionNet::backward(const Trace& trace, const MatrixXd& upstream, diff::NetGradients* grads, MatrixXd* dcodes,
                         MatrixXd* dpoints, RowVectorXd* dtau) const {
  const bool want_input = dcodes || dpoints || dtau;
  const MatrixXd din = net_.backward(trace.net, upstream, grads, want_input);
  if (!want_input) return;
  const int f = config_.positional_frequencies;
  const Index tw = 1 + 2 * f, xw = 3 * (1 + 2 * f);
  if (dtau) *dtau = positional_encoding_backward(trace.tau, din.topRows(tw), f);
  if (dpoints) *dpoints = positional_encoding_backward(trace.points, din.middleRows(tw, xw), f);
  if (dcodes) *dcodes = din.bottomRows(config_.code_dim);
}

MatrixXd deform_to_ed(const MotionNet& motion, const MatrixXd& motion_codes, const MatrixXd& points,
                      const RowVectorXd& tau) {
  return points + motion.forward(motion_codes, points, tau);
}

RowVectorXd ComposedSdf::forward(const MatrixXd& motion_codes, const MatrixXd& shape_codes, const MatrixXd& points,
                                 const RowVectorXd& tau) const {
  return shape_.forward(shape_codes, deform_to_ed(motion_, motion_codes, points, tau));
}

RowVectorXd ComposedSdf::forward(const MatrixXd& motion_codes, const MatrixXd& shape_codes, const MatrixXd& points,
                                 const RowVectorXd& tau, Trace& trace) const {
  trace.displacement = motion_.forward(motion_codes, points, tau, trace.motion);
  return shape_.forward(shape_codes, points + trace.displacement, trace.shape);
}

void ComposedSdf::backward(const Trace& trace, const RowVectorXd& upstream, const Gradients& out) const {
  MatrixXd d_deformed;
  shape_.backward(trace.shape, upstream, out.shape, out.shape_codes, &d_deformed);
  const bool need_motion = out.motion || out.motion_codes || out.points || out.tau;
  if (!need_motion) return;
  MatrixXd dpoints;
  motion_.backward(trace.motion, d_deformed, out.motion, out.motion_codes, out.points ? &dpoints : nullptr, out.tau);
  if (out.points) *out.points = d_deformed + dpoints;
}

}  // namespace cardioflow::models
