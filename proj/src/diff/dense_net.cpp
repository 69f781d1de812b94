#include "cardioflow/diff/dense_net.hpp"

#include <cmath>

#include "cardioflow/error.hpp"

namespace cardioflow::diff {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity") return Activation::kIdentity;
  throw ShapeError("unknown activation tag '" + s + "'");
}

void NetGradients::set_zero() {
  for (auto& w : weight) w.setZero();
  for (auto& b : bias) b.setZero();
}

std::vector<std::span<const double>> NetGradients::blocks() const {
  std::vector<std::span<const double>> out;
  out.reserve(weight.size() * 2);
  for (std::size_t l = 0; l < weight.size(); ++l) {
    out.emplace_back(weight[l].data(), static_cast<std::size_t>(weight[l].size()));
    out.emplace_back(bias[l].data(), static_cast<std::size_t>(bias[l].size()));
  }
  return out;
}

DenseNet::DenseNet(std::vector<DenseLayer> layers, std::vector<SkipConnection> skips)
    : layers_(std::move(layers)), skips_(std::move(skips)) {
  index_layers();
}

Eigen::Index DenseNet::input_width() const {
  return layers_.empty() ? 0 : main_width_.front();
}

Eigen::Index DenseNet::output_width() const {
  return layers_.empty() ? 0 : layers_.back().weight.rows();
}

void DenseNet::index_layers() {
  slots_.assign(layers_.size(), {});
  main_width_.assign(layers_.size(), 0);
  if (layers_.empty()) return;

  for (const auto& s : skips_) {
    if (s.target >= layers_.size() || s.source > s.target) {
      throw ShapeError("skip connection " + std::to_string(s.source) + " -> " +
                       std::to_string(s.target) + " is out of range");
    }
  }
  // Width of activation k: input width for k = 0, else rows of layer k-1.
  std::vector<Eigen::Index> act_width(layers_.size() + 1, 0);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows()) {
      throw ShapeError("layer " + std::to_string(l) + ": bias has " +
                       std::to_string(layer.bias.size()) + " entries for " +
                       std::to_string(layer.weight.rows()) + " outputs");
    }
    Eigen::Index skip_width = 0;
    for (const auto& s : skips_) {
      if (s.target != l) continue;
      if (s.source == l) {
        throw ShapeError("skip connection into layer " + std::to_string(l) +
                         " duplicates its regular input");
      }
      skip_width += act_width[s.source];
    }
    const Eigen::Index main = layer.weight.cols() - skip_width;
    if (l == 0) {
      if (main <= 0) throw ShapeError("layer 0 has no regular input columns");
      act_width[0] = main;
    } else if (main != act_width[l]) {
      throw ShapeError("layer " + std::to_string(l) + " expects " + std::to_string(main) +
                       " regular inputs but layer " + std::to_string(l - 1) + " produces " +
                       std::to_string(act_width[l]));
    }
    main_width_[l] = main;
    Eigen::Index offset = main;
    for (const auto& s : skips_) {
      if (s.target != l) continue;
      slots_[l].push_back({s.source, offset, act_width[s.source]});
      offset += act_width[s.source];
    }
    act_width[l + 1] = layer.weight.rows();
  }
}

void DenseNet::check_input(const Eigen::MatrixXd& input) const {
  if (layers_.empty()) throw ShapeError("network has no layers");
  if (input.rows() != input_width()) {
    throw ShapeError("network input expects shape [B x " + std::to_string(input_width()) +
                     "], got [" + std::to_string(input.cols()) + " x " +
                     std::to_string(input.rows()) + "]");
  }
}

namespace {

void apply_activation(Activation a, Eigen::MatrixXd& m) {
  switch (a) {
    case Activation::kRelu: m = m.cwiseMax(0.0); break;
    case Activation::kTanh: m = m.array().tanh().matrix(); break;
    case Activation::kIdentity: break;
  }
}

// Multiplies `grad` in place by the activation derivative, expressed through
// the post-activation output.
void apply_activation_derivative(Activation a, const Eigen::MatrixXd& out, Eigen::MatrixXd& grad) {
  switch (a) {
    case Activation::kRelu:
      grad = (out.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::kTanh:
      grad.array() *= 1.0 - out.array().square();
      break;
    case Activation::kIdentity: break;
  }
}

}  // namespace

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& input) const {
  ForwardTrace trace;
  return forward(input, trace);
}

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& input, ForwardTrace& trace) const {
  check_input(input);
  trace.activations.resize(layers_.size() + 1);
  trace.activations[0] = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    Eigen::MatrixXd pre(layer.weight.rows(), input.cols());
    pre.noalias() = layer.weight.leftCols(main_width_[l]) * trace.activations[l];
    for (const auto& slot : slots_[l]) {
      pre.noalias() += layer.weight.middleCols(slot.offset, slot.width) * trace.activations[slot.source];
    }
    pre.colwise() += layer.bias;
    apply_activation(layer.activation, pre);
    trace.activations[l + 1] = std::move(pre);
  }
  return trace.activations.back();
}

Eigen::MatrixXd DenseNet::backward(const ForwardTrace& trace, const Eigen::MatrixXd& upstream,
                                   NetGradients* grads, bool want_input_grad) const {
  if (trace.activations.size() != layers_.size() + 1) {
    throw ShapeError("forward trace does not belong to this network");
  }
  const auto& out = trace.activations.back();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols()) {
    throw ShapeError("upstream gradient shape [" + std::to_string(upstream.cols()) + " x " +
                     std::to_string(upstream.rows()) + "] does not match output shape [" +
                     std::to_string(out.cols()) + " x " + std::to_string(out.rows()) + "]");
  }
  if (grads && grads->weight.size() != layers_.size()) *grads = zero_gradients();

  // dact[k] accumulates the gradient w.r.t. activation k.
  std::vector<Eigen::MatrixXd> dact(layers_.size() + 1);
  dact.back() = upstream;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& layer = layers_[li];
    Eigen::MatrixXd dpre = std::move(dact[li + 1]);
    apply_activation_derivative(layer.activation, trace.activations[li + 1], dpre);
    if (grads) {
      grads->weight[li].leftCols(main_width_[li]).noalias() += dpre * trace.activations[li].transpose();
      for (const auto& slot : slots_[li]) {
        grads->weight[li].middleCols(slot.offset, slot.width).noalias() +=
            dpre * trace.activations[slot.source].transpose();
      }
      grads->bias[li] += dpre.rowwise().sum();
    }
    const bool need_main = li > 0 || want_input_grad;
    if (need_main) {
      Eigen::MatrixXd d(main_width_[li], dpre.cols());
      d.noalias() = layer.weight.leftCols(main_width_[li]).transpose() * dpre;
      if (dact[li].size() == 0) {
        dact[li] = std::move(d);
      } else {
        dact[li] += d;
      }
    }
    for (const auto& slot : slots_[li]) {
      if (slot.source == 0 && !want_input_grad) continue;
      Eigen::MatrixXd d(slot.width, dpre.cols());
      d.noalias() = layer.weight.middleCols(slot.offset, slot.width).transpose() * dpre;
      if (dact[slot.source].size() == 0) {
        dact[slot.source] = std::move(d);
      } else {
        dact[slot.source] += d;
      }
    }
  }
  if (!want_input_grad) return {};
  if (dact[0].size() == 0) return Eigen::MatrixXd::Zero(input_width(), upstream.cols());
  return dact[0];
}

NetGradients DenseNet::zero_gradients() const {
  NetGradients g;
  for (const auto& layer : layers_) {
    g.weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
  return g;
}

std::vector<ParamBlock> DenseNet::parameter_blocks() {
  std::vector<ParamBlock> blocks;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& layer = layers_[l];
    blocks.push_back({"layer" + std::to_string(l) + ".weight",
                      {layer.weight.data(), static_cast<std::size_t>(layer.weight.size())}});
    blocks.push_back({"layer" + std::to_string(l) + ".bias",
                      {layer.bias.data(), static_cast<std::size_t>(layer.bias.size())}});
  }
  return blocks;
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

DenseNet make_mlp(std::span<const Eigen::Index> widths, Activation hidden, Activation out,
                  Rng& rng, std::vector<SkipConnection> skips) {
  if (widths.size() < 2) throw ShapeError("an MLP needs at least input and output widths");
  std::vector<DenseLayer> layers;
  const std::size_t n = widths.size() - 1;
  for (std::size_t l = 0; l < n; ++l) {
    Eigen::Index fan_in = widths[l];
    for (const auto& s : skips) {
      if (s.target == l) fan_in += widths[s.source];
    }
    const bool last = l + 1 == n;
    const Activation act = last ? out : hidden;
    // He-uniform for rectified layers, LeCun-uniform otherwise.
    const double bound = act == Activation::kRelu ? std::sqrt(6.0 / static_cast<double>(fan_in))
                                                  : std::sqrt(3.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer;
    layer.weight.resize(widths[l + 1], fan_in);
    for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = dist(rng);
    }
    layer.bias = Eigen::VectorXd::Zero(widths[l + 1]);
    layer.activation = act;
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers), std::move(skips));
}

Tensor forward(const DenseNet& net, const Tensor& input) {
  if (input.rank() != 2 || static_cast<Eigen::Index>(input.shape()[1]) != net.input_width()) {
    throw ShapeError("forward: input shape " + input.shape_string() + " does not match network input [B x " +
                     std::to_string(net.input_width()) + "]");
  }
  return Tensor::from_columns(net.forward(Eigen::MatrixXd(input.columns())));
}

BackwardResult backward(const DenseNet& net, const Tensor& input, const Tensor& upstream) {
  if (input.rank() != 2 || static_cast<Eigen::Index>(input.shape()[1]) != net.input_width()) {
    throw ShapeError("backward: input shape " + input.shape_string() + " does not match network input [B x " +
                     std::to_string(net.input_width()) + "]");
  }
  const std::vector<std::size_t> out_shape{input.shape()[0], static_cast<std::size_t>(net.output_width())};
  if (upstream.shape() != out_shape) {
    throw ShapeError("backward: upstream shape " + upstream.shape_string() + " does not match output shape " +
                     shape_string(out_shape));
  }
  ForwardTrace trace;
  net.forward(Eigen::MatrixXd(input.columns()), trace);
  BackwardResult result;
  result.param_grads = net.zero_gradients();
  Eigen::MatrixXd din = net.backward(trace, Eigen::MatrixXd(upstream.columns()), &result.param_grads, true);
  result.input_grads = Tensor::from_columns(din);
  return result;
}

}  // namespace cardioflow::diff
