#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cardioflow/diff/tensor.hpp"
#include "cardioflow/random.hpp"

namespace cardioflow::diff {

enum class Activation { kRelu, kTanh, kIdentity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::kRelu;
};

/// Concatenates activation `source` (0 = network input, k = output of layer
/// k-1) after the regular input of layer `target`.
struct SkipConnection {
  std::size_t source = 0;
  std::size_t target = 0;
};

/// Named view of a contiguous parameter array, used by the optimizer.
struct ParamBlock {
  std::string name;
  std::span<double> values;
};

struct NetGradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  void set_zero();
  std::vector<std::span<const double>> blocks() const;
};

/// Per-call intermediate activations kept for the backward pass.
/// `activations[0]` is the input, `activations[l + 1]` the output of layer l.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> activations;
};

/// Feed-forward network over batches stored one sample per column.
class DenseNet {
 public:
  DenseNet() = default;
  DenseNet(std::vector<DenseLayer> layers, std::vector<SkipConnection> skips = {});

  std::size_t num_layers() const { return layers_.size(); }
  Eigen::Index input_width() const;
  Eigen::Index output_width() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<SkipConnection>& skips() const { return skips_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, ForwardTrace& trace) const;

  /// Gradients of <upstream, output> for the batch recorded in `trace`.
  /// Weight gradients are accumulated into `grads` when it is non-null; the
  /// input gradient is returned when `want_input_grad` is set (otherwise an
  /// empty matrix).
  Eigen::MatrixXd backward(const ForwardTrace& trace, const Eigen::MatrixXd& upstream,
                           NetGradients* grads, bool want_input_grad = true) const;

  NetGradients zero_gradients() const;
  std::vector<ParamBlock> parameter_blocks();
  std::size_t parameter_count() const;

 private:
  // Checks that every layer's input width equals the previous output width
  // plus the widths of its skip sources and records the column slots.
  void index_layers();
  void check_input(const Eigen::MatrixXd& input) const;

  std::vector<DenseLayer> layers_;
  std::vector<SkipConnection> skips_;
  // skips grouped per target layer, each with its column offset in the weight
  struct SkipSlot {
    std::size_t source;
    Eigen::Index offset;
    Eigen::Index width;
  };
  std::vector<std::vector<SkipSlot>> slots_;
  std::vector<Eigen::Index> main_width_;
};

/// Layer widths -> relu hidden layers with He-uniform weights and zero bias.
/// `out_activation` applies to the last layer.
DenseNet make_mlp(std::span<const Eigen::Index> widths, Activation hidden, Activation out,
                  Rng& rng, std::vector<SkipConnection> skips = {});

/// Tensor-level entry points (B x D tensors, one sample per row).
Tensor forward(const DenseNet& net, const Tensor& input);

struct BackwardResult {
  NetGradients param_grads;
  Tensor input_grads;
};

BackwardResult backward(const DenseNet& net, const Tensor& input, const Tensor& upstream);

}  // namespace cardioflow::diff
