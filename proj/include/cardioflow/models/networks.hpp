#pragma once

#include <Eigen/Core>

#include <string>

#include "cardioflow/diff/dense_net.hpp"
#include "cardioflow/random.hpp"

namespace cardioflow::models {

/// Sinusoidal features [v; sin(2^k pi v); cos(2^k pi v)] for k < frequencies,
/// applied row-wise. frequencies = 0 is the identity.
Eigen::MatrixXd positional_encoding(const Eigen::MatrixXd& v, int frequencies);
/// Gradient w.r.t. v given the gradient w.r.t. the encoded features.
Eigen::MatrixXd positional_encoding_backward(const Eigen::MatrixXd& v, const Eigen::MatrixXd& grad, int frequencies);

enum class ShapeInit { kHe, kGeometric };
std::string to_string(ShapeInit init);
ShapeInit shape_init_from_string(const std::string& s);

struct ShapeNetConfig {
  int code_dim = 256;
  int hidden = 512;
  int hidden_layers = 8;
  int skip_layer = 4;  // layer that also receives the network input
  int positional_frequencies = 0;
  ShapeInit init = ShapeInit::kGeometric;
  double init_radius = 0.6;  // sphere approximated by the geometric init
};

/// Signed distance network over (shape code, point). Batches are one sample
/// per column: codes K x B, points 3 x B.
class ShapeNet {
 public:
  struct Trace {
    Eigen::MatrixXd points;
    diff::ForwardTrace net;
  };

  ShapeNet() = default;
  ShapeNet(const ShapeNetConfig& config, Rng& rng);
  ShapeNet(const ShapeNetConfig& config, diff::DenseNet net);

  const ShapeNetConfig& config() const { return config_; }
  Eigen::Index code_dim() const { return config_.code_dim; }
  diff::DenseNet& net() { return net_; }
  const diff::DenseNet& net() const { return net_; }

  Eigen::RowVectorXd forward(const Eigen::MatrixXd& codes, const Eigen::MatrixXd& points) const;
  Eigen::RowVectorXd forward(const Eigen::MatrixXd& codes, const Eigen::MatrixXd& points, Trace& trace) const;

  /// Accumulates weight gradients into `grads` (if non-null) and writes the
  /// gradients w.r.t. codes and points into the optional outputs.
  void backward(const Trace& trace, const Eigen::RowVectorXd& upstream, diff::NetGradients* grads,
                Eigen::MatrixXd* dcodes, Eigen::MatrixXd* dpoints) const;

 private:
  Eigen::MatrixXd assemble(const Eigen::MatrixXd& codes, const Eigen::MatrixXd& points) const;

  ShapeNetConfig config_;
  diff::DenseNet net_;
};

struct MotionNetConfig {
  int code_dim = 128;
  int hidden = 256;
  int hidden_layers = 6;
  int positional_frequencies = 0;
};

/// Displacement network over (tau, point, motion code); input order is
/// (tau, x, code). The output layer starts at zero, so a fresh network is
/// the identity deformation.
class MotionNet {
 public:
  struct Trace {
    Eigen::MatrixXd tau;
    Eigen::MatrixXd points;
    diff::ForwardTrace net;
  };

  MotionNet() = default;
  MotionNet(const MotionNetConfig& config, Rng& rng);
  MotionNet(const MotionNetConfig& config, diff::DenseNet net);

  const MotionNetConfig& config() const { return config_; }
  Eigen::Index code_dim() const { return config_.code_dim; }
  diff::DenseNet& net() { return net_; }
  const diff::DenseNet& net() const { return net_; }

  /// Displacements (3 x B).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& codes, const Eigen::MatrixXd& points,
                          const Eigen::RowVectorXd& tau) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& codes, const Eigen::MatrixXd& points, const Eigen::RowVectorXd& tau,
                          Trace& trace) const;

  void backward(const Trace& trace, const Eigen::MatrixXd& upstream, diff::NetGradients* grads,
                Eigen::MatrixXd* dcodes, Eigen::MatrixXd* dpoints, Eigen::RowVectorXd* dtau) const;

 private:
  Eigen::MatrixXd assemble(const Eigen::MatrixXd& codes, const Eigen::MatrixXd& points,
                           const Eigen::RowVectorXd& tau) const;

  MotionNetConfig config_;
  diff::DenseNet net_;
};

/// x' = x + motion(code, x, tau).
Eigen::MatrixXd deform_to_ed(const MotionNet& motion, const Eigen::MatrixXd& motion_codes,
                             const Eigen::MatrixXd& points, const Eigen::RowVectorXd& tau);

/// shape(shape_code, x + motion(motion_code, x, tau)).
class ComposedSdf {
 public:
  struct Trace {
    MotionNet::Trace motion;
    ShapeNet::Trace shape;
    Eigen::MatrixXd displacement;
  };
  struct Gradients {
    diff::NetGradients* motion = nullptr;
    diff::NetGradients* shape = nullptr;
    Eigen::MatrixXd* motion_codes = nullptr;
    Eigen::MatrixXd* shape_codes = nullptr;
    Eigen::MatrixXd* points = nullptr;
    Eigen::RowVectorXd* tau = nullptr;
  };

  ComposedSdf(const MotionNet& motion, const ShapeNet& shape) : motion_(motion), shape_(shape) {}

  Eigen::RowVectorXd forward(const Eigen::MatrixXd& motion_codes, const Eigen::MatrixXd& shape_codes,
                             const Eigen::MatrixXd& points, const Eigen::RowVectorXd& tau) const;
  Eigen::RowVectorXd forward(const Eigen::MatrixXd& motion_codes, const Eigen::MatrixXd& shape_codes,
                             const Eigen::MatrixXd& points, const Eigen::RowVectorXd& tau, Trace& trace) const;
  void backward(const Trace& trace, const Eigen::RowVectorXd& upstream, const Gradients& out) const;

 private:
  const MotionNet& motion_;
  const ShapeNet& shape_;
};

}  // namespace cardioflow::models
