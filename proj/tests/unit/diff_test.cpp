#include <gtest/gtest.h>

#include <cmath>

#include "cardioflow/diff/adam.hpp"
#include "cardioflow/diff/dense_net.hpp"
#include "cardioflow/diff/grad_check.hpp"
#include "cardioflow/diff/tensor.hpp"
#include "cardioflow/error.hpp"

namespace cardioflow::diff {
namespace {

DenseNet single_layer(const Eigen::MatrixXd& w, Activation act) {
  DenseLayer layer{w, Eigen::VectorXd::Zero(w.rows()), act};
  return DenseNet({layer});
}

// <upstream, net(x)> as a function of x, used for finite differences.
DifferentiableFunction input_probe(const DenseNet& net, const Eigen::VectorXd& upstream) {
  DifferentiableFunction f;
  f.value = [&net, upstream](const Eigen::VectorXd& x) { return upstream.dot(net.forward(x).col(0)); };
  f.gradient = [&net, upstream](const Eigen::VectorXd& x) {
    ForwardTrace trace;
    net.forward(x, trace);
    return Eigen::VectorXd(net.backward(trace, upstream, nullptr, true).col(0));
  };
  f.batch_value = [&net, upstream](const Eigen::MatrixXd& xs) {
    return Eigen::VectorXd(upstream.transpose() * net.forward(xs));
  };
  return f;
}

TEST(Tensor, RejectsMismatchedShape) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5, 0.0)), ShapeError);
}

TEST(Tensor, RejectsNonFiniteValues) {
  EXPECT_THROW(Tensor({1, 2}, {1.0, std::nan("")}), NonFiniteError);
  EXPECT_THROW(Tensor({1, 1}, {INFINITY}), NonFiniteError);
}

TEST(DenseNetForward, IdentityLayerPassesInputThrough) {
  DenseNet net = single_layer(Eigen::Matrix3d::Identity(), Activation::kIdentity);
  Tensor out = forward(net, Tensor({1, 3}, {1, 2, 3}));
  EXPECT_EQ(out.shape(), (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(out(0, 0), 1.0);
  EXPECT_EQ(out(0, 1), 2.0);
  EXPECT_EQ(out(0, 2), 3.0);
}

TEST(DenseNetForward, ReluClampsNegatives) {
  DenseNet net = single_layer(Eigen::Matrix2d::Identity(), Activation::kRelu);
  Tensor out = forward(net, Tensor({1, 2}, {-1, 2}));
  EXPECT_EQ(out(0, 0), 0.0);
  EXPECT_EQ(out(0, 1), 2.0);
}

TEST(DenseNetForward, TwoLayerMatchesHandComputedChain) {
  // Hand-evaluated: h = relu(W1 x + b1), y = W2 h + b2 on a 2x2 instance.
  Eigen::Matrix2d w1;
  w1 << 0.5, -1.0, 2.0, 0.25;
  Eigen::Vector2d b1(0.1, -0.2);
  Eigen::Matrix2d w2;
  w2 << 1.5, 0.5, -0.75, 2.0;
  Eigen::Vector2d b2(0.3, 0.0);
  DenseNet net({{w1, b1, Activation::kRelu}, {w2, b2, Activation::kIdentity}});
  // x = (1, -2): W1 x + b1 = (0.5 + 2 + 0.1, 2 - 0.5 - 0.2) = (2.6, 1.3)
  // y = (1.5*2.6 + 0.5*1.3 + 0.3, -0.75*2.6 + 2*1.3) = (4.85, 0.65)
  Tensor out = forward(net, Tensor({1, 2}, {1, -2}));
  EXPECT_NEAR(out(0, 0), 4.85, 1e-12);
  EXPECT_NEAR(out(0, 1), 0.65, 1e-12);
}

TEST(DenseNetForward, DimensionMismatchReportsBothShapes) {
  DenseNet net = single_layer(Eigen::Matrix3d::Identity(), Activation::kIdentity);
  try {
    forward(net, Tensor({1, 2}, {1, 2}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1x2]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("3"), std::string::npos) << msg;
  }
}

TEST(DenseNetForward, IsPure) {
  Rng rng(3);
  const std::vector<Eigen::Index> widths{4, 16, 16, 2};
  DenseNet net = make_mlp(widths, Activation::kRelu, Activation::kIdentity, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 7);
  Eigen::MatrixXd a = net.forward(x);
  Eigen::MatrixXd b = net.forward(x);
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), sizeof(double) * a.size()));
}

TEST(DenseNetBackward, LinearLayerInputGradIsTransposedWeight) {
  Eigen::MatrixXd w(2, 3);
  w << 1, 2, 3, -4, 5, -6;
  DenseNet net = single_layer(w, Activation::kIdentity);
  Tensor up({1, 2}, {0.5, -1.5});
  BackwardResult r = backward(net, Tensor({1, 3}, {0.1, 0.2, 0.3}), up);
  Eigen::Vector3d expected = w.transpose() * Eigen::Vector2d(0.5, -1.5);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(r.input_grads(0, i), expected[i]);
}

TEST(DenseNetBackward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(5);
  const std::vector<Eigen::Index> widths{3, 8, 8, 2};
  DenseNet net = make_mlp(widths, Activation::kTanh, Activation::kIdentity, rng);
  BackwardResult r = backward(net, Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), Tensor::zeros({2, 2}));
  for (double v : r.input_grads.data()) EXPECT_EQ(v, 0.0);
  for (const auto& w : r.param_grads.weight) EXPECT_EQ(w.cwiseAbs().maxCoeff(), 0.0);
  for (const auto& b : r.param_grads.bias) EXPECT_EQ(b.cwiseAbs().maxCoeff(), 0.0);
}

TEST(DenseNetBackward, UpstreamShapeMismatchThrows) {
  DenseNet net = single_layer(Eigen::Matrix2d::Identity(), Activation::kIdentity);
  EXPECT_THROW(backward(net, Tensor({1, 2}, {1, 2}), Tensor({1, 3}, {1, 2, 3})), ShapeError);
}

// Finite-difference oracle over every parameter and input of a random
// three-layer network, including a skip connection.
TEST(DenseNetBackward, MatchesCentralDifferencesEverywhere) {
  Rng rng(11);
  const std::vector<Eigen::Index> widths{3, 6, 5, 2};
  for (Activation act : {Activation::kTanh, Activation::kRelu}) {
    DenseNet net = make_mlp(widths, act, Activation::kIdentity, rng, {{0, 2}});
    Eigen::VectorXd x = Eigen::VectorXd::Random(3);
    Eigen::VectorXd up = Eigen::VectorXd::Random(2);

    GradCheckReport input_report = grad_check(input_probe(net, up), x, 1e-5);
    EXPECT_LT(input_report.max_relative_error, 1e-6);
    EXPECT_GT(input_report.compared, 0u);

    ForwardTrace trace;
    net.forward(x, trace);
    NetGradients grads = net.zero_gradients();
    net.backward(trace, up, &grads, false);
    auto blocks = net.parameter_blocks();
    auto grad_blocks = grads.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      std::span<double> values = blocks[b].values;
      Eigen::VectorXd p0 = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
      DifferentiableFunction f;
      f.value = [&](const Eigen::VectorXd& p) {
        Eigen::Map<Eigen::VectorXd>(values.data(), p.size()) = p;
        const double out = up.dot(net.forward(x).col(0));
        Eigen::Map<Eigen::VectorXd>(values.data(), p.size()) = p0;
        return out;
      };
      Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(grad_blocks[b].data(), p0.size());
      f.gradient = [g](const Eigen::VectorXd&) { return g; };
      GradCheckReport report = grad_check(f, p0, 1e-5);
      EXPECT_LT(report.max_relative_error, 1e-6) << blocks[b].name << " act " << to_string(act);
    }
  }
}

TEST(DenseNetBackward, RejectsIncompatibleSkipWidths) {
  DenseLayer a{Eigen::MatrixXd::Zero(4, 3), Eigen::VectorXd::Zero(4), Activation::kRelu};
  DenseLayer b{Eigen::MatrixXd::Zero(2, 5), Eigen::VectorXd::Zero(2), Activation::kIdentity};
  EXPECT_THROW(DenseNet({a, b}, {{0, 1}}), ShapeError);  // needs 4 + 3 = 7 columns
  DenseLayer c{Eigen::MatrixXd::Zero(2, 7), Eigen::VectorXd::Zero(2), Activation::kIdentity};
  EXPECT_NO_THROW(DenseNet({a, c}, {{0, 1}}));
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  std::vector<double> p{1.0, -2.0, 3.0};
  std::vector<double> g(3, 0.0);
  std::vector<ParamBlock> params{{"p", p}};
  std::vector<std::span<const double>> grads{g};
  AdamState state = make_adam_state(params);
  adam_step(params, grads, state, 1e-3);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
  EXPECT_EQ(state.step_count, 1);
}

TEST(Adam, FirstStepMovesBySignedLearningRate) {
  // With zero moments, m_hat = g and v_hat = g^2, so the first step is
  // -lr * g / (|g| + eps).
  std::vector<double> p{0.0, 0.0, 0.0};
  std::vector<double> g{0.3, -2.0, 1e-3};
  std::vector<ParamBlock> params{{"p", p}};
  std::vector<std::span<const double>> grads{g};
  AdamState state = make_adam_state(params);
  const double lr = 0.01;
  adam_step(params, grads, state, lr);
  for (int i = 0; i < 3; ++i) {
    const double expected = -lr * g[i] / (std::abs(g[i]) + state.epsilon);
    EXPECT_NEAR(p[i], expected, 1e-15);
    EXPECT_NEAR(std::abs(p[i]), lr, lr * 1e-5);
  }
}

TEST(Adam, FirstStepIsLinearInLearningRate) {
  std::vector<double> p1{0.5, 0.5}, p2{0.5, 0.5};
  std::vector<double> g{0.2, -0.7};
  std::vector<ParamBlock> b1{{"p", p1}}, b2{{"p", p2}};
  std::vector<std::span<const double>> grads{g};
  AdamState s1 = make_adam_state(b1), s2 = make_adam_state(b2);
  adam_step(b1, grads, s1, 1e-3);
  adam_step(b2, grads, s2, 3e-3);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR((p2[i] - 0.5), 3.0 * (p1[i] - 0.5), 1e-15);
}

TEST(Adam, ZeroLearningRateIsNoOp) {
  std::vector<double> p{1.25, -0.5};
  std::vector<double> g{3.0, -4.0};
  std::vector<ParamBlock> params{{"p", p}};
  std::vector<std::span<const double>> grads{g};
  AdamState state = make_adam_state(params);
  for (int k = 0; k < 3; ++k) adam_step(params, grads, state, 0.0);
  EXPECT_EQ(p, (std::vector<double>{1.25, -0.5}));
}

TEST(Adam, NonFiniteGradientNamesTheLayer) {
  std::vector<double> w{1.0}, b{2.0}, w1{3.0};
  std::vector<double> gw{0.1}, gb{0.1}, gw1{std::nan("")};
  std::vector<ParamBlock> params{{"layer0.weight", w}, {"layer0.bias", b}, {"layer1.weight", w1}};
  std::vector<std::span<const double>> grads{gw, gb, gw1};
  AdamState state = make_adam_state(params);
  try {
    adam_step(params, grads, state, 1e-3);
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
  EXPECT_EQ(w[0], 1.0);  // untouched
  EXPECT_EQ(state.step_count, 0);
}

TEST(GradCheck, QuadraticIsExact) {
  DifferentiableFunction f;
  f.value = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  f.gradient = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(2.0 * x); };
  Eigen::VectorXd x(4);
  x << 0.3, -1.7, 2.5, 0.01;
  GradCheckReport r = grad_check(f, x, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-8);
  EXPECT_TRUE(r.kinks.empty());
  EXPECT_EQ(r.compared, 4u);
}

TEST(GradCheck, ReluKinkAtCoordinateIsExcluded) {
  DifferentiableFunction f;
  f.value = [](const Eigen::VectorXd& x) { return std::max(x[0], 0.0) + 2.0 * x[1]; };
  f.gradient = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(2);
    g << (x[0] > 0 ? 1.0 : 0.0), 2.0;
    return g;
  };
  Eigen::VectorXd x(2);
  x << 0.0, 0.7;
  GradCheckReport r = grad_check(f, x, 1e-5);
  ASSERT_EQ(r.kinks.size(), 1u);
  EXPECT_EQ(r.kinks[0], 0);
  EXPECT_EQ(r.compared, 1u);
  EXPECT_LT(r.max_relative_error, 1e-8);
}

TEST(GradCheck, KinkAnywhereInsideProbeIntervalIsDetected) {
  // Kink at distance d from x for several d in (0, h).
  for (double frac : {0.1, 0.2, 1.0 / 3.0, 0.4, 0.6, 0.9}) {
    const double h = 1e-5;
    const double knot = 0.5 + frac * h;
    DifferentiableFunction f;
    f.value = [knot](const Eigen::VectorXd& x) { return std::max(x[0] - knot, 0.0); };
    f.gradient = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(1).eval(); };
    Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.5);
    GradCheckReport r = grad_check(f, x, h);
    EXPECT_EQ(r.kinks.size(), 1u) << "frac " << frac;
  }
}

TEST(GradCheck, DetectsWrongGradient) {
  DifferentiableFunction f;
  f.value = [](const Eigen::VectorXd& x) { return std::sin(x[0]) * x[1]; };
  f.gradient = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(2);
    g << std::cos(x[0]) * x[1] * 1.001, std::sin(x[0]);
    return g;
  };
  Eigen::VectorXd x(2);
  x << 0.4, 1.3;
  GradCheckReport r = grad_check(f, x, 1e-5);
  EXPECT_GT(r.max_relative_error, 5e-4);
  EXPECT_EQ(r.worst_component, 0);
}

}  // namespace
}  // namespace cardioflow::diff
