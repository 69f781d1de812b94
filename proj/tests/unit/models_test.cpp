#include <gtest/gtest.h>

#include <cmath>

#include "cardioflow/diff/grad_check.hpp"
#include "cardioflow/error.hpp"
#include "cardioflow/models/code_table.hpp"
#include "cardioflow/models/grad_suite.hpp"
#include "cardioflow/models/networks.hpp"

namespace cardioflow::models {
namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

ShapeNetConfig small_shape(ShapeInit init = ShapeInit::kHe) {
  ShapeNetConfig c;
  c.code_dim = 8;
  c.hidden = 32;
  c.hidden_layers = 4;
  c.skip_layer = 2;
  c.init = init;
  return c;
}

MotionNetConfig small_motion() {
  MotionNetConfig c;
  c.code_dim = 6;
  c.hidden = 16;
  c.hidden_layers = 3;
  return c;
}

MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  MatrixXd m(r, c);
  for (auto& v : m.reshaped()) v = d(rng);
  return m;
}

TEST(ShapeNet, DefaultArchitectureWidths) {
  Rng rng(1);
  ShapeNet net(ShapeNetConfig{}, rng);
  EXPECT_EQ(net.net().input_width(), 259);
  EXPECT_EQ(net.net().output_width(), 1);
  EXPECT_EQ(net.net().num_layers(), 9u);
  EXPECT_EQ(net.net().layers()[3].weight.rows(), 512 - 259);
  EXPECT_EQ(net.net().layers()[4].weight.cols(), 512);
}

TEST(ShapeNet, RejectsCodeLengthMismatch) {
  Rng rng(2);
  ShapeNet net(small_shape(), rng);
  EXPECT_THROW(net.forward(MatrixXd::Zero(7, 4), MatrixXd::Zero(3, 4)), ShapeError);
  EXPECT_THROW(net.forward(MatrixXd::Zero(8, 4), MatrixXd::Zero(3, 5)), ShapeError);
}

TEST(ShapeNet, ForwardIsPure) {
  Rng rng(3);
  ShapeNet net(small_shape(), rng);
  const MatrixXd codes = random_matrix(8, 20, rng), pts = random_matrix(3, 20, rng);
  const RowVectorXd a = net.forward(codes, pts);
  const RowVectorXd b = net.forward(codes, pts);
  EXPECT_EQ(a, b);
}

TEST(ShapeNet, GeometricInitApproximatesSphere) {
  ShapeNetConfig c = small_shape(ShapeInit::kGeometric);
  c.hidden = 256;
  Rng rng(4);
  ShapeNet net(c, rng);
  MatrixXd pts(3, 2);
  pts << 0.0, 0.0, 0.0, 0.0, 0.0, 0.95;
  const RowVectorXd sdf = net.forward(MatrixXd::Zero(8, 2), pts);
  EXPECT_LT(sdf[0], 0.0);
  EXPECT_GT(sdf[1], 0.0);
}

TEST(MotionNet, FreshNetworkIsIdentity) {
  Rng rng(5);
  MotionNet net(MotionNetConfig{}, rng);
  EXPECT_EQ(net.net().input_width(), 1 + 3 + 128);
  const MatrixXd pts = random_matrix(3, 10, rng);
  const MatrixXd codes = random_matrix(128, 10, rng);
  const RowVectorXd tau = random_matrix(1, 10, rng).cwiseAbs();
  EXPECT_TRUE(net.forward(codes, pts, tau).isZero(0.0));
  EXPECT_EQ(deform_to_ed(net, codes, pts, tau), pts);
}

TEST(MotionNet, RejectsMismatchedInputs) {
  Rng rng(6);
  MotionNet net(small_motion(), rng);
  EXPECT_THROW(net.forward(MatrixXd::Zero(5, 2), MatrixXd::Zero(3, 2), RowVectorXd::Zero(2)), ShapeError);
  EXPECT_THROW(net.forward(MatrixXd::Zero(6, 2), MatrixXd::Zero(3, 2), RowVectorXd::Zero(3)), ShapeError);
}

TEST(MotionNet, BiasOnlyOutputTranslatesExactly) {
  Rng rng(7);
  MotionNet net(small_motion(), rng);
  const Eigen::Vector3d b(0.125, -0.25, 0.5);
  net.net().layers().back().bias = b;
  const MatrixXd pts = random_matrix(3, 12, rng);
  const MatrixXd moved = deform_to_ed(net, random_matrix(6, 12, rng), pts, RowVectorXd::Constant(12, 0.3));
  EXPECT_EQ(moved, pts.colwise() + b);
}

TEST(ComposedSdf, IdentityMotionMatchesShapeBitwise) {
  Rng rng(8);
  ShapeNet shape(small_shape(), rng);
  MotionNet motion(small_motion(), rng);
  const MatrixXd pts = random_matrix(3, 30, rng), sc = random_matrix(8, 30, rng), mc = random_matrix(6, 30, rng);
  const RowVectorXd tau = RowVectorXd::LinSpaced(30, 0.0, 1.0);
  EXPECT_EQ(ComposedSdf(motion, shape).forward(mc, sc, pts, tau), shape.forward(sc, pts));
}

TEST(ComposedSdf, EqualsShapeOfDeformedPoints) {
  Rng rng(9);
  ShapeNet shape(small_shape(), rng);
  MotionNet motion(small_motion(), rng);
  motion.net().layers().back().weight = random_matrix(3, 16, rng, 0.2);
  const MatrixXd pts = random_matrix(3, 30, rng), sc = random_matrix(8, 30, rng), mc = random_matrix(6, 30, rng);
  const RowVectorXd tau = RowVectorXd::LinSpaced(30, 0.0, 1.0);
  const RowVectorXd direct = shape.forward(sc, deform_to_ed(motion, mc, pts, tau));
  EXPECT_EQ(ComposedSdf(motion, shape).forward(mc, sc, pts, tau), direct);
}

TEST(PositionalEncoding, BackwardMatchesFiniteDifferences) {
  Rng rng(10);
  const Eigen::VectorXd x = random_matrix(3, 1, rng).col(0);
  const MatrixXd w = random_matrix(3 * 9, 1, rng);
  diff::DifferentiableFunction f;
  f.value = [&](const Eigen::VectorXd& v) { return (w.transpose() * positional_encoding(v, 4))(0, 0); };
  f.gradient = [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(positional_encoding_backward(v, w, 4)); };
  EXPECT_LT(diff::grad_check(f, x, 1e-6).max_relative_error, 1e-7);
  EXPECT_EQ(positional_encoding(x, 0), MatrixXd(x));
}

TEST(GradSuite, SmallNetworksPass) {
  GradSuiteOptions o;
  o.tuples = 10;
  o.weights_per_block = 3;
  const GradSuiteReport r = run_grad_suite(small_shape(), small_motion(), o);
  ASSERT_EQ(r.entries.size(), 6u);
  for (const auto& e : r.entries) {
    EXPECT_GT(e.compared, 0u) << e.target << " " << e.variables;
    EXPECT_LT(e.max_relative_error, 1e-5) << e.target << " " << e.variables;
  }
}

TEST(GradSuite, PositionalEncodingPasses) {
  ShapeNetConfig s = small_shape();
  s.positional_frequencies = 3;
  MotionNetConfig m = small_motion();
  m.positional_frequencies = 2;
  GradSuiteOptions o;
  o.tuples = 5;
  EXPECT_LT(run_grad_suite(s, m, o).max_relative_error, 1e-5);
}

TEST(GradSuite, InjectedFaultIsDetected) {
  GradSuiteOptions o;
  o.tuples = 3;
  o.inject_fault = true;
  const GradSuiteReport r = run_grad_suite(small_shape(), small_motion(), o);
  for (const auto& e : r.entries) EXPECT_GT(e.max_relative_error, 1e-5) << e.target << " " << e.variables;
}

TEST(CodeTable, RejectsSecondShapeCodeForSubject) {
  CodeTable table(4, 3);
  Rng rng(11);
  table.add_random_subject("a", 5, rng);
  EXPECT_THROW(table.add_subject("a", Eigen::VectorXd::Zero(4), 5), ShapeError);
  EXPECT_THROW(table.add_random_subject("a", 5, rng), ShapeError);
  EXPECT_EQ(table.size(), 1u);
}

TEST(CodeTable, OneMotionCodePerPhase) {
  CodeTable table(4, 3);
  Rng rng(12);
  const int i = table.add_random_subject("s0", 25, rng);
  EXPECT_EQ(table.phases(i), 25);
  EXPECT_EQ(table.motion_codes(i).rows(), 3);
  EXPECT_THROW(table.motion_code(i, 25), ShapeError);
  EXPECT_THROW(table.set_motion_codes(i, MatrixXd::Zero(3, 24)), ShapeError);
  EXPECT_THROW(table.add_subject("s1", Eigen::VectorXd::Zero(5), 3), ShapeError);
  EXPECT_THROW(table.index("missing"), ShapeError);
}

TEST(CodeTable, RandomCodesHaveRequestedSpread) {
  CodeTable table(256, 128);
  Rng rng(13);
  const int i = table.add_random_subject("s", 25, rng, 0.01);
  const MatrixXd& m = table.motion_codes(i);
  const double var = m.squaredNorm() / static_cast<double>(m.size());
  // 3200 draws: sample variance of N(0, 1e-4) within 4 standard errors.
  EXPECT_NEAR(var, 1e-4, 4.0 * 1e-4 * std::sqrt(2.0 / 3200.0));
}

}  // namespace
}  // namespace cardioflow::models
