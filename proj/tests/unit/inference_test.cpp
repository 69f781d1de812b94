#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "cardioflow/error.hpp"
#include "cardioflow/inference/align.hpp"
#include "cardioflow/inference/infer.hpp"
#include "cardioflow/inference/motion_pca.hpp"
#include "cardioflow/inference/reconstruct.hpp"
#include "cardioflow/inference/tracking.hpp"
#include "cardioflow/geom/signed_distance.hpp"
#include "cardioflow/synth/generator.hpp"
#include "../support/shapes.hpp"

namespace cardioflow::inference {
namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

models::ShapeNetConfig tiny_shape() {
  models::ShapeNetConfig c;
  c.code_dim = 4;
  c.hidden = 32;
  c.hidden_layers = 3;
  c.skip_layer = 2;
  return c;
}

models::MotionNetConfig tiny_motion() {
  models::MotionNetConfig c;
  c.code_dim = 3;
  c.hidden = 16;
  c.hidden_layers = 2;
  return c;
}

// Motion net with a small random output layer, so the deformation is a
// smooth non-trivial field.
models::MotionNet random_motion(std::uint64_t seed, double scale) {
  Rng rng(seed);
  models::MotionNet m(tiny_motion(), rng);
  std::uniform_real_distribution<double> d(-scale, scale);
  for (auto& v : m.net().layers().back().weight.reshaped()) v = d(rng);
  for (auto& v : m.net().layers().back().bias) v = d(rng);
  return m;
}

std::uint64_t weight_checksum(const diff::DenseNet& net) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& l : net.layers()) {
    for (const double* p : {l.weight.data(), l.bias.data()}) {
      const Eigen::Index n = p == l.weight.data() ? l.weight.size() : l.bias.size();
      for (Eigen::Index i = 0; i < n; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, p + i, sizeof bits);
        h = (h ^ bits) * 1099511628211ull;
      }
    }
  }
  return h;
}

CanonicalObservation sphere_observation(int phases, double radius, int points) {
  CanonicalObservation obs;
  obs.sequence_length = phases;
  Rng rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int p = 0; p < phases; ++p) {
    obs.phases.push_back(p);
    MatrixXd m(3, points);
    for (int i = 0; i < points; ++i) {
      const Eigen::Vector3d v(n(rng), n(rng), 0.3 * n(rng));
      m.col(i) = radius * v.normalized();
    }
    obs.points.push_back(m);
  }
  return obs;
}

TEST(Reconstruct, AnalyticSphereWithinTwoCells) {
  ExtractionOptions o;
  o.grid_res = 128;
  const geom::ScalarGrid grid = sample_field([](const MatrixXd& x) { return RowVectorXd(x.colwise().norm().array() - 0.6); }, o);
  const geom::TriMesh mesh = geom::marching_cubes(grid);
  ASSERT_FALSE(mesh.empty());
  double worst = 0.0;
  for (const auto& v : mesh.vertices) worst = std::max(worst, std::abs(v.norm() - 0.6));
  EXPECT_LT(worst, 2.0 * grid.spacing.x());
}

TEST(Reconstruct, NarrowBandMatchesFullGrid) {
  const auto field = [](const MatrixXd& x) {
    RowVectorXd out(x.cols());
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      const Eigen::Vector3d p = x.col(i);
      out[i] = std::max(p.norm() - 0.7, 0.4 - (p - Eigen::Vector3d(0.1, 0, 0)).norm());
    }
    return out;
  };
  ExtractionOptions banded;
  banded.grid_res = 48;
  ExtractionOptions full = banded;
  full.coarse_res = 48;
  const geom::TriMesh a = geom::marching_cubes(sample_field(field, banded));
  const geom::TriMesh b = geom::marching_cubes(sample_field(field, full));
  ASSERT_EQ(a.faces.size(), b.faces.size());
  for (std::size_t i = 0; i < a.vertices.size(); ++i) EXPECT_LT((a.vertices[i] - b.vertices[i]).norm(), 1e-12);
}

TEST(Reconstruct, ConstantFieldGivesEmptyMesh) {
  Rng rng(2);
  models::ShapeNet shape(tiny_shape(), rng);
  for (auto& l : shape.net().layers()) l.weight.setZero();
  shape.net().layers().back().bias.setConstant(0.3);
  bool empty = false;
  ExtractionOptions o;
  o.grid_res = 20;
  const auto mesh = reconstruct_shape(shape, VectorXd::Zero(4), o, &empty);
  EXPECT_TRUE(empty);
  EXPECT_TRUE(mesh.empty());
}

TEST(Reconstruct, RepeatedCallsIdentical) {
  Rng rng(3);
  models::ShapeNetConfig c = tiny_shape();
  c.init = models::ShapeInit::kGeometric;
  c.hidden = 64;
  const models::ShapeNet shape(c, rng);
  const models::MotionNet motion = random_motion(4, 0.05);
  ExtractionOptions o;
  o.grid_res = 24;
  const auto a = reconstruct_phase(motion, shape, VectorXd::Zero(3), VectorXd::Zero(4), 0.0, o);
  const auto b = reconstruct_phase(motion, shape, VectorXd::Zero(3), VectorXd::Zero(4), 0.0, o);
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(a.vertices, b.vertices);
  EXPECT_EQ(a.faces, b.faces);
}

TEST(Tracking, ZeroDeformationReturnsInput) {
  Rng rng(5);
  const models::MotionNet motion(tiny_motion(), rng);
  MatrixXd x = MatrixXd::Random(3, 20);
  const TrackResult r = track_points(motion, VectorXd::Zero(3), 0.2, VectorXd::Ones(3), 0.6, x);
  EXPECT_EQ(r.points, x);
  EXPECT_TRUE(r.all_converged());
}

TEST(Tracking, SamePhaseIsIdentity) {
  const models::MotionNet motion = random_motion(6, 0.1);
  const MatrixXd x = 0.8 * MatrixXd::Random(3, 50);
  const VectorXd c = VectorXd::Constant(3, 0.2);
  const TrackResult r = track_points(motion, c, 0.4, c, 0.4, x);
  EXPECT_TRUE(r.all_converged());
  EXPECT_LT((r.points - x).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Tracking, InvertsForwardDeformation) {
  const models::MotionNet motion = random_motion(7, 0.1);
  const MatrixXd y = 0.8 * MatrixXd::Random(3, 50);
  const VectorXd c = VectorXd::Constant(3, -0.1);
  const MatrixXd target = models::deform_to_ed(motion, c.replicate(1, 50), y, RowVectorXd::Constant(50, 0.3));
  const TrackResult r = invert_deformation(motion, c, 0.3, target, target);
  EXPECT_TRUE(r.all_converged());
  EXPECT_LE(r.residual.maxCoeff(), 1e-6);
  EXPECT_LT((r.points - y).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Infer, ZeroIterationsKeepsInitialCodes) {
  Rng rng(8);
  const models::ShapeNet shape(tiny_shape(), rng);
  const models::MotionNet motion(tiny_motion(), rng);
  const auto obs = sphere_observation(3, 0.5, 20);
  InferenceConfig c;
  c.iterations = 0;
  const InferredCodes a = infer_codes(obs, motion, shape, c);
  const InferredCodes b = infer_codes(obs, motion, shape, c);
  EXPECT_TRUE(a.loss.empty());
  EXPECT_EQ(a.shape, b.shape);
  EXPECT_EQ(a.motion, b.motion);
  EXPECT_LT(a.shape.cwiseAbs().maxCoeff(), 0.05);
  EXPECT_GT(a.shape.norm(), 0.0);
  EXPECT_EQ(a.motion.cols(), 3);
}

TEST(Infer, WeightsUntouchedAndResidualDrops) {
  Rng rng(9);
  models::ShapeNetConfig sc = tiny_shape();
  sc.init = models::ShapeInit::kGeometric;
  sc.init_radius = 0.4;
  sc.hidden = 64;
  const models::ShapeNet shape(sc, rng);
  const models::MotionNet motion = random_motion(10, 0.05);
  const auto before_s = weight_checksum(shape.net()), before_m = weight_checksum(motion.net());
  // Observations are points on the zero set of the model at known codes.
  const VectorXd true_shape = VectorXd::Constant(4, 0.05), true_motion = VectorXd::Constant(3, 0.1);
  ExtractionOptions eo;
  eo.grid_res = 32;
  CanonicalObservation obs;
  obs.sequence_length = 4;
  for (int p : {0, 2}) {
    const auto mesh = reconstruct_phase(motion, shape, true_motion, true_shape, p / 4.0, eo);
    ASSERT_FALSE(mesh.empty());
    MatrixXd m(3, static_cast<Eigen::Index>(mesh.vertices.size()));
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = mesh.vertices[i];
    obs.phases.push_back(p);
    obs.points.push_back(m);
  }
  InferenceConfig c;
  c.iterations = 200;
  InferenceConfig none;
  none.iterations = 0;
  const double start = infer_codes(obs, motion, shape, none).mean_abs_sdf;
  const InferredCodes r = infer_codes(obs, motion, shape, c);
  EXPECT_EQ(weight_checksum(shape.net()), before_s);
  EXPECT_EQ(weight_checksum(motion.net()), before_m);
  EXPECT_FALSE(r.diverged);
  EXPECT_EQ(r.loss.size(), 200u);
  EXPECT_LT(r.mean_abs_sdf, 0.5 * start);
}

TEST(Infer, RejectsEmptyObservation) {
  Rng rng(11);
  const models::ShapeNet shape(tiny_shape(), rng);
  const models::MotionNet motion(tiny_motion(), rng);
  EXPECT_THROW(infer_codes(CanonicalObservation{}, motion, shape, {}), DatasetError);
}

TEST(Align, MissingEndDiastoleRejected) {
  const synth::Subject s = synth::generate_subject(synth::SubjectParams{});
  geom::SliceObservation obs = synth::make_cmr_observations(s);
  geom::SliceObservation late;
  late.planes = obs.planes;
  late.sequence_length = obs.sequence_length;
  for (std::size_t i = 0; i < obs.points.size(); ++i) {
    if (obs.points.phase[i] == 0) continue;
    late.points.points.push_back(obs.points.points[i]);
    late.points.phase.push_back(obs.points.phase[i]);
    late.points.slice.push_back(obs.points.slice[i]);
  }
  EXPECT_THROW(align_observation(late, s.phases[0], edspace::NormalizationSpec{}), RegistrationError);
}

TEST(Align, RecoversPoseOfObservation) {
  const synth::Subject s = synth::generate_subject(synth::SubjectParams{});
  synth::CmrOptions o;
  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.4, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  o.pose = geom::SimilarityTransform::from_parts(1.0, r, Eigen::Vector3d(5, -7, 11));
  const auto obs = synth::make_cmr_observations(s, o);
  const CanonicalFrame frame = align_observation(obs, s.phases[0], edspace::NormalizationSpec{}, true);
  // A near-symmetric ventricle admits more than one fitting pose, so check
  // that the registered contours land on the ED shell rather than the pose.
  const auto ed = obs.phase_points(0);
  const geom::SignedDistanceField sdf(s.phases[0]);
  double worst = 0.0;
  for (const auto& p : ed.points) worst = std::max(worst, std::abs(sdf(frame.registration.apply(p))));
  EXPECT_LT(worst, 0.5);
  const CanonicalObservation c = to_canonical(obs, frame);
  EXPECT_EQ(static_cast<int>(c.phases.size()), obs.sequence_length);
  EXPECT_EQ(select_phases(c, {0, 9}).phases, (std::vector<int>{0, 9}));
  EXPECT_THROW(select_phases(select_phases(c, {0}), {1}), DatasetError);
}

std::vector<MatrixXd> random_sequences(int n, int dim, int phases, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<MatrixXd> out;
  for (int s = 0; s < n; ++s) {
    MatrixXd m(dim, phases);
    for (auto& v : m.reshaped()) v = d(rng);
    out.push_back(m);
  }
  return out;
}

TEST(MotionPca, TwoSequencesGiveMidpointMean) {
  const auto seqs = random_sequences(2, 4, 5, 1);
  const MotionPca m = build_motion_pca(seqs);
  EXPECT_EQ(m.components(), 1);
  EXPECT_LT((m.reshape(m.pca.mean) - 0.5 * (seqs[0] + seqs[1])).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MotionPca, FullRankRoundTrip) {
  const auto seqs = random_sequences(6, 4, 5, 2);
  const MotionPca m = build_motion_pca(seqs, 5);
  for (const auto& s : seqs) {
    const VectorXd flat = m.flatten(s);
    const double rmse = std::sqrt((m.pca.reconstruct(m.pca.project(flat)) - flat).squaredNorm() / flat.size());
    EXPECT_LT(rmse, 1e-9);
  }
}

TEST(MotionPca, TruncationErrorEqualsTailEnergy) {
  const auto seqs = random_sequences(8, 3, 5, 3);
  const MotionPca m = build_motion_pca(seqs, -1, 0.95);
  ASSERT_LT(m.components(), 7);
  double sq = 0.0;
  for (const auto& s : seqs) {
    const VectorXd flat = m.flatten(s);
    sq += (m.pca.reconstruct(m.pca.project(flat)) - flat).squaredNorm();
  }
  const double rmse = std::sqrt(sq / (15.0 * 8.0));
  const auto& sv = m.pca.spectrum;
  const double tail = sv.tail(sv.size() - m.components()).squaredNorm();
  EXPECT_NEAR(rmse, std::sqrt(tail / (15.0 * 8.0)), 1e-9);
  EXPECT_NEAR(rmse, m.pca.truncation_rmse(), 1e-9);
}

TEST(MotionPca, RaggedSequencesRejected) {
  auto seqs = random_sequences(3, 4, 5, 4);
  seqs[1] = MatrixXd::Zero(4, 6);
  EXPECT_THROW(build_motion_pca(seqs), DatasetError);
  EXPECT_THROW(build_motion_pca(random_sequences(3, 4, 5, 4), 3), ShapeError);
}

TEST(MotionPca, FullObservationReproducesTrainingRow) {
  const auto seqs = random_sequences(6, 4, 5, 5);
  const MotionPca m = build_motion_pca(seqs, 5);
  std::vector<ObservedCode> obs;
  for (int p = 0; p < 5; ++p) obs.push_back({p / 5.0, seqs[2].col(p)});
  const Interpolation r = interpolate_motion(m, obs);
  EXPECT_FALSE(r.rank_deficient);
  // Compare the model reconstruction before observed rows are substituted.
  EXPECT_LT((m.reshape(m.pca.reconstruct(r.coefficients)) - seqs[2]).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((r.codes - seqs[2]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MotionPca, ObservedRowsReplacedAndRankFlagged) {
  const auto seqs = random_sequences(6, 2, 5, 6);
  const MotionPca m = build_motion_pca(seqs, 5);
  const VectorXd c0 = VectorXd::Constant(2, 0.3);
  const Interpolation r = interpolate_motion(m, {{0.0, c0}});
  EXPECT_TRUE(r.rank_deficient);  // 2 equations, 5 unknowns
  EXPECT_TRUE(r.low_confidence);
  EXPECT_EQ(VectorXd(r.codes.col(0)), c0);
  EXPECT_TRUE(r.codes.allFinite());
}

TEST(MotionPca, MisfitSpreadBetweenObservations) {
  const auto seqs = random_sequences(6, 3, 5, 12);
  const MotionPca m = build_motion_pca(seqs, 1);
  Rng rng(13);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  VectorXd a(3), b(3);
  for (int i = 0; i < 3; ++i) a[i] = d(rng), b[i] = d(rng);
  const Interpolation r = interpolate_motion(m, {{0.0, a}, {0.4, b}});
  const MatrixXd fit = m.reshape(m.pca.reconstruct(r.coefficients));
  const VectorXd ra = a - fit.col(0), rb = b - fit.col(2);
  EXPECT_GT(ra.norm(), 1e-3);  // observations are off the one-mode subspace
  EXPECT_EQ(VectorXd(r.codes.col(0)), a);
  EXPECT_EQ(VectorXd(r.codes.col(2)), b);
  const auto near = [](const VectorXd& x, const VectorXd& y) { return (x - y).cwiseAbs().maxCoeff() < 1e-12; };
  EXPECT_TRUE(near(r.codes.col(1), fit.col(1) + 0.5 * ra + 0.5 * rb));
  EXPECT_TRUE(near(r.codes.col(3), fit.col(3) + (2.0 / 3.0) * rb + (1.0 / 3.0) * ra));
  EXPECT_TRUE(near(r.codes.col(4), fit.col(4) + (1.0 / 3.0) * rb + (2.0 / 3.0) * ra));
}

TEST(MotionPca, StrictModeRegressesRawCodes) {
  const auto seqs = random_sequences(4, 2, 5, 7);
  const MotionPca m = build_motion_pca(seqs, 3);
  std::vector<ObservedCode> obs;
  for (int p = 0; p < 5; ++p) obs.push_back({p / 5.0, seqs[1].col(p)});
  const Interpolation centered = interpolate_motion(m, obs, true);
  const Interpolation strict = interpolate_motion(m, obs, false);
  const VectorXd expected = m.pca.basis.transpose() * m.flatten(seqs[1]);
  EXPECT_LT((strict.coefficients - expected).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_GT((strict.coefficients - centered.coefficients).norm(), 1e-6);
}

TEST(MotionPca, TwoPhaseFallsBackWithoutEndSystole) {
  const auto seqs = random_sequences(5, 2, 10, 8);
  const MotionPca m = build_motion_pca(seqs, 2);
  const Interpolation both = interpolate_two_phase(m, seqs[0].col(0), VectorXd(seqs[0].col(4)), 4);
  EXPECT_FALSE(both.low_confidence);
  EXPECT_EQ(both.codes.cols(), 10);
  const Interpolation one = interpolate_two_phase(m, seqs[0].col(0), std::nullopt, 4);
  EXPECT_TRUE(one.low_confidence);
  EXPECT_THROW(interpolate_two_phase(m, seqs[0].col(0), VectorXd(seqs[0].col(4)), 10), DatasetError);
}

TEST(MotionPca, FractionalObservationUsesInterpolatedRows) {
  const auto seqs = random_sequences(4, 2, 4, 9);
  const MotionPca m = build_motion_pca(seqs, 3);
  // Observe a training sequence at tau halfway between phases 1 and 2.
  const VectorXd mid = 0.5 * (seqs[3].col(1) + seqs[3].col(2));
  std::vector<ObservedCode> obs{{0.0, seqs[3].col(0)}, {0.375, mid}, {0.75, seqs[3].col(3)}};
  const Interpolation r = interpolate_motion(m, obs);
  EXPECT_LT((r.codes - seqs[3]).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(MotionPca, ResampleIdentityAndHalfway) {
  const MatrixXd codes = MatrixXd::Random(3, 5);
  EXPECT_EQ(resample_codes(codes, 5), codes);
  const MatrixXd up = resample_codes(codes, 10);
  EXPECT_LT((up.col(3) - 0.5 * (codes.col(1) + codes.col(2))).norm(), 1e-15);
}

}  // namespace
}  // namespace cardioflow::inference
