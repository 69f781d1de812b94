#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "cardioflow/edspace/ssm.hpp"
#include "cardioflow/error.hpp"
#include "cardioflow/geom/mesh.hpp"
#include "cardioflow/synth/generator.hpp"

using namespace cardioflow;
using namespace cardioflow::edspace;
using geom::TriMesh;
using geom::Vec3;

namespace {

const Atlas& shells20() {
  static const Atlas atlas = synth::make_atlas(20, 7);
  return atlas;
}

double vertex_rmse(const TriMesh& a, const TriMesh& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.vertices.size(); ++i) s += (a.vertices[i] - b.vertices[i]).squaredNorm();
  return std::sqrt(s / (3.0 * a.vertices.size()));
}

}  // namespace

TEST(Pca, BasisOrthonormalAndSpectrumSorted) {
  const Ssm ssm = build_ssm(shells20(), 10);
  const Eigen::MatrixXd gram = ssm.pca.basis.transpose() * ssm.pca.basis;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-9);
  for (Eigen::Index i = 1; i < ssm.pca.spectrum.size(); ++i) {
    EXPECT_LE(ssm.pca.spectrum[i], ssm.pca.spectrum[i - 1]);
  }
}

TEST(Ssm, TwoShapeAtlas) {
  Atlas atlas;
  atlas.shapes = {shells20().shapes[0], shells20().shapes[1]};
  const Ssm ssm = build_ssm(atlas);
  ASSERT_EQ(ssm.modes(), 1);
  const TriMesh mean = ssm.mean_shape();
  for (std::size_t i = 0; i < mean.vertices.size(); ++i) {
    EXPECT_LT((mean.vertices[i] - 0.5 * (atlas.shapes[0].vertices[i] + atlas.shapes[1].vertices[i])).norm(), 1e-12);
  }
  // The single mode is parallel to the difference of the two shapes.
  const Eigen::VectorXd diff = flatten(atlas.shapes[1]) - flatten(atlas.shapes[0]);
  EXPECT_NEAR(std::abs(ssm.pca.basis.col(0).dot(diff.normalized())), 1.0, 1e-12);
}

TEST(Ssm, FullRankRoundTrip) {
  const Ssm ssm = build_ssm(shells20(), 19);
  for (const auto& shape : shells20().shapes) {
    EXPECT_LT(vertex_rmse(sample_shape(ssm, project_shape(ssm, shape)), shape), 1e-9);
  }
}

TEST(Ssm, TruncationErrorMatchesTailEnergy) {
  const Ssm ssm = build_ssm(shells20(), 5);
  double sq = 0.0;
  std::size_t count = 0;
  for (const auto& shape : shells20().shapes) {
    const TriMesh rec = sample_shape(ssm, project_shape(ssm, shape));
    for (std::size_t i = 0; i < shape.vertices.size(); ++i) sq += (rec.vertices[i] - shape.vertices[i]).squaredNorm();
    count += 3 * shape.vertices.size();
  }
  const double tail = ssm.pca.spectrum.tail(ssm.pca.spectrum.size() - 5).squaredNorm();
  const double expected = std::sqrt(tail / static_cast<double>(count));
  EXPECT_NEAR(std::sqrt(sq / count), expected, 1e-9);
  EXPECT_NEAR(ssm.pca.truncation_rmse(), expected, 1e-9);
}

TEST(Ssm, ZeroCoefficientsGiveMean) {
  const Ssm ssm = build_ssm(shells20(), 5);
  const TriMesh m = sample_shape(ssm, Eigen::VectorXd::Zero(5));
  EXPECT_EQ(vertex_rmse(m, ssm.mean_shape()), 0.0);
}

TEST(Ssm, FirstModeLinearity) {
  const Ssm ssm = build_ssm(shells20(), 5);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(5);
  a[0] = 3.5;
  const TriMesh m = sample_shape(ssm, a);
  const auto mean = ssm.mean_shape();
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    const Vec3 mode = ssm.pca.basis.col(0).segment<3>(3 * i);
    EXPECT_LT((m.vertices[i] - (mean.vertices[i] + 3.5 * mode)).norm(), 1e-12);
  }
}

TEST(Ssm, AffineInCoefficients) {
  const Ssm ssm = build_ssm(shells20(), 6);
  Rng rng(3);
  std::normal_distribution<double> g(0.0, 20.0);
  Eigen::VectorXd a1(6), a2(6);
  for (int i = 0; i < 6; ++i) {
    a1[i] = g(rng);
    a2[i] = g(rng);
  }
  const auto s1 = sample_shape(ssm, a1), s2 = sample_shape(ssm, a2), s0 = sample_shape(ssm, Eigen::VectorXd::Zero(6));
  const auto s12 = sample_shape(ssm, a1 + a2);
  for (std::size_t i = 0; i < s1.vertices.size(); ++i) {
    EXPECT_LT((s1.vertices[i] + s2.vertices[i] - s0.vertices[i] - s12.vertices[i]).norm(), 1e-9);
  }
}

TEST(Ssm, HeldOutProjectionWithinTruncationScale) {
  const Ssm ssm = build_ssm(shells20(), 10);
  Rng rng = make_rng(99, "held_out");
  const TriMesh held = synth::ed_mesh(synth::sample_params(rng));
  const TriMesh rec = sample_shape(ssm, project_shape(ssm, held));
  // Reconstruction from the projection is the orthogonal projection, so it
  // can never be farther than the mean shape.
  EXPECT_LE(vertex_rmse(rec, held), vertex_rmse(ssm.mean_shape(), held));
}

TEST(Ssm, TopologyMismatchRejected) {
  Atlas atlas;
  atlas.shapes = {shells20().shapes[0], shells20().shapes[1]};
  std::swap(atlas.shapes[1].faces[0], atlas.shapes[1].faces[1]);
  EXPECT_THROW(build_ssm(atlas), AtlasError);
  atlas.shapes.pop_back();
  EXPECT_THROW(build_ssm(atlas), AtlasError);
}

TEST(Ssm, ComponentCountChecked) {
  EXPECT_THROW(build_ssm(shells20(), 20), AtlasError);
  EXPECT_EQ(build_ssm(shells20()).modes(), 19);
}

TEST(Augment, ZeroSpreadReplicatesProjections) {
  const Ssm ssm = build_ssm(shells20(), 8);
  for (const auto& a : augment(ssm, 50, 0.0, 4)) {
    bool found = false;
    for (Eigen::Index c = 0; c < ssm.pca.coefficients.cols(); ++c) found = found || a == ssm.pca.coefficients.col(c);
    EXPECT_TRUE(found);
  }
}

TEST(Augment, DeterministicUnderSeed) {
  const Ssm ssm = build_ssm(shells20(), 8);
  const auto a = augment(ssm, 30, 0.5, 11), b = augment(ssm, 30, 0.5, 11), c = augment(ssm, 30, 0.5, 12);
  for (int i = 0; i < 30; ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_NE(a[0], c[0]);
}

TEST(Augment, MeanConvergesToSampleCoefficients) {
  const Ssm ssm = build_ssm(shells20(), 6);
  const double spread = 0.8;
  const auto draws = augment_labeled(ssm, 100000, spread, 5);
  const Eigen::VectorXd stddev = spread * ssm.pca.singular_values() / std::sqrt(20.0);
  for (Eigen::Index c : {0, 7, 19}) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(6);
    int n = 0;
    for (const auto& d : draws) {
      if (d.source != c) continue;
      sum += d.alpha;
      ++n;
    }
    ASSERT_GT(n, 4000);
    const Eigen::VectorXd mean = sum / n;
    // 18 comparisons: the two-sided 3-sigma family rate (0.27%) split
    // Bonferroni-style gives a per-comparison critical value of 3.9.
    for (int i = 0; i < 6; ++i) {
      EXPECT_LT(std::abs(mean[i] - ssm.pca.coefficients(i, c)), 3.9 * stddev[i] / std::sqrt(n)) << c << " " << i;
    }
  }
}

TEST(Augment, ShapesStayValid) {
  const Ssm ssm = build_ssm(shells20());
  const auto spec = make_normalization(ssm);
  for (const auto& a : augment(ssm, 12, 1.0, 8)) {
    const TriMesh m = sample_shape(ssm, a);
    EXPECT_TRUE(geom::is_watertight(m));
    EXPECT_FALSE(geom::has_self_intersections(m));
    for (const auto& v : normalize(m, spec).vertices) EXPECT_LT(v.norm(), 1.0);
  }
}

TEST(Normalization, MeanShapeOnRadius) {
  const Ssm ssm = build_ssm(shells20());
  const auto spec = make_normalization(ssm);
  double far = 0.0;
  for (const auto& v : normalize(ssm.mean_shape(), spec).vertices) far = std::max(far, v.norm());
  EXPECT_NEAR(far, 0.9, 1e-12);
}

TEST(Normalization, RoundTrip) {
  const Ssm ssm = build_ssm(shells20());
  const auto spec = make_normalization(ssm);
  const TriMesh& m = shells20().shapes[3];
  const TriMesh back = denormalize(normalize(m, spec), spec);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) EXPECT_LT((back.vertices[i] - m.vertices[i]).norm(), 1e-12 * 100);
}

TEST(Normalization, EnlargedShapeStillInsideBall) {
  const Ssm ssm = build_ssm(shells20());
  const auto spec = make_normalization(ssm);
  TriMesh big = ssm.mean_shape();
  for (auto& v : big.vertices) v = spec.center + 1.1 * (v - spec.center);
  double far = 0.0;
  for (const auto& v : normalize(big, spec).vertices) far = std::max(far, v.norm());
  EXPECT_NEAR(far, 0.99, 1e-9);
}

TEST(AtlasIo, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "cardioflow_atlas_test";
  std::filesystem::remove_all(dir);
  Atlas atlas;
  atlas.shapes = {shells20().shapes[0], shells20().shapes[1]};
  save_atlas(dir, atlas);
  const Atlas back = load_atlas(dir);
  ASSERT_EQ(back.shapes.size(), 2u);
  EXPECT_EQ(back.shapes[1].vertices, atlas.shapes[1].vertices);
  EXPECT_EQ(back.shapes[1].faces, atlas.shapes[1].faces);
  std::filesystem::remove_all(dir);
}
