#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "cardioflow/error.hpp"
#include "cardioflow/metrics/metrics.hpp"
#include "../support/shapes.hpp"

namespace cardioflow::metrics {
namespace {

using geom::Vec3;

std::vector<Vec3> random_cloud(int n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i) out.emplace_back(u(rng), u(rng), u(rng));
  return out;
}

double brute_directed(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double sum = 0.0;
  for (const auto& p : a) {
    double best = INFINITY;
    for (const auto& q : b) best = std::min(best, (p - q).norm());
    sum += best;
  }
  return sum / static_cast<double>(a.size());
}

double brute_emd(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  std::vector<int> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[static_cast<std::size_t>(perm[i])]).norm();
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(a.size());
}

TEST(Chamfer, MatchesBruteForce) {
  const auto a = random_cloud(300, 1), b = random_cloud(217, 2);
  EXPECT_NEAR(chamfer(a, b), brute_directed(a, b) + brute_directed(b, a), 1e-12);
  EXPECT_NEAR(directed_mean_distance(a, b), brute_directed(a, b), 1e-12);
}

TEST(Chamfer, SymmetricZeroOnSelfAndTranslation) {
  const auto a = random_cloud(50, 3), b = random_cloud(80, 4);
  EXPECT_EQ(chamfer(a, a), 0.0);
  EXPECT_NEAR(chamfer(a, b), chamfer(b, a), 1e-12);
  std::vector<Vec3> single{Vec3(0, 0, 0)}, moved{Vec3(0.3, 0.4, 0)};
  EXPECT_NEAR(chamfer(single, moved), 1.0, 1e-15);
}

TEST(Chamfer, EmptyCloudRejected) {
  EXPECT_THROW(chamfer({}, random_cloud(3, 1)), DegenerateInputError);
  EXPECT_THROW(emd(random_cloud(3, 1), {}), DegenerateInputError);
}

TEST(Emd, MatchesPermutationSearch) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto a = random_cloud(7, 10 + seed), b = random_cloud(7, 20 + seed);
    EXPECT_NEAR(emd(a, b, 7), brute_emd(a, b), 1e-12);
  }
}

TEST(Emd, TranslationCostsItsLength) {
  const auto a = random_cloud(100, 5);
  const Vec3 t(0.05, -0.02, 0.03);
  std::vector<Vec3> b;
  for (const auto& p : a) b.push_back(p + t);
  EXPECT_NEAR(emd(a, b, 100), t.norm(), 1e-12);
}

TEST(Emd, BoundedBelowByChamferHalf) {
  // Every matched distance is at least the nearest-neighbour distance.
  const auto a = random_cloud(64, 6), b = random_cloud(64, 7);
  EXPECT_GE(emd(a, b, 64) + 1e-12, std::max(brute_directed(a, b), brute_directed(b, a)));
}

TEST(Emd, SeededSubsampleDeterministic) {
  const auto a = random_cloud(500, 8), b = random_cloud(400, 9);
  EXPECT_EQ(emd(a, b, 64, 3), emd(a, b, 64, 3));
  const auto idx = subsample_indices(500, 64, 3);
  EXPECT_EQ(idx, subsample_indices(500, 64, 3));
  EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 64u);
  EXPECT_THROW(subsample_indices(10, 64, 3), ConfigError);
}

TEST(Hungarian, MatchesBruteForce) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd c(6, 6);
    for (auto& v : c.reshaped()) v = u(rng);
    const auto assign = hungarian(c);
    double got = 0.0;
    for (int i = 0; i < 6; ++i) got += c(i, assign[static_cast<std::size_t>(i)]);
    std::vector<int> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    double best = INFINITY;
    do {
      double s = 0.0;
      for (int i = 0; i < 6; ++i) s += c(i, perm[static_cast<std::size_t>(i)]);
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_NEAR(got, best, 1e-12);
    EXPECT_EQ(std::set<int>(assign.begin(), assign.end()).size(), 6u);
  }
}

SliceMask disk_mask(double radius, double spacing, const Vec3& center = Vec3::Zero()) {
  SliceMask m = make_mask(Vec3::Zero(), Vec3::UnitZ(), 1.0, spacing);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c)
      m.inside[static_cast<std::size_t>(r) * m.cols + c] = (m.pixel_center(r, c) - center).norm() < radius;
  return m;
}

TEST(Masks, RasterizedSphereSectionIsDisk) {
  const auto sphere = testing::icosphere(5, 0.6);
  const SliceMask frame = make_mask(Vec3::Zero(), Vec3::UnitZ(), 1.0, 0.01);
  const SliceMask m = rasterize(sphere, frame);
  const double area = static_cast<double>(m.count()) * 0.01 * 0.01;
  EXPECT_NEAR(area, std::numbers::pi * 0.36, 0.01 * std::numbers::pi * 0.36);
  // Pixel-by-pixel agreement with the analytic disk away from the rim.
  int disagree = 0;
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      const double d = m.pixel_center(r, c).norm();
      if (std::abs(d - 0.6) > 0.01 && m.at(r, c) != (d < 0.6)) ++disagree;
    }
  EXPECT_EQ(disagree, 0);
}

TEST(Masks, ShellSectionIsAnnulus) {
  const auto shell = testing::spherical_shell(5, 0.4, 0.7);
  const SliceMask m = rasterize(shell, make_mask(Vec3::Zero(), Vec3::UnitZ(), 1.0, 0.01));
  const double area = static_cast<double>(m.count()) * 1e-4;
  const double expected = std::numbers::pi * (0.49 - 0.16);
  EXPECT_NEAR(area, expected, 0.02 * expected);
  const int mid = m.rows / 2;
  EXPECT_FALSE(m.at(mid, mid));
}

TEST(Masks, PlaneMissingMeshIsEmpty) {
  const auto sphere = testing::icosphere(3, 0.5);
  const SliceMask frame = make_mask(Vec3(0, 0, 0.9), Vec3::UnitZ(), 1.0, 0.02);
  const DiceHausdorff r = dice_hausdorff(sphere, rasterize(sphere, make_mask(Vec3::Zero(), Vec3::UnitZ(), 1.0, 0.02)));
  EXPECT_GT(r.dice, 0.999);
  const DiceHausdorff miss = dice_hausdorff(sphere, frame);
  EXPECT_TRUE(miss.empty);
}

TEST(DiceHausdorffTest, SelfComparison) {
  const SliceMask m = disk_mask(0.5, 0.02);
  const DiceHausdorff r = compare_masks(m, m);
  EXPECT_EQ(r.dice, 1.0);
  EXPECT_EQ(r.hausdorff, 0.0);
  EXPECT_FALSE(r.empty);
}

TEST(DiceHausdorffTest, DisjointDisks) {
  const SliceMask a = disk_mask(0.2, 0.02, Vec3(-0.5, 0, 0)), b = disk_mask(0.2, 0.02, Vec3(0.5, 0, 0));
  const DiceHausdorff r = compare_masks(a, b);
  EXPECT_EQ(r.dice, 0.0);
  EXPECT_NEAR(r.hausdorff, 1.0, 0.05);
}

TEST(DiceHausdorffTest, ConcentricDisksAgainstPixelCount) {
  const SliceMask a = disk_mask(0.5, 0.01), b = disk_mask(0.4, 0.01);
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.inside.size(); ++i) {
    na += a.inside[i];
    nb += b.inside[i];
    both += a.inside[i] && b.inside[i];
  }
  const DiceHausdorff r = compare_masks(a, b);
  EXPECT_DOUBLE_EQ(r.dice, 2.0 * static_cast<double>(both) / static_cast<double>(na + nb));
  EXPECT_NEAR(r.dice, 2.0 * 0.16 / 0.41, 0.01);
  EXPECT_NEAR(r.hausdorff, 0.1, 0.02);
  // A lower percentile never exceeds the maximum.
  EXPECT_LE(compare_masks(a, b, 95.0).hausdorff, r.hausdorff);
}

TEST(DiceHausdorffTest, MismatchedMasksRejected) {
  EXPECT_THROW(compare_masks(disk_mask(0.3, 0.02), disk_mask(0.3, 0.03)), ShapeError);
  SliceMask bad = disk_mask(0.3, 0.02);
  bad.inside.pop_back();
  EXPECT_THROW(bad.validate(), ConfigError);
}

// Volume from the divergence theorem with the field (0, 0, z): sum over
// faces of projected area times mean height.
double slab_volume(const geom::TriMesh& m) {
  double v = 0.0;
  for (const auto& f : m.faces) {
    const Vec3 &a = m.vertices[static_cast<std::size_t>(f[0])], &b = m.vertices[static_cast<std::size_t>(f[1])],
               &c = m.vertices[static_cast<std::size_t>(f[2])];
    const Vec3 n = (b - a).cross(c - a) / 2.0;
    v += n.z() * (a.z() + b.z() + c.z()) / 3.0;
  }
  return v;
}

TEST(Volume, MatchesIndependentIntegral) {
  auto sphere = testing::icosphere(4, 0.8);
  for (auto& p : sphere.vertices) p += Vec3(3, -2, 5);
  EXPECT_NEAR(signed_volume(sphere), slab_volume(sphere), 1e-12);
  EXPECT_NEAR(signed_volume(sphere), 4.0 / 3.0 * std::numbers::pi * 0.512, 0.005 * 4.0 / 3.0 * std::numbers::pi * 0.512);
}

TEST(Volume, ShellIsOuterMinusInner) {
  const auto shell = testing::spherical_shell(4, 0.5, 0.9);
  const double expected = signed_volume(testing::icosphere(4, 0.9)) - signed_volume(testing::icosphere(4, 0.5));
  EXPECT_NEAR(signed_volume(shell), expected, 1e-12);
  EXPECT_NEAR(signed_volume(shell), slab_volume(shell), 1e-12);
}

TEST(Volume, CurveFlagsInvertedMeshes) {
  auto flipped = testing::icosphere(2, 1.0);
  for (auto& f : flipped.faces) std::swap(f[1], f[2]);
  const VolumeCurve c = volume_curve({testing::icosphere(2, 1.0), flipped});
  EXPECT_GT(c.volumes[0], 0.0);
  EXPECT_NEAR(c.volumes[1], -c.volumes[0], 1e-12);
  EXPECT_FALSE(c.negative[0]);
  EXPECT_TRUE(c.negative[1]);
}

TEST(Volume, OpenMeshRejected) {
  auto open = testing::icosphere(2, 1.0);
  open.faces.pop_back();
  EXPECT_THROW(volume_curve({open}), GeometryError);
}

TEST(Volume, EjectionFraction) {
  EXPECT_DOUBLE_EQ(ejection_fraction({100.0, 40.0, 70.0}), 0.6);
  EXPECT_EQ(ejection_fraction({5.0, 5.0}), 0.0);
  EXPECT_THROW(ejection_fraction({}), DegenerateInputError);
}

}  // namespace
}  // namespace cardioflow::metrics
