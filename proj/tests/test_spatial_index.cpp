#include "test_support.hpp"

using namespace testing_support;

namespace {

std::vector<mf::Vec3> random_points(std::size_t n, double box, std::uint64_t seed) {
  mf::Rng rng(seed);
  std::vector<mf::Vec3> pts(n);
  for (auto& p : pts) p = random_point(rng, box);
  return pts;
}

mf::ParticleSet set_of(mf::Species kind, const std::vector<mf::Vec3>& pts) {
  mf::ParticleSet s;
  s.kind = kind;
  s.positions = pts;
  s.velocities.assign(pts.size(), {0.0, 0.0, 0.0});
  s.masses.assign(pts.size(), 1.0);
  return s;
}

}  // namespace

TEST(PeriodicIndex, EmptyIndexIsValid) {
  const auto index = mf::build_index(std::vector<mf::Vec3>{}, 25.0);
  EXPECT_EQ(index.size(), 0u);
  EXPECT_MF_ERROR(index.knn({1.0, 1.0, 1.0}, 1), mf::ErrorCode::insufficient_points);
}

TEST(PeriodicIndex, MinimumImageDistance) {
  EXPECT_NEAR(mf::periodic_distance({0.0, 0.0, 0.0}, {24.9, 0.0, 0.0}, 25.0), 0.1, 1e-12);
  const std::vector<mf::Vec3> pts{{0.0, 0.0, 0.0}, {24.9, 0.0, 0.0}};
  const auto index = mf::build_index(pts, 25.0);
  const auto nn = index.knn_of_point(0, 1);
  ASSERT_EQ(nn.size(), 1u);
  EXPECT_EQ(nn[0].id, 1u);
  EXPECT_NEAR(nn[0].distance, 0.1, 1e-12);
}

TEST(PeriodicIndex, LineFixtureOrdersTiesById) {
  const std::vector<mf::Vec3> pts{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {9.0, 0.0, 0.0}};
  const auto index = mf::build_index(pts, 10.0);
  const auto nn = index.knn(pts[0], 2, 0);
  ASSERT_EQ(nn.size(), 2u);
  EXPECT_EQ(nn[0].id, 1u);
  EXPECT_EQ(nn[1].id, 2u);
  EXPECT_EQ(nn[0].distance, 1.0);
  EXPECT_EQ(nn[1].distance, 1.0);
}

TEST(PeriodicIndex, KAvailabilityContract) {
  const auto pts = random_points(10, 5.0, 3);
  const auto index = mf::build_index(pts, 5.0);
  EXPECT_EQ(index.knn(pts[0], 9, 0).size(), 9u);
  EXPECT_EQ(index.knn(pts[0], 10).size(), 10u);
  EXPECT_MF_ERROR(index.knn(pts[0], 10, 0), mf::ErrorCode::insufficient_points);
  EXPECT_MF_ERROR(index.knn(pts[0], 11), mf::ErrorCode::insufficient_points);
}

TEST(PeriodicIndex, OutOfBoxPointsRejected) {
  EXPECT_MF_ERROR(mf::build_index(std::vector<mf::Vec3>{{25.0, 1.0, 1.0}}, 25.0), mf::ErrorCode::out_of_box);
  EXPECT_MF_ERROR(mf::build_index(std::vector<mf::Vec3>{{1.0, -0.1, 1.0}}, 25.0), mf::ErrorCode::out_of_box);
}

TEST(PeriodicIndex, MatchesBruteForce) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const std::size_t n = 50 + 300 * seed;
    const double box = 10.0 + seed;
    const auto pts = random_points(n, box, seed);
    const auto index = mf::build_index(pts, box);
    for (std::size_t q = 0; q < n; q += 7) {
      const std::size_t k = 1 + (q % 40);
      EXPECT_EQ(index.knn(pts[q], k, q), brute_knn(pts, pts[q], k, q, box)) << "seed " << seed << " q " << q;
    }
    mf::Rng rng(seed + 100);
    for (int t = 0; t < 20; ++t) {
      const auto q = random_point(rng, box);
      EXPECT_EQ(index.knn(q, 16), brute_knn(pts, q, 16, std::nullopt, box));
    }
  }
}

TEST(PeriodicIndex, ClusteredPointsMatchBruteForce) {
  // Everything in a tiny corner region, so searches must wrap and expand.
  mf::Rng rng(5);
  std::vector<mf::Vec3> pts(400);
  for (auto& p : pts) {
    for (auto& x : p) x = std::fmod(25.0 + 0.3 * rng.normal(), 25.0);
  }
  const auto index = mf::build_index(pts, 25.0);
  for (std::size_t q = 0; q < pts.size(); q += 13) {
    EXPECT_EQ(index.knn(pts[q], 32, q), brute_knn(pts, pts[q], 32, q, 25.0));
  }
  const mf::Vec3 far{12.5, 12.5, 12.5};
  EXPECT_EQ(index.knn(far, 5), brute_knn(pts, far, 5, std::nullopt, 25.0));
}

TEST(SmoothingRadii, LineOf33PointsGivesSixteen) {
  std::vector<mf::Vec3> pts;
  for (int i = 0; i < 33; ++i) pts.push_back({static_cast<double>(i), 0.0, 0.0});
  const auto r = mf::smoothing_radii(set_of(mf::Species::gas, pts), 33.0, 32);
  ASSERT_EQ(r.radii.size(), 33u);
  for (double v : r.radii) EXPECT_EQ(v, 16.0);
}

TEST(SmoothingRadii, StarsAndBlackHolesAreZero) {
  const auto pts = random_points(5, 25.0, 1);
  for (auto kind : {mf::Species::star, mf::Species::black_hole}) {
    const auto r = mf::smoothing_radii(set_of(kind, pts), 25.0, 32);
    ASSERT_EQ(r.radii.size(), 5u);
    for (double v : r.radii) EXPECT_EQ(v, 0.0);
  }
}

TEST(SmoothingRadii, TooFewNeighborsFails) {
  const auto pts = random_points(32, 25.0, 1);
  EXPECT_MF_ERROR(mf::smoothing_radii(set_of(mf::Species::gas, pts), 25.0, 32), mf::ErrorCode::insufficient_points);
  EXPECT_EQ(mf::smoothing_radii(set_of(mf::Species::gas, {}), 25.0, 32).radii.size(), 0u);
}

TEST(SmoothingRadii, MatchesBruteForce32ndDistance) {
  const auto pts = random_points(2000, 25.0, 42);
  const auto r = mf::smoothing_radii(set_of(mf::Species::dark_matter, pts), 25.0, 32);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(r.radii[i], brute_knn(pts, pts[i], 32, i, 25.0).back().distance) << i;
  }
}

TEST(SmoothingRadii, WorkerCountDoesNotChangeResult) {
  const auto pts = random_points(1500, 25.0, 8);
  const auto set = set_of(mf::Species::gas, pts);
  const auto a = mf::smoothing_radii(set, 25.0, 32, 1);
  const auto b = mf::smoothing_radii(set, 25.0, 32, 4);
  EXPECT_EQ(a.radii, b.radii);
}

TEST(SmoothingRadii, PermutationInvariant) {
  const auto pts = random_points(600, 20.0, 9);
  std::vector<std::size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  mf::Rng rng(3);
  rng.shuffle(std::span(perm));
  std::vector<mf::Vec3> shuffled(pts.size());
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = pts[perm[i]];
  const auto a = mf::smoothing_radii(set_of(mf::Species::gas, pts), 20.0);
  const auto b = mf::smoothing_radii(set_of(mf::Species::gas, shuffled), 20.0);
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(b.radii[i], a.radii[perm[i]]);
}

TEST(SmoothingRadii, TranslationInvariantOnLattice) {
  // Coordinates on a 1/8 lattice keep the shifted positions exact.
  mf::Rng rng(4);
  std::vector<mf::Vec3> pts(500), moved(500);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      pts[i][a] = static_cast<double>(rng.below(128)) / 8.0;
      moved[i][a] = std::fmod(pts[i][a] + 5.25, 16.0);
    }
  }
  const auto a = mf::smoothing_radii(set_of(mf::Species::gas, pts), 16.0);
  const auto b = mf::smoothing_radii(set_of(mf::Species::gas, moved), 16.0);
  EXPECT_EQ(a.radii, b.radii);
}
