#include "test_support.hpp"

using namespace testing_support;

namespace {

mf::MomentsBatch fixture() {
  return {2, 1, {1.0, 2.0}, {1.5, 1.5}, {std::sqrt(0.5), std::sqrt(0.5)}};
}

mf::MomentsBatch random_batch(mf::Rng& rng, std::size_t batch, std::size_t params) {
  mf::MomentsBatch b{batch, params, {}, {}, {}};
  for (std::size_t k = 0; k < batch * params; ++k) {
    b.theta.push_back(rng.uniform());
    b.mu.push_back(rng.uniform());
    b.sigma.push_back(rng.uniform(0.05, 0.6));
  }
  return b;
}

double loss(const mf::MomentsBatch& b, mf::LossKind kind) {
  return kind == mf::LossKind::log ? mf::loss_moments_log(b) : mf::loss_moments_sum(b);
}

// Largest relative error of the analytic gradient against central differences.
double gradient_error(const mf::MomentsBatch& b, mf::LossKind kind) {
  const double h = 1e-5;
  const auto g = mf::loss_gradients(b, kind);
  double scale = 0.0;
  for (std::size_t k = 0; k < b.mu.size(); ++k) scale = std::max({scale, std::fabs(g.d_mu[k]), std::fabs(g.d_sigma[k])});
  double worst = 0.0;
  for (std::size_t k = 0; k < b.mu.size(); ++k) {
    for (int which = 0; which < 2; ++which) {
      auto plus = b, minus = b;
      auto& vp = which == 0 ? plus.mu[k] : plus.sigma[k];
      auto& vm = which == 0 ? minus.mu[k] : minus.sigma[k];
      vp += h;
      vm -= h;
      const double fd = (loss(plus, kind) - loss(minus, kind)) / (2 * h);
      const double an = which == 0 ? g.d_mu[k] : g.d_sigma[k];
      worst = std::max(worst, std::fabs(fd - an) / std::max(std::fabs(an), 1e-3 * scale));
    }
  }
  return worst;
}

}  // namespace

TEST(MomentLoss, HandEvaluatedFixture) {
  EXPECT_NEAR(mf::loss_moments_log(fixture()), std::log(0.5) + std::log(0.125), 1e-12);
  EXPECT_NEAR(mf::loss_moments_log(fixture()), -2.772589, 1e-6);
  EXPECT_NEAR(mf::loss_moments_sum(fixture()), 0.625, 1e-12);
}

TEST(MomentLoss, PerfectFitClampsToEpsilon) {
  mf::MomentsBatch b{3, 2, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, std::vector<double>(6, 0.0)};
  EXPECT_DOUBLE_EQ(mf::loss_moments_log(b, 1e-8), 2 * 2 * std::log(1e-8));
  EXPECT_DOUBLE_EQ(mf::loss_moments_sum(b), 0.0);
  const auto g = mf::loss_gradients(b, mf::LossKind::log, 1e-8);
  for (double v : g.d_mu) EXPECT_EQ(v, 0.0);
}

TEST(MomentLoss, TermsSeparateAcrossParameters) {
  mf::Rng rng(4);
  auto b = random_batch(rng, 5, 3);
  const double before = mf::loss_moments_log(b);
  auto scaled = b;
  // Doubling parameter 1's residuals and sigmas adds log 4 + log 16; the
  // other parameters' terms stay put.
  for (std::size_t j = 0; j < b.batch; ++j) {
    const auto k = b.at(j, 1);
    scaled.mu[k] = b.theta[k] - 2.0 * (b.theta[k] - b.mu[k]);
    scaled.sigma[k] = 2.0 * b.sigma[k];
  }
  EXPECT_NEAR(mf::loss_moments_log(scaled) - before, std::log(4.0) + std::log(16.0), 1e-12);
}

TEST(MomentLoss, DuplicatedRowsDoubleTheSumLoss) {
  mf::Rng rng(5);
  const auto b = random_batch(rng, 4, 6);
  auto twice = b;
  twice.batch *= 2;
  twice.theta.insert(twice.theta.end(), b.theta.begin(), b.theta.end());
  twice.mu.insert(twice.mu.end(), b.mu.begin(), b.mu.end());
  twice.sigma.insert(twice.sigma.end(), b.sigma.begin(), b.sigma.end());
  EXPECT_NEAR(mf::loss_moments_sum(twice), 2.0 * mf::loss_moments_sum(b), 1e-12);
}

TEST(MomentLoss, ShapeChecks) {
  auto b = fixture();
  b.mu.pop_back();
  EXPECT_MF_ERROR(mf::loss_moments_sum(b), mf::ErrorCode::shape_mismatch);
  auto c = fixture();
  c.sigma[0] = -1.0;
  EXPECT_MF_ERROR(mf::loss_moments_log(c), mf::ErrorCode::invalid_argument);
  EXPECT_MF_ERROR(mf::loss_moments_sum(mf::MomentsBatch{}), mf::ErrorCode::shape_mismatch);
}

TEST(MomentGradients, MatchFiniteDifferences) {
  mf::Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    const auto b = random_batch(rng, 8, 6);
    EXPECT_LT(gradient_error(b, mf::LossKind::sum), 1e-5);
    EXPECT_LT(gradient_error(b, mf::LossKind::log), 1e-5);
  }
}

TEST(MomentGradients, StationaryPoints) {
  mf::Rng rng(7);
  auto b = random_batch(rng, 6, 2);
  // mu == theta: the first term has zero slope.
  auto exact = b;
  exact.mu = exact.theta;
  for (double v : mf::loss_gradients(exact, mf::LossKind::sum).d_mu) EXPECT_EQ(v, 0.0);
  // sigma^2 == (theta - mu)^2: the second term is stationary.
  auto matched = b;
  for (std::size_t k = 0; k < b.mu.size(); ++k) matched.sigma[k] = std::fabs(b.theta[k] - b.mu[k]);
  for (double v : mf::loss_gradients(matched, mf::LossKind::sum).d_sigma) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(SplitBySimulation, FullDatasetCounts) {
  std::vector<std::uint64_t> groups;
  for (std::uint64_t g = 0; g < 1000; ++g) {
    for (int item = 0; item < 15; ++item) groups.push_back(g);
  }
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto split = mf::split_by_simulation(groups, {}, seed);
    EXPECT_EQ(split.train.size(), 13500u);
    EXPECT_EQ(split.validation.size(), 750u);
    EXPECT_EQ(split.test.size(), 750u);
    std::vector<int> owner(1000, -1);
    int which = 0;
    for (const auto* part : {&split.train, &split.validation, &split.test}) {
      for (auto item : *part) {
        const auto g = groups[item];
        EXPECT_TRUE(owner[g] == -1 || owner[g] == which);
        owner[g] = which;
      }
      ++which;
    }
  }
}

TEST(SplitBySimulation, EdgeCases) {
  const std::vector<std::uint64_t> one(7, 42);
  const auto s = mf::split_by_simulation(one, {}, 1);
  EXPECT_EQ(s.train.size(), 7u);
  EXPECT_TRUE(s.validation.empty());
  EXPECT_TRUE(s.test.empty());
  EXPECT_MF_ERROR(mf::split_by_simulation(std::vector<std::uint64_t>{}, {}, 1), mf::ErrorCode::empty_input);
  EXPECT_MF_ERROR(mf::split_by_simulation(one, {0.5, 0.5, 0.5}, 1), mf::ErrorCode::invalid_argument);
}

TEST(SplitBySimulation, DeterministicAndInterleavedIds) {
  // Group ids need not be contiguous or sorted.
  std::vector<std::uint64_t> groups;
  for (int item = 0; item < 600; ++item) groups.push_back(static_cast<std::uint64_t>((item * 37) % 40) * 1000 + 7);
  const auto a = mf::split_by_simulation(groups, {0.8, 0.1, 0.1}, 9);
  const auto b = mf::split_by_simulation(groups, {0.8, 0.1, 0.1}, 9);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.validation.size(), 60u);
  EXPECT_EQ(a.test.size(), 60u);
  EXPECT_EQ(a.train.size() + a.validation.size() + a.test.size(), groups.size());
}
