#pragma once

// Posterior-moment losses and the group-preserving dataset split.
//
// A batch holds, per item j and parameter i, the true value theta, the
// predicted posterior mean mu and standard deviation sigma, all in normalized
// parameter units (see normalize_parameter).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "multifield/error.hpp"
#include "multifield/random.hpp"

namespace multifield {

inline constexpr double default_loss_epsilon = 1e-12;

struct MomentsBatch {
  std::size_t batch = 0;
  std::size_t params = 0;
  // Row-major batch x params.
  std::vector<double> theta, mu, sigma;

  std::size_t at(std::size_t j, std::size_t i) const { return j * params + i; }
};

inline void check_batch(const MomentsBatch& b) {
  const std::size_t expected = b.batch * b.params;
  if (b.batch < 1 || b.params < 1) fail(ErrorCode::shape_mismatch, "batch and parameter counts must be >= 1");
  if (b.theta.size() != expected || b.mu.size() != expected || b.sigma.size() != expected) {
    fail(ErrorCode::shape_mismatch, "theta/mu/sigma sizes " + std::to_string(b.theta.size()) + "/" +
                                        std::to_string(b.mu.size()) + "/" + std::to_string(b.sigma.size()) +
                                        ", expected " + std::to_string(expected));
  }
  for (double s : b.sigma) {
    if (!(s >= 0.0)) fail(ErrorCode::invalid_argument, "sigma entries must be >= 0");
  }
}

namespace detail {

// Per parameter: sum over the batch of r^2 and of (r^2 - sigma^2)^2.
struct MomentSums {
  std::vector<double> first, second;
};

inline MomentSums moment_sums(const MomentsBatch& b) {
  MomentSums s{std::vector<double>(b.params, 0.0), std::vector<double>(b.params, 0.0)};
  for (std::size_t j = 0; j < b.batch; ++j) {
    for (std::size_t i = 0; i < b.params; ++i) {
      const auto k = b.at(j, i);
      const double r = b.theta[k] - b.mu[k];
      const double e = r * r - b.sigma[k] * b.sigma[k];
      s.first[i] += r * r;
      s.second[i] += e * e;
    }
  }
  return s;
}

}  // namespace detail

// sum_i log(max(eps, A_i)) + log(max(eps, C_i)) with
// A_i = sum_j (theta - mu)^2 and C_i = sum_j ((theta - mu)^2 - sigma^2)^2.
inline double loss_moments_log(const MomentsBatch& b, double epsilon = default_loss_epsilon) {
  check_batch(b);
  const auto s = detail::moment_sums(b);
  double loss = 0.0;
  for (std::size_t i = 0; i < b.params; ++i) {
    loss += std::log(std::max(epsilon, s.first[i])) + std::log(std::max(epsilon, s.second[i]));
  }
  return loss;
}

inline double loss_moments_sum(const MomentsBatch& b) {
  check_batch(b);
  const auto s = detail::moment_sums(b);
  double loss = 0.0;
  for (std::size_t i = 0; i < b.params; ++i) loss += s.first[i] + s.second[i];
  return loss;
}

enum class LossKind { log, sum };

struct LossGradients {
  std::vector<double> d_mu;
  std::vector<double> d_sigma;
};

// Closed-form derivatives. For the log variant a clamped term contributes no
// gradient.
inline LossGradients loss_gradients(const MomentsBatch& b, LossKind kind,
                                    double epsilon = default_loss_epsilon) {
  check_batch(b);
  const auto s = detail::moment_sums(b);
  std::vector<double> w1(b.params, 1.0), w2(b.params, 1.0);
  if (kind == LossKind::log) {
    for (std::size_t i = 0; i < b.params; ++i) {
      w1[i] = s.first[i] > epsilon ? 1.0 / s.first[i] : 0.0;
      w2[i] = s.second[i] > epsilon ? 1.0 / s.second[i] : 0.0;
    }
  }
  LossGradients g{std::vector<double>(b.theta.size()), std::vector<double>(b.theta.size())};
  for (std::size_t j = 0; j < b.batch; ++j) {
    for (std::size_t i = 0; i < b.params; ++i) {
      const auto k = b.at(j, i);
      const double r = b.theta[k] - b.mu[k];
      const double e = r * r - b.sigma[k] * b.sigma[k];
      g.d_mu[k] = -2.0 * r * w1[i] - 4.0 * e * r * w2[i];
      g.d_sigma[k] = -4.0 * e * b.sigma[k] * w2[i];
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Split by simulation
// ---------------------------------------------------------------------------

struct SplitFractions {
  double train = 0.90;
  double validation = 0.05;
  double test = 0.05;
};

struct DatasetSplit {
  std::vector<std::size_t> train, validation, test;  // item indices, ascending
};

// Whole groups go to one split. Validation and test receive
// round(fraction * n_groups) groups each; the remainder goes to training.
inline DatasetSplit split_by_simulation(std::span<const std::uint64_t> group_ids,
                                        const SplitFractions& fractions, std::uint64_t seed) {
  if (group_ids.empty()) fail(ErrorCode::empty_input, "no items to split");
  for (double f : {fractions.train, fractions.validation, fractions.test}) {
    if (!(f >= 0.0 && f <= 1.0)) fail(ErrorCode::invalid_argument, "split fractions must lie in [0, 1]");
  }
  if (std::fabs(fractions.train + fractions.validation + fractions.test - 1.0) > 1e-9) {
    fail(ErrorCode::invalid_argument, "split fractions must sum to 1");
  }
  std::vector<std::uint64_t> groups(group_ids.begin(), group_ids.end());
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  Rng rng(seed);
  rng.shuffle(std::span(groups));

  const auto g = static_cast<double>(groups.size());
  const auto n_val = std::min(groups.size(), static_cast<std::size_t>(std::llround(fractions.validation * g)));
  const auto n_test =
      std::min(groups.size() - n_val, static_cast<std::size_t>(std::llround(fractions.test * g)));

  // 0 train, 1 validation, 2 test, looked up by sorted group id.
  std::vector<std::pair<std::uint64_t, int>> assignment;
  assignment.reserve(groups.size());
  for (std::size_t k = 0; k < groups.size(); ++k) {
    assignment.emplace_back(groups[k], k < n_val ? 1 : (k < n_val + n_test ? 2 : 0));
  }
  std::sort(assignment.begin(), assignment.end());

  DatasetSplit out;
  for (std::size_t item = 0; item < group_ids.size(); ++item) {
    const auto it = std::lower_bound(assignment.begin(), assignment.end(), std::pair{group_ids[item], -1});
    switch (it->second) {
      case 0: out.train.push_back(item); break;
      case 1: out.validation.push_back(item); break;
      default: out.test.push_back(item); break;
    }
  }
  return out;
}

}  // namespace multifield
