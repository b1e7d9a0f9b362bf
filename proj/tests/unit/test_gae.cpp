#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "circuitrl/ppo/gae.hpp"

using namespace circuitrl;

TEST(Gae, GammaZeroIsOneStepTd) {
  const std::vector<double> r{1.0, -2.0, 0.5}, v{0.3, 0.1, -0.4};
  const std::vector<int> d{0, 0, 0};
  const GaeResult g = compute_gae(r, v, d, 9.0, 0.0, 0.95);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_DOUBLE_EQ(g.advantages[t], r[t] - v[t]);
    EXPECT_DOUBLE_EQ(g.returns[t], r[t]);
  }
}

TEST(Gae, HandWorkedExample) {
  // Two steps, terminal at the end: delta1 = 0 - 0.2 = -0.2,
  // delta0 = 1 + 0.99 * 0.2 - 0.5 = 0.698, A0 = 0.698 + 0.99 * 0.95 * -0.2.
  const std::vector<double> r{1.0, 0.0}, v{0.5, 0.2};
  const std::vector<int> d{0, 1};
  const GaeResult g = compute_gae(r, v, d, 100.0, 0.99, 0.95);
  EXPECT_NEAR(g.advantages[1], -0.2, 1e-12);
  EXPECT_NEAR(g.advantages[0], 0.5099, 1e-12);
}

TEST(Gae, LambdaOneIsMonteCarlo) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  const std::size_t len = 20;
  std::vector<double> r(len), v(len);
  for (auto& x : r) x = n(rng);
  for (auto& x : v) x = n(rng);
  std::vector<int> d(len, 0);
  d.back() = 1;
  const double gamma = 0.9;
  const GaeResult g = compute_gae(r, v, d, 0.0, gamma, 1.0);
  for (std::size_t t = 0; t < len; ++t) {
    double ret = 0.0, disc = 1.0;
    for (std::size_t k = t; k < len; ++k, disc *= gamma) ret += disc * r[k];
    EXPECT_NEAR(g.returns[t], ret, 1e-10);
  }
}

TEST(Gae, MatchesDoubleSumDefinition) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n;
  std::bernoulli_distribution done(0.05);
  const double gamma = 0.99, lambda = 0.95;
  for (int episode = 0; episode < 100; ++episode) {
    const std::size_t len = 50;
    std::vector<double> r(len), v(len);
    std::vector<int> d(len);
    for (std::size_t t = 0; t < len; ++t) {
      r[t] = n(rng);
      v[t] = n(rng);
      d[t] = done(rng) ? 1 : 0;
    }
    const double next_value = n(rng);
    const GaeResult g = compute_gae(r, v, d, next_value, gamma, lambda);

    // A_t = sum_l (gamma lambda)^l delta_{t+l}, truncated at the first terminal.
    for (std::size_t t = 0; t < len; ++t) {
      double expected = 0.0, w = 1.0;
      for (std::size_t k = t; k < len; ++k) {
        const double v_next = d[k] ? 0.0 : (k + 1 < len ? v[k + 1] : next_value);
        expected += w * (r[k] + gamma * v_next - v[k]);
        if (d[k]) break;
        w *= gamma * lambda;
      }
      ASSERT_NEAR(g.advantages[t], expected, 1e-10) << "episode " << episode << " t " << t;
      ASSERT_NEAR(g.returns[t], expected + v[t], 1e-10);
    }
  }
}

TEST(Gae, RejectsBadInput) {
  const std::vector<double> empty;
  const std::vector<int> no_dones;
  EXPECT_THROW(compute_gae(empty, empty, no_dones, 0.0, 0.99, 0.95), std::invalid_argument);
  const std::vector<double> r{1.0}, v{1.0, 2.0};
  const std::vector<int> d{0};
  EXPECT_THROW(compute_gae(r, v, d, 0.0, 0.99, 0.95), std::invalid_argument);
}

TEST(Gae, Normalization) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(5.0, 3.0);
  std::vector<double> a(400);
  for (auto& x : a) x = n(rng);
  const auto z = normalize_advantages(a);
  double mean = 0.0, var = 0.0;
  for (double x : z) mean += x;
  mean /= 400.0;
  for (double x : z) var += (x - mean) * (x - mean);
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(std::sqrt(var / 400.0), 1.0, 1e-6);

  const std::vector<double> one{3.5};
  EXPECT_EQ(normalize_advantages(one), std::vector<double>{0.0});
  const std::vector<double> constant(10, 2.0);
  for (double x : normalize_advantages(constant)) EXPECT_EQ(x, 0.0);
}
