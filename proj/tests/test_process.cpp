#include "recomb/process.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

namespace recomb {
namespace {

OUSpec make_spec(double kappa, double theta, double sigma, double x0, double dt, int levels) {
  OUSpec s;
  s.kappa = kappa;
  s.theta = theta;
  s.sigma = Eigen::VectorXd::Constant(1, sigma);
  s.x0 = x0;
  s.dt = dt;
  s.levels = levels;
  return s;
}

TEST(ConditionalMean, ZeroReversionKeepsState) {
  const auto s = make_spec(0.0, 5.0, 0.2, 0.0, 0.5, 4);
  for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(conditional_mean(s, j, 1.7), 1.7);
}

TEST(ConditionalMean, StrongReversionReachesTheta) {
  const auto s = make_spec(50.0, 2.0, 0.2, 0.0, 1.0, 1);
  EXPECT_NEAR(conditional_mean(s, 0, 0.0), 2.0, 1e-12);
}

TEST(ConditionalMean, MatchesEulerMonteCarlo) {
  const auto s = make_spec(0.5, 0.03, 0.01, 0.05, 0.25, 1);
  const double expected = 0.05 * std::exp(-0.125) + 0.03 * (1.0 - std::exp(-0.125));
  EXPECT_NEAR(conditional_mean(s, 0, 0.05), expected, 1e-15);
  const auto mc = oracle::euler_ou(0.5, 0.03, 0.01, 0.05, 0.25, 1, 100, 1'000'000, 7);
  EXPECT_LT(std::abs(mc.mean - conditional_mean(s, 0, 0.05)), 3.0 * mc.se_mean);
}

TEST(ConditionalMean, RejectsOutOfRangeLevel) {
  const auto s = make_spec(0.5, 0.0, 0.1, 0.0, 1.0, 3);
  EXPECT_THROW(conditional_mean(s, 3, 0.0), std::out_of_range);
  EXPECT_THROW(conditional_mean(s, -1, 0.0), std::out_of_range);
  EXPECT_THROW(conditional_variance(s, 3), std::out_of_range);
}

TEST(ConditionalVariance, BrownianLimit) {
  EXPECT_DOUBLE_EQ(conditional_variance(make_spec(0.0, 0.0, 0.2, 0.0, 1.0, 1), 0), 0.04);
}

TEST(ConditionalVariance, MatchesEulerMonteCarlo) {
  const auto s = make_spec(1.0, 0.0, 0.2, 0.0, 1.0, 1);
  EXPECT_NEAR(conditional_variance(s, 0), 0.04 * (1.0 - std::exp(-2.0)) / 2.0, 1e-16);
  const auto mc = oracle::euler_ou(1.0, 0.0, 0.2, 0.3, 1.0, 1, 400, 1'000'000, 11);
  EXPECT_LT(std::abs(mc.variance - conditional_variance(s, 0)), 3.0 * mc.se_variance);
}

TEST(ConditionalVariance, ContinuousAtZeroReversion) {
  const double at_zero = conditional_variance(make_spec(0.0, 0.0, 0.3, 0.0, 0.7, 1), 0);
  const double tiny = conditional_variance(make_spec(1e-12, 0.0, 0.3, 0.0, 0.7, 1), 0);
  EXPECT_LT(std::abs(tiny - at_zero) / at_zero, 1e-9);
  // Either side of the series switch.
  const double below = conditional_variance(make_spec(0.99e-8 / 0.7, 0.0, 0.3, 0.0, 0.7, 1), 0);
  const double above = conditional_variance(make_spec(1.01e-8 / 0.7, 0.0, 0.3, 0.0, 0.7, 1), 0);
  EXPECT_LT(std::abs(below - above) / at_zero, 1e-9);
}

TEST(MomentModel, SizesAndBroadcast) {
  const auto model = make_moment_model(make_spec(0.3, 0.0, 0.1, 0.0, 0.5, 10));
  EXPECT_EQ(model.var.size(), 10);
  EXPECT_EQ(model.t.size(), 11);
  EXPECT_DOUBLE_EQ(model.t[4], 2.0);

  const auto five = make_moment_model(make_spec(0.3, 0.0, 0.1, 0.0, 0.5, 5));
  EXPECT_EQ(five.var.size(), 5);
  EXPECT_TRUE((five.var.array() == five.var[0]).all());
}

TEST(MomentModel, PerLevelSigma) {
  auto s = make_spec(0.0, 0.0, 0.1, 0.0, 1.0, 3);
  s.sigma = Eigen::Vector3d(0.1, 0.2, 0.3);
  const auto model = make_moment_model(s);
  EXPECT_DOUBLE_EQ(model.var[0], 0.01);
  EXPECT_DOUBLE_EQ(model.var[2], 0.09);
}

TEST(MomentModel, RejectsInvalidSpecs) {
  const auto field_of = [](OUSpec s) {
    try {
      make_moment_model(s);
    } catch (const SpecError& e) {
      return e.field();
    }
    return std::string("accepted");
  };
  EXPECT_EQ(field_of(make_spec(0.1, 0.0, 0.0, 0.0, 1.0, 3)), "sigma");
  EXPECT_EQ(field_of(make_spec(0.1, 0.0, 0.1, 0.0, 0.0, 3)), "dt");
  EXPECT_EQ(field_of(make_spec(0.1, 0.0, 0.1, 0.0, 1.0, 0)), "levels");
  EXPECT_EQ(field_of(make_spec(-0.1, 0.0, 0.1, 0.0, 1.0, 3)), "kappa");
  auto wrong_len = make_spec(0.1, 0.0, 0.1, 0.0, 1.0, 3);
  wrong_len.sigma = Eigen::Vector2d(0.1, 0.1);
  EXPECT_EQ(field_of(wrong_len), "sigma");
}

TEST(TerminalMoments, Basics) {
  const auto s = make_spec(0.0, 0.0, 0.2, 0.4, 1.0, 4);
  const auto m0 = terminal_moments(s, 0);
  EXPECT_EQ(m0.mean, 0.4);
  EXPECT_EQ(m0.variance, 0.0);
  const auto m4 = terminal_moments(s, 4);
  EXPECT_DOUBLE_EQ(m4.mean, 0.4);
  EXPECT_NEAR(m4.variance, 0.16, 1e-15);
  EXPECT_THROW(terminal_moments(s, 5), std::out_of_range);
}

TEST(TerminalMoments, MatchesEulerMonteCarlo) {
  const auto s = make_spec(0.5, 0.03, 0.01, 0.05, 0.25, 8);
  const auto exact = terminal_moments(s, 8);
  const auto mc = oracle::euler_ou(0.5, 0.03, 0.01, 0.05, 0.25, 8, 50, 1'000'000, 13);
  EXPECT_LT(std::abs(mc.mean - exact.mean), 3.0 * mc.se_mean);
  EXPECT_LT(std::abs(mc.variance - exact.variance), 3.0 * mc.se_variance);
}

TEST(ProcessProperties, MeanIsAffineAndCompositionHolds) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = make_spec(2.0 * u(gen), u(gen) - 0.5, 0.01 + 0.4 * u(gen), u(gen),
                             0.05 + u(gen), 1 + static_cast<int>(20 * u(gen)));
    const double a = u(gen), x1 = 4 * u(gen) - 2, x2 = 4 * u(gen) - 2;
    const int j = s.levels - 1;
    EXPECT_NEAR(conditional_mean(s, j, a * x1 + (1 - a) * x2),
                a * conditional_mean(s, j, x1) + (1 - a) * conditional_mean(s, j, x2), 1e-12);
    EXPECT_GT(conditional_variance(s, j), 0.0);
    for (int i = 0; i < s.levels; ++i) {
      const auto cur = terminal_moments(s, i);
      const auto next = terminal_moments(s, i + 1);
      const double decay = std::exp(-s.kappa * s.dt);
      EXPECT_NEAR(next.mean, conditional_mean(s, i, cur.mean),
                  1e-12 * std::max(1.0, std::abs(next.mean)));
      EXPECT_NEAR(next.variance, cur.variance * decay * decay + conditional_variance(s, i),
                  1e-12 * next.variance);
    }
  }
}

TEST(Quote, LogSpaceExponentiates) {
  auto s = make_spec(0.1, 0.0, 0.1, 0.0, 1.0, 1);
  EXPECT_EQ(quote(s, -0.5), -0.5);
  s.log_space = true;
  EXPECT_DOUBLE_EQ(quote(s, std::log(0.03)), 0.03);
}

}  // namespace
}  // namespace recomb
