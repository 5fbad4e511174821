#include <gtest/gtest.h>

#include "dicke/scaling.hpp"

using namespace dicke;

TEST(ScalingFit, ExactPowerLaw) {
  std::vector<std::pair<double, double>> pts;
  for (double n : {20.0, 40.0, 60.0, 80.0, 100.0, 120.0}) pts.emplace_back(n, 2.0 * std::pow(n, 1.3));
  const auto f = scaling_fit(pts, ScalingModel::pure_power);
  EXPECT_NEAR(f.b, 2.0, 1e-10);
  EXPECT_NEAR(f.c, 1.3, 1e-10);
  EXPECT_LT(f.residual_rms, 1e-12);
  EXPECT_FALSE(f.degenerate);
  EXPECT_EQ(f.n_points, 6u);
  EXPECT_NEAR(f(50.0), 2.0 * std::pow(50.0, 1.3), 1e-8);
}

TEST(ScalingFit, OffsetPowerLaw) {
  std::vector<std::pair<double, double>> pts;
  for (double J = 20; J <= 470; J += 50) pts.emplace_back(J, 3.0 + 0.8 * std::pow(J, 0.55));
  const auto pure = scaling_fit(pts, ScalingModel::pure_power);
  const auto f = scaling_fit(pts, ScalingModel::power_offset);
  EXPECT_TRUE(f.converged);
  EXPECT_NEAR(f.a, 3.0, 1e-5);
  EXPECT_NEAR(f.b, 0.8, 1e-6);
  EXPECT_NEAR(f.c, 0.55, 1e-7);
  EXPECT_LT(f.residual_rms, pure.residual_rms);
}

TEST(ScalingFit, NoisyDataNeverWorseThanPurePower) {
  std::vector<std::pair<double, double>> pts{{20, 10.2}, {40, 15.1}, {60, 22.9}, {80, 24.7}, {100, 31.0}};
  const auto pure = scaling_fit(pts, ScalingModel::pure_power);
  const auto off = scaling_fit(pts, ScalingModel::power_offset);
  EXPECT_LE(off.residual_rms, pure.residual_rms * (1 + 1e-12));
  EXPECT_TRUE(std::isfinite(off.c));
}

TEST(ScalingFit, Degenerate) {
  std::vector<std::pair<double, double>> pts{{10, 2.0}, {20, 2.0}, {30, 2.0}, {40, 2.0}};
  for (auto m : {ScalingModel::pure_power, ScalingModel::power_offset}) {
    const auto f = scaling_fit(pts, m);
    EXPECT_TRUE(f.degenerate);
    EXPECT_EQ(f.c, 0.0);
    EXPECT_NEAR(f.b, 2.0, 1e-14);
  }
}

TEST(ScalingFit, Validation) {
  EXPECT_THROW(scaling_fit({{1, 1}, {2, 2}, {3, 3}}, ScalingModel::pure_power), std::invalid_argument);
  EXPECT_THROW(scaling_fit({{1, 1}, {3, 2}, {2, 3}, {4, 4}}, ScalingModel::pure_power), std::invalid_argument);
  EXPECT_THROW(scaling_fit({{1, 1}, {2, -2}, {3, 3}, {4, 4}}, ScalingModel::pure_power), std::invalid_argument);
  EXPECT_EQ(to_string(ScalingModel::power_offset), "power_offset");
}
