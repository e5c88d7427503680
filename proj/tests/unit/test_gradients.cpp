#include "gradient_suite.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace evr::testing;

TEST(GradientError, QuadraticMatchesAnalytic) {
  auto f = [](std::span<const double> t) { return t[0] * t[0]; };
  const double analytic = 6.0;
  EXPECT_LT(gradient_error(f, {3.0}, std::span(&analytic, 1), 1e-4, 1e-12), 1e-9);
}

TEST(GradientError, ConstantFunctionUsesFloor) {
  auto f = [](std::span<const double>) { return 4.0; };
  const double analytic = 0.0;
  EXPECT_EQ(gradient_error(f, {1.0}, std::span(&analytic, 1), 1e-4, 1e-6), 0.0);
}

TEST(GradientError, DetectsWrongGradient) {
  auto f = [](std::span<const double> t) { return std::sin(t[0]); };
  const double wrong = 0.0;
  EXPECT_GT(gradient_error(f, {0.3}, std::span(&wrong, 1), 1e-5, 1e-6), 0.5);
}

class OpGradient : public ::testing::TestWithParam<std::string> {};

TEST_P(OpGradient, TwentyInstances) {
  const OpGradResult r = check_op_gradient(GetParam(), 20, 3);
  EXPECT_GT(r.probes, 0);
  EXPECT_LT(r.max_rel_error, 1e-4) << GetParam();
}

INSTANTIATE_TEST_SUITE_P(All, OpGradient, ::testing::ValuesIn(gradient_ops()),
                         [](const auto& info) { return info.param; });

TEST(EndToEndGradient, FiveProbes) {
  const OpGradResult r = check_end_to_end_gradient(5, 2);
  EXPECT_EQ(r.probes, 5);
  EXPECT_LT(r.max_rel_error, 1e-3);
}
