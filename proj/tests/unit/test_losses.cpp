#include "evr/adam.hpp"
#include "evr/errors.hpp"
#include "evr/gradcheck.hpp"
#include "evr/loss.hpp"
#include "evr/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace evr;

TEST(Mse, Examples) {
  const Image a(4, 4, 3, 0.3);
  EXPECT_EQ(mean_squared_error(a, a), 0.0);
  EXPECT_NEAR(mean_squared_error(a, Image(4, 4, 3, 0.4)), 0.01, 1e-15);
  EXPECT_NEAR(loss_inter(Image(2, 2, 3, 0.0), Image(2, 2, 3, 0.25)), 0.0625, 1e-15);
  EXPECT_THROW(mean_squared_error(a, Image(4, 5, 3)), ArgumentError);
}

TEST(Mse, NonNegative) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 20; ++i) {
    Image a(3, 3, 3), b(3, 3, 3);
    for (double& v : a.data()) v = u(rng);
    for (double& v : b.data()) v = u(rng);
    EXPECT_GE(mean_squared_error(a, b), 0.0);
  }
}

TEST(TotalLoss, Examples) {
  EXPECT_DOUBLE_EQ(loss_total(1.0, 0.5, 0.0, 0.1), 1.5);
  EXPECT_EQ(loss_total(0, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(loss_total(0.3, 0.2, 7.0, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(loss_total(0.3, 0.2, 1.0), 0.5 + kPerceptualWeight);
}

TEST(Psnr, Examples) {
  const Image a(8, 8, 3, 0.5);
  EXPECT_EQ(psnr(a, a), kPsnrCap);
  EXPECT_NEAR(psnr(a, Image(8, 8, 3, 0.6)), 20.0, 1e-9);
  EXPECT_NEAR(psnr(Image(8, 8, 3, 0.0), Image(8, 8, 3, 1.0)), 0.0, 1e-12);
}

TEST(Psnr, DecreasesWithNoise) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  Image clean(32, 32, 3, 0.5);
  double prev = kPsnrCap + 1;
  for (double amp : {0.01, 0.03, 0.1, 0.2}) {
    Image noisy = clean;
    for (double& v : noisy.data()) v = std::clamp(v + amp * n(rng), 0.0, 1.0);
    const double p = psnr(clean, noisy);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Ssim, Examples) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  Image a(16, 16, 3), b(16, 16, 3);
  for (double& v : a.data()) v = u(rng);
  for (double& v : b.data()) v = u(rng);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-15);
  // constant images: (2 mu_a mu_b + C1) / (mu_a^2 + mu_b^2 + C1) with the structure term equal to 1
  const double c1 = 0.01 * 0.01;
  EXPECT_NEAR(ssim(Image(16, 16, 3, 0.0), Image(16, 16, 3, 1.0)), c1 / (1.0 + c1), 1e-12);
  EXPECT_THROW(ssim(Image(8, 8, 3), Image(8, 8, 3)), ArgumentError);
}

TEST(Adam, ZeroGradientLeavesParams) {
  std::vector<double> p = {1.0, -2.0};
  AdamState s(0.1);
  adam_update(p, std::vector<double>{0.0, 0.0}, s);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
  EXPECT_EQ(s.t, 1);
}

TEST(Adam, FirstStepIsBiasCorrected) {
  std::vector<double> p = {0.0};
  AdamState s(0.01);
  adam_update(p, std::vector<double>{1.0}, s);
  // m_hat = 1, v_hat = 1
  EXPECT_NEAR(p[0], -0.01 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, StateMatters) {
  std::vector<double> twice = {0.0}, once = {0.0};
  AdamState a(0.01), b(0.02);
  adam_update(twice, std::vector<double>{1.0}, a);
  adam_update(twice, std::vector<double>{3.0}, a);
  adam_update(once, std::vector<double>{2.0}, b);
  EXPECT_NE(twice[0], once[0]);
}

TEST(Adam, RejectsNonFinite) {
  std::vector<double> p = {1.0};
  AdamState s;
  EXPECT_THROW(adam_update(p, std::vector<double>{NAN}, s), NumericError);
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(s.t, 0);
}

TEST(GradCheck, Examples) {
  auto sq = [](std::span<const double> t) { return t[0] * t[0]; };
  const std::vector<size_t> probe = {0};
  const std::vector<double> analytic = {6.0};
  const GradCheckReport r = finite_difference_check(sq, {3.0}, analytic, probe, 1e-4);
  EXPECT_NEAR(r.probes[0].numeric, 6.0, 1e-6);
  auto flat = [](std::span<const double>) { return 1.0; };
  const std::vector<double> zero = {0.0};
  EXPECT_NEAR(finite_difference_check(flat, {3.0}, zero, probe, 1e-4).probes[0].numeric, 0.0, 1e-12);
}
