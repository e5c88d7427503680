#include "evr/density_head.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace evr;

TEST(DensityHead, ZeroParamsGiveLn2) {
  const DensityHeadParams p(3);
  const DensityHeadOutput out = density_head(VolumeGrid(2, 3, 4, 3, 0.7), p);
  for (double v : out.density.data()) EXPECT_NEAR(v, std::log(2.0), 1e-15);
}

TEST(DensityHead, MonotoneInBiasAndVanishes) {
  DensityHeadParams p(1);
  const VolumeGrid f(1, 1, 1, 1, 0.2);
  double prev = 1e9;
  for (double b : {5.0, 0.0, -5.0, -20.0, -40.0}) {
    p.bias = b;
    const double d = density_head(f, p).density.data()[0];
    EXPECT_LT(d, prev);
    EXPECT_GE(d, 0.0);
    prev = d;
  }
  EXPECT_LT(prev, 1e-15);
}

TEST(DensityHead, SoftplusIsStableForLargeInputs) {
  EXPECT_NEAR(softplus(800.0), 800.0, 1e-9);
  EXPECT_NEAR(softplus(-800.0), 0.0, 1e-300);
  EXPECT_TRUE(std::isfinite(softplus(1e6)));
}

TEST(DensityHead, OffsetAddsToPreactivation) {
  const DensityHeadParams p(2);
  const VolumeGrid f(2, 2, 2, 2, 0.1);
  const VolumeGrid offset(2, 2, 2, 1, 1.5);
  const DensityHeadOutput out = density_head(f, p, &offset);
  EXPECT_NEAR(out.density.data()[0], softplus(1.5), 1e-15);
}

TEST(DensityHead, KernelIsZeroPaddedConvolution) {
  DensityHeadParams p(1, true);
  p.weights[0] = 1.0;
  for (double& k : p.kernel) k = 1.0;
  VolumeGrid f(3, 3, 3, 1);
  f.at(1, 1, 1) = 2.0;
  const DensityHeadOutput out = density_head(f, p);
  for (int h = 0; h < 3; ++h)
    for (int w = 0; w < 3; ++w)
      for (int d = 0; d < 3; ++d) EXPECT_NEAR(out.preactivation.at(h, w, d), 2.0, 1e-15);
}

TEST(DensityHeadGrad, ZeroUpstream) {
  DensityHeadParams p(2, true);
  p.weights = {0.3, -0.2};
  const VolumeGrid f(2, 2, 2, 2, 0.5);
  const DensityHeadOutput fwd = density_head(f, p);
  const DensityHeadGrads g = density_head_grad(f, p, fwd, VolumeGrid(2, 2, 2, 1));
  EXPECT_EQ(g.params.bias, 0.0);
  for (double v : g.params.weights) EXPECT_EQ(v, 0.0);
  for (double v : g.features.data()) EXPECT_EQ(v, 0.0);
}

TEST(DensityHeadGrad, BiasDerivativeIsSigmoid) {
  DensityHeadParams p(1);
  p.weights[0] = 0.8;
  p.bias = -0.3;
  const VolumeGrid f(1, 1, 1, 1, 0.6);
  const DensityHeadOutput fwd = density_head(f, p);
  const DensityHeadGrads g = density_head_grad(f, p, fwd, VolumeGrid(1, 1, 1, 1, 1.0));
  EXPECT_NEAR(g.params.bias, sigmoid(0.8 * 0.6 - 0.3), 1e-15);
}
