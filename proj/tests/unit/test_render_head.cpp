#include "evr/errors.hpp"
#include "evr/render_head.hpp"

#include <gtest/gtest.h>

using namespace evr;

TEST(RenderHead, BiasOnlyGivesGray) {
  RenderHeadParams p(4);
  p.bias = {0.5, 0.5, 0.5};
  const RenderHeadOutput out = render_head(FeatureMap(3, 3, 4, 0.9), p, 4);
  EXPECT_EQ(out.image.height(), 12);
  EXPECT_EQ(out.image.channels(), 3);
  for (double v : out.image.data()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(RenderHead, ConstantFeaturesGiveConstantImage) {
  const RenderHeadOutput out = render_head(FeatureMap(2, 5, 3, 0.3), RenderHeadParams::pass_through(3), 2);
  for (double v : out.image.data()) EXPECT_NEAR(v, 0.3, 1e-15);
}

TEST(RenderHead, UpsamplesKnownPattern) {
  FeatureMap f(2, 2, 3);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) f.at(y, x, 0) = 0.2 * x + 0.4 * y;
  const RenderHeadOutput out = render_head(f, RenderHeadParams::pass_through(3), 2);
  const double axis[4] = {0.0, 0.25, 0.75, 1.0};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_NEAR(out.image.at(y, x, 0), 0.2 * axis[x] + 0.4 * axis[y], 1e-12);
}

TEST(RenderHead, ClampsToUnitRange) {
  RenderHeadParams p(3);
  p.bias = {1.7, -0.4, 0.5};
  const RenderHeadOutput out = render_head(FeatureMap(2, 2, 3), p, 1);
  EXPECT_EQ(out.image.at(0, 0, 0), 1.0);
  EXPECT_EQ(out.image.at(0, 0, 1), 0.0);
  EXPECT_DOUBLE_EQ(out.upsampled.at(0, 0, 0), 1.7);
}

TEST(RenderHead, ChannelMismatchThrows) {
  EXPECT_THROW(render_head(FeatureMap(2, 2, 5), RenderHeadParams(4), 1), ArgumentError);
}

TEST(RenderHeadGrad, ZeroUpstream) {
  const FeatureMap f(2, 2, 3, 0.4);
  const RenderHeadParams p = RenderHeadParams::pass_through(3);
  const RenderHeadOutput fwd = render_head(f, p, 2);
  const RenderHeadGrads g = render_head_grad(f, p, 2, fwd, Image(4, 4, 3));
  for (double v : g.params.weights) EXPECT_EQ(v, 0.0);
  for (double v : g.features.data()) EXPECT_EQ(v, 0.0);
}

TEST(RenderHeadGrad, ClampedPixelsPassNoGradient) {
  RenderHeadParams p(3);
  p.bias = {2.0, 0.5, 0.5};
  const FeatureMap f(1, 1, 3, 0.1);
  const RenderHeadOutput fwd = render_head(f, p, 1);
  const RenderHeadGrads g = render_head_grad(f, p, 1, fwd, Image(1, 1, 3, 1.0));
  EXPECT_EQ(g.params.bias[0], 0.0);
  EXPECT_EQ(g.params.bias[1], 1.0);
}
