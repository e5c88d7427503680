#include "evr/grid.hpp"
#include "evr/sampling.hpp"
#include "evr/volume_io.hpp"
#include "evr/errors.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

using namespace evr;

TEST(Bilinear, NodeValue) {
  FeatureMap m(5, 4, 1);
  for (size_t i = 0; i < m.size(); ++i) m.data()[i] = 0.5 * i;
  EXPECT_DOUBLE_EQ(bilinear_sample(m, 2, 3)[0], m.at(3, 2));
}

TEST(Bilinear, CenterOfFourCorners) {
  FeatureMap m(2, 2, 1);
  m.data() = {0, 1, 2, 3};
  EXPECT_DOUBLE_EQ(bilinear_sample(m, 0.5, 0.5)[0], 1.5);
}

TEST(Bilinear, ClampsOutside) {
  FeatureMap m(2, 2, 1);
  m.data() = {7, 1, 2, 3};
  EXPECT_DOUBLE_EQ(bilinear_sample(m, -5, -5)[0], 7.0);
  FeatureMap g(2, 2, 1);
  const double up = 1.0;
  const CoordGrad2 cg = bilinear_sample_grad(m, -5, -5, std::span(&up, 1), &g);
  EXPECT_EQ(cg.du, 0.0);
  EXPECT_EQ(cg.dv, 0.0);
  EXPECT_EQ(g.at(0, 0), 1.0);
}

TEST(BilinearGrad, ZeroUpstream) {
  FeatureMap m(3, 3, 2, 1.0), g(3, 3, 2);
  const std::vector<double> up(2, 0.0);
  const CoordGrad2 cg = bilinear_sample_grad(m, 1.3, 0.6, up, &g);
  EXPECT_EQ(cg.du, 0.0);
  for (double v : g.data()) EXPECT_EQ(v, 0.0);
}

TEST(BilinearGrad, NodeGetsAllWeight) {
  FeatureMap m(4, 4, 1), g(4, 4, 1);
  const double up = 1.0;
  bilinear_sample_grad(m, 2, 1, std::span(&up, 1), &g);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_EQ(g.at(y, x), (y == 1 && x == 2) ? 1.0 : 0.0);
}

TEST(Trilinear, NodeAndCenter) {
  VolumeGrid v(2, 2, 2, 1);
  for (int h = 0; h < 2; ++h)
    for (int w = 0; w < 2; ++w)
      for (int d = 0; d < 2; ++d) v.at(h, w, d) = 4 * h + 2 * w + d;
  EXPECT_DOUBLE_EQ(trilinear_sample1(v, 0.5, 0.5, 0.5), 3.5);
  EXPECT_DOUBLE_EQ(trilinear_sample1(v, 1, 0, 1), 3.0);  // u = w, v = h
}

TEST(Trilinear, PreservesConstants) {
  VolumeGrid v(3, 4, 5, 2, 0.7);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2, 6);
  for (int i = 0; i < 50; ++i) {
    const auto s = trilinear_sample(v, u(rng), u(rng), u(rng));
    EXPECT_NEAR(s[0], 0.7, 1e-12);
    EXPECT_NEAR(s[1], 0.7, 1e-12);
  }
}

TEST(Upsample, PreservesConstants) {
  const FeatureMap up = bilinear_upsample(FeatureMap(3, 2, 3, 0.25), 4);
  EXPECT_EQ(up.height(), 12);
  EXPECT_EQ(up.width(), 8);
  for (double v : up.data()) EXPECT_NEAR(v, 0.25, 1e-12);
}

TEST(Upsample, KnownPattern) {
  FeatureMap src(2, 2, 1);
  src.data() = {0, 1, 2, 3};
  const FeatureMap up = bilinear_upsample(src, 2);
  // output X samples (X + 0.5) / 2 - 0.5: -0.25, 0.25, 0.75, 1.25 clamped to [0, 1]
  const double axis[4] = {0.0, 0.25, 0.75, 1.0};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_NEAR(up.at(y, x), axis[x] + 2 * axis[y], 1e-12);
}

TEST(Downsample, BlockMean) {
  FeatureMap src(4, 4, 1);
  for (size_t i = 0; i < src.size(); ++i) src.data()[i] = i;
  const FeatureMap d = area_downsample(src, 2);
  EXPECT_DOUBLE_EQ(d.at(0, 0), (0 + 1 + 4 + 5) / 4.0);
  EXPECT_DOUBLE_EQ(d.at(1, 1), (10 + 11 + 14 + 15) / 4.0);
}

TEST(VolumeIo, RoundTripFloat32) {
  VolumeGrid v(2, 3, 4, 2);
  for (size_t i = 0; i < v.size(); ++i) v.data()[i] = 0.125 * i;
  std::stringstream ss;
  write_volume(ss, v);
  EXPECT_EQ(ss.str().size(), 20 + 4 * v.size());
  EXPECT_EQ(ss.str().substr(0, 4), "VGRD");
  const VolumeGrid r = read_volume(ss);
  ASSERT_TRUE(r.same_shape(v));
  EXPECT_EQ(r.data(), v.data());
}

TEST(VolumeIo, MissingFileNamesPath) {
  try {
    load_volume("/nonexistent/grid.vgrd");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/grid.vgrd"), std::string::npos);
  }
  std::stringstream bad("NOPE0000000000000000");
  EXPECT_THROW(read_volume(bad), IoError);
}
