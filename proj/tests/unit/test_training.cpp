#include "evr/errors.hpp"
#include "evr/fit.hpp"
#include "evr/synthetic.hpp"

#include "scenes.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace evr;

namespace {

const MultiViewDataset& data() {
  static const MultiViewDataset d = make_dataset(generate_scene(evr::testing::small_scene_spec(), 1), 0.02);
  return d;
}

FitConfig quick(int iterations) {
  FitConfig fc;
  fc.iterations = iterations;
  fc.lr = 2e-2;
  fc.seed = 5;
  fc.render = evr::testing::small_render();
  return fc;
}

}  // namespace

TEST(Fit, ZeroIterationsKeepsParams) {
  const ModelConfig mc = evr::testing::small_model();
  SceneParams init(ModelParams::initialize(mc, 2));
  const std::vector<double> before = flatten(init.values);
  FitResult r = fit_scene(data(), mc, init, quick(0));
  EXPECT_TRUE(r.trace.empty());
  EXPECT_EQ(flatten(r.scene.values), before);
}

TEST(Fit, SameSeedSameTrace) {
  const ModelConfig mc = evr::testing::small_model();
  const FitResult a = fit_scene(data(), mc, quick(6));
  const FitResult b = fit_scene(data(), mc, quick(6));
  ASSERT_EQ(a.trace.size(), 6u);
  for (size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].target, b.trace[i].target);
    EXPECT_EQ(a.trace[i].total, b.trace[i].total);
  }
  EXPECT_EQ(flatten(const_cast<ModelParams&>(a.scene.values)), flatten(const_cast<ModelParams&>(b.scene.values)));
}

TEST(Fit, LossDecreasesOnSmallScene) {
  const FitResult r = fit_scene(data(), evr::testing::small_model(), quick(60));
  double first = 0, last = 0;
  for (int i = 0; i < 10; ++i) {
    first += r.trace[i].total;
    last += r.trace[50 + i].total;
  }
  EXPECT_LT(last, first);
  EXPECT_EQ(r.scene.step, 60);
}

TEST(Fit, TrainViewsRestrictTargets) {
  FitConfig fc = quick(8);
  fc.train_views = {0, 1, 3, 4};
  const FitResult r = fit_scene(data(), evr::testing::small_model(), fc);
  for (const auto& rec : r.trace) EXPECT_NE(rec.target, 2);
}

TEST(Fit, NonFiniteLossNamesIteration) {
  const ModelConfig mc = evr::testing::small_model();
  SceneParams init(ModelParams::initialize(mc, 2));
  init.values.head.bias[0] = NAN;
  try {
    fit_scene(data(), mc, init, quick(3));
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration"), std::string::npos) << e.what();
  }
}

TEST(Schedule, RoundRobinOverPermutation) {
  const std::vector<int> views = {0, 2, 3, 5, 7};
  const auto s = fit_schedule(views, 9, 20);
  ASSERT_EQ(s.size(), 20u);
  for (int block = 0; block < 4; ++block) {
    std::vector<int> chunk(s.begin() + 5 * block, s.begin() + 5 * block + 5);
    std::sort(chunk.begin(), chunk.end());
    EXPECT_EQ(chunk, views);
  }
  EXPECT_EQ(s, fit_schedule(views, 9, 20));
}

TEST(MovingAverage, Window) {
  std::vector<LossRecord> trace;
  for (int i = 0; i < 5; ++i) trace.push_back({i, 0, 0, 0, double(i), 0});
  const auto ma = moving_average(trace, 2);
  EXPECT_EQ(ma, (std::vector<double>{0.5, 1.5, 2.5, 3.5}));
  EXPECT_TRUE(moving_average(trace, 6).empty());
}

TEST(LossCsv, Header) {
  std::ostringstream out;
  write_loss_csv(out, {{0, 2, 0.5, 0.25, 0.75, 3.0}});
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "iteration,target,L_render,L_inter,L_total,wall_ms");
}
