#pragma once

#include "evr/adam.hpp"
#include "evr/dataset.hpp"
#include "evr/loss.hpp"
#include "evr/params.hpp"
#include "evr/renderer.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace evr {

struct FitConfig {
  int iterations = 500;
  uint64_t seed = 0;
  double lr = 5e-4;
  double lambda = kPerceptualWeight;
  RenderConfig render;
  std::vector<int> train_views;  // empty: every dataset view
};

struct LossRecord {
  int iteration = 0;
  int target = 0;
  double render = 0.0;
  double inter = 0.0;
  double total = 0.0;
  double wall_ms = 0.0;
};

struct FitResult {
  SceneParams scene;
  AdamState adam;
  std::vector<LossRecord> trace;
};

using FitCallback = std::function<void(const LossRecord&)>;

/// Gradient-descent fit. Each iteration renders one target view (round robin
/// over a seeded permutation of the training views) from its nearest other
/// training views, then takes one Adam step on render + inter loss.
/// Throws NumericError with the iteration and target on a non-finite loss.
FitResult fit_scene(const MultiViewDataset& data, const ModelConfig& model, SceneParams initial,
                    const FitConfig& config, const FitCallback& on_step = {});
FitResult fit_scene(const MultiViewDataset& data, const ModelConfig& model, const FitConfig& config,
                    const FitCallback& on_step = {});

/// Target order used by fit_scene for the first `count` iterations.
std::vector<int> fit_schedule(const std::vector<int>& train_views, uint64_t seed, int count);

/// CSV with header iteration,target,L_render,L_inter,L_total,wall_ms.
void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& trace);

/// Trailing moving averages of the total loss; element i averages
/// iterations [i, i + window). Empty when the trace is shorter than window.
std::vector<double> moving_average(const std::vector<LossRecord>& trace, int window);

}  // namespace evr
