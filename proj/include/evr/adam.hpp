#pragma once

#include "evr/params.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace evr {

struct AdamState {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t t = 0;
  std::vector<double> m;  // first moments, flat over tensors()
  std::vector<double> v;  // second moments

  AdamState() = default;
  explicit AdamState(double learning_rate) : lr(learning_rate) {}
};

/// Bias-corrected Adam update of `params` in place. Moment buffers are sized
/// on first use. Throws NumericError and leaves everything untouched when a
/// gradient is not finite; throws ArgumentError on length mismatch.
void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state);

/// One optimizer step over every tensor of `scene`; increments scene.step.
void adam_step(SceneParams& scene, AdamState& state);

}  // namespace evr
