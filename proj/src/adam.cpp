#include "evr/adam.hpp"

#include "evr/errors.hpp"

#include <cmath>
#include <string>

namespace evr {

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& s) {
  if (params.size() != grads.size()) throw ArgumentError("adam: parameter and gradient lengths differ");
  for (size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) throw NumericError("adam: non-finite gradient at index " + std::to_string(i));
  }
  if (s.m.empty()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  if (s.m.size() != params.size()) throw ArgumentError("adam: moment buffers do not match the parameters");
  ++s.t;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    params[i] -= s.lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + s.eps);
  }
}

void adam_step(SceneParams& scene, AdamState& state) {
  std::vector<double> values = flatten(scene.values);
  const std::vector<double> grads = flatten(scene.grads);
  adam_update(values, grads, state);
  assign_flat(scene.values, values);
  ++scene.step;
}

}  // namespace evr
