#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace evr {

enum class SamplingMode { deterministic, stratified };

using Rng = std::mt19937_64;

/// Per-ray generator seeded from (seed, stream); independent of how rays are
/// scheduled across workers.
Rng ray_rng(uint64_t seed, uint64_t stream);

/// N samples in [t_n, t_f]: bin midpoints (deterministic) or one uniform draw
/// per bin (stratified, requires rng). Ascending.
std::vector<double> uniform_samples(double t_near, double t_far, int count, SamplingMode mode, Rng* rng = nullptr);

/// Coarse-pass weights w_k = T_k (1 - exp(-sigma_k delta)), T_k = exp(-sum_{j<k} sigma_j delta).
std::vector<double> coarse_weights(std::span<const double> sigma, double delta);
/// Accumulates dL/dsigma given dL/dw.
void coarse_weights_grad(std::span<const double> sigma, double delta, std::span<const double> weights,
                         std::span<const double> upstream, std::span<double> grad_sigma);

struct HierarchicalSamples {
  std::vector<double> depths;     // ascending, within [t_n, t_f]
  std::vector<int> bins;          // coarse bin each sample fell in
  std::vector<double> quantiles;  // CDF level that produced each sample
  bool uniform_fallback = false;  // all weights were zero
};

/// Inverse-CDF sampling of the piecewise-constant PDF that `weights` induce
/// on the `weights.size()` equal bins spanning [t_n, t_f]. Deterministic mode
/// uses quantiles (k + 0.5) / count; stratified draws one level per stratum.
HierarchicalSamples hierarchical_samples(double t_near, double t_far, std::span<const double> weights, int count,
                                         SamplingMode mode, Rng* rng = nullptr);

/// Accumulates dL/dweights given dL/d(depths).
void hierarchical_samples_grad(const HierarchicalSamples& samples, double t_near, double t_far,
                               std::span<const double> weights, std::span<const double> upstream,
                               std::span<double> grad_weights);

/// Smallest weight sum treated as non-degenerate by aggregate().
inline constexpr double kMinAggregateWeight = 1e-8;

struct AggregateInfo {
  double weight_sum = 0.0;
  int valid_views = 0;
  bool fallback = false;  // weight sum below threshold, unweighted mean used
  bool empty = false;     // no valid views, zero output
};

/// Visibility-weighted mean over views: out = sum_i v_i f_i / sum_i v_i, with
/// invalid views carrying zero weight. `features` holds views.size() rows of
/// `channels` values. Falls back to the plain mean over valid views when the
/// weight sum is below kMinAggregateWeight.
AggregateInfo aggregate(std::span<const double> features, int channels, std::span<const double> visibility,
                        std::span<const uint8_t> valid, std::span<double> out);

void aggregate_grad(std::span<const double> features, int channels, std::span<const double> visibility,
                    std::span<const uint8_t> valid, const AggregateInfo& info, std::span<const double> out,
                    std::span<const double> upstream, std::span<double> grad_features,
                    std::span<double> grad_visibility);

/// Aggregated samples along one ray.
struct RaySamples {
  std::vector<double> depths;    // strictly ascending
  std::vector<double> sigma;     // >= 0
  std::vector<double> features;  // depths.size() rows of `channels`
  int channels = 0;
  double far = 0.0;              // the last interval ends here
  double path_scale = 1.0;       // path length per unit of depth along this ray
};

struct IntegratedRay {
  std::vector<double> features;  // sum_s w_s f_s
  std::vector<double> weights;   // w_s
  double transmittance = 1.0;    // after the last sample
};

/// Alpha compositing with w_s = T_s (1 - exp(-sigma_s delta_s)); delta_s is
/// the gap to the next sample, and to `far` for the last one.
/// Throws ArgumentError when depths are not strictly ascending.
IntegratedRay integrate_ray(const RaySamples& samples);

struct IntegratedRayGrad {
  std::vector<double> sigma;
  std::vector<double> depths;
  std::vector<double> features;
};

IntegratedRayGrad integrate_ray_grad(const RaySamples& samples, const IntegratedRay& result,
                                     std::span<const double> upstream_features, double upstream_transmittance = 0.0);

}  // namespace evr
