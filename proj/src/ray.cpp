#include "evr/ray.hpp"

#include "evr/errors.hpp"

#include <algorithm>
#include <cmath>

namespace evr {

Rng ray_rng(uint64_t seed, uint64_t stream) {
  // splitmix64 finalizer over the combined key
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return Rng(z ^ (z >> 31));
}

namespace {

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace

std::vector<double> uniform_samples(double t_near, double t_far, int count, SamplingMode mode, Rng* rng) {
  if (!(t_near < t_far)) throw ArgumentError("uniform_samples: require t_near < t_far");
  if (count < 1) throw ArgumentError("uniform_samples: count must be >= 1");
  if (mode == SamplingMode::stratified && rng == nullptr) {
    throw ArgumentError("uniform_samples: stratified mode needs a generator");
  }
  const double bin = (t_far - t_near) / count;
  std::vector<double> t(count);
  for (int k = 0; k < count; ++k) {
    const double jitter = mode == SamplingMode::deterministic ? 0.5 : uniform01(*rng);
    t[k] = t_near + (k + jitter) * bin;
  }
  return t;
}

std::vector<double> coarse_weights(std::span<const double> sigma, double delta) {
  std::vector<double> w(sigma.size());
  double optical = 0.0;
  for (size_t k = 0; k < sigma.size(); ++k) {
    const double x = sigma[k] * delta;
    w[k] = std::exp(-optical) * -std::expm1(-x);
    optical += x;
  }
  return w;
}

void coarse_weights_grad(std::span<const double> sigma, double delta, std::span<const double> weights,
                         std::span<const double> upstream, std::span<double> grad_sigma) {
  double tail = 0.0;  // sum_{j > k} g_j w_j
  double optical = 0.0;
  std::vector<double> transmittance(sigma.size());
  for (size_t k = 0; k < sigma.size(); ++k) {
    transmittance[k] = std::exp(-optical);
    optical += sigma[k] * delta;
  }
  for (size_t k = sigma.size(); k-- > 0;) {
    const double x = sigma[k] * delta;
    const double dx = upstream[k] * transmittance[k] * std::exp(-x) - tail;
    grad_sigma[k] += dx * delta;
    tail += upstream[k] * weights[k];
  }
}

HierarchicalSamples hierarchical_samples(double t_near, double t_far, std::span<const double> weights, int count,
                                         SamplingMode mode, Rng* rng) {
  if (!(t_near < t_far)) throw ArgumentError("hierarchical_samples: require t_near < t_far");
  if (weights.empty() || count < 1) throw ArgumentError("hierarchical_samples: empty input");
  if (mode == SamplingMode::stratified && rng == nullptr) {
    throw ArgumentError("hierarchical_samples: stratified mode needs a generator");
  }
  const int bins = static_cast<int>(weights.size());
  const double width = (t_far - t_near) / bins;
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ArgumentError("hierarchical_samples: weights must be non-negative");
    total += w;
  }
  HierarchicalSamples out;
  out.uniform_fallback = !(total > 0.0);
  std::vector<double> pdf(bins);
  for (int k = 0; k < bins; ++k) pdf[k] = out.uniform_fallback ? 1.0 / bins : weights[k] / total;
  std::vector<double> cdf(bins + 1, 0.0);
  for (int k = 0; k < bins; ++k) cdf[k + 1] = cdf[k] + pdf[k];
  cdf[bins] = 1.0;

  out.depths.resize(count);
  out.bins.resize(count);
  out.quantiles.resize(count);
  for (int s = 0; s < count; ++s) {
    const double jitter = mode == SamplingMode::deterministic ? 0.5 : uniform01(*rng);
    const double u = (s + jitter) / count;
    // first edge strictly above u, so pdf[k] > 0 whenever u < 1
    int k = static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()) - 1;
    k = std::clamp(k, 0, bins - 1);
    while (k > 0 && pdf[k] <= 0.0) --k;
    const double frac = pdf[k] > 0.0 ? std::clamp((u - cdf[k]) / pdf[k], 0.0, 1.0) : 0.5;
    out.depths[s] = t_near + (k + frac) * width;
    out.bins[s] = k;
    out.quantiles[s] = u;
  }
  return out;
}

void hierarchical_samples_grad(const HierarchicalSamples& samples, double t_near, double t_far,
                               std::span<const double> weights, std::span<const double> upstream,
                               std::span<double> grad_weights) {
  if (samples.uniform_fallback) return;
  const int bins = static_cast<int>(weights.size());
  const double width = (t_far - t_near) / bins;
  double total = 0.0;
  for (double w : weights) total += w;
  std::vector<double> prefix(bins + 1, 0.0);
  for (int k = 0; k < bins; ++k) prefix[k + 1] = prefix[k] + weights[k];
  // t = e_k + width * (u W - S_k) / w_k with S_k = sum_{j<k} w_j.
  for (size_t s = 0; s < samples.depths.size(); ++s) {
    const double g = upstream[s];
    if (g == 0.0) continue;
    const int k = samples.bins[s];
    const double wk = weights[k];
    if (!(wk > 0.0)) continue;
    const double u = samples.quantiles[s];
    const double a = u * total - prefix[k];
    if (a < 0.0 || a > wk) continue;  // clamped inside the bin
    const double scale = g * width / wk;
    for (int j = 0; j < k; ++j) grad_weights[j] += scale * (u - 1.0);
    grad_weights[k] += scale * (u - a / wk);
    for (int j = k + 1; j < bins; ++j) grad_weights[j] += scale * u;
  }
}

AggregateInfo aggregate(std::span<const double> features, int channels, std::span<const double> visibility,
                        std::span<const uint8_t> valid, std::span<double> out) {
  const size_t n = visibility.size();
  if (valid.size() != n || features.size() != n * channels || out.size() != static_cast<size_t>(channels)) {
    throw ArgumentError("aggregate: length mismatch");
  }
  AggregateInfo info;
  std::fill(out.begin(), out.end(), 0.0);
  for (size_t i = 0; i < n; ++i) {
    if (!valid[i]) continue;
    ++info.valid_views;
    info.weight_sum += visibility[i];
  }
  if (info.valid_views == 0) {
    info.empty = true;
    return info;
  }
  if (info.weight_sum < kMinAggregateWeight) {
    info.fallback = true;
    for (size_t i = 0; i < n; ++i) {
      if (!valid[i]) continue;
      for (int c = 0; c < channels; ++c) out[c] += features[i * channels + c];
    }
    for (int c = 0; c < channels; ++c) out[c] /= info.valid_views;
    return info;
  }
  for (size_t i = 0; i < n; ++i) {
    if (!valid[i] || visibility[i] == 0.0) continue;
    const double v = visibility[i];
    for (int c = 0; c < channels; ++c) out[c] += v * features[i * channels + c];
  }
  for (int c = 0; c < channels; ++c) out[c] /= info.weight_sum;
  return info;
}

void aggregate_grad(std::span<const double> features, int channels, std::span<const double> visibility,
                    std::span<const uint8_t> valid, const AggregateInfo& info, std::span<const double> out,
                    std::span<const double> upstream, std::span<double> grad_features,
                    std::span<double> grad_visibility) {
  if (info.empty) return;
  const size_t n = visibility.size();
  if (info.fallback) {
    for (size_t i = 0; i < n; ++i) {
      if (!valid[i]) continue;
      for (int c = 0; c < channels; ++c) grad_features[i * channels + c] += upstream[c] / info.valid_views;
    }
    return;
  }
  const double inv = 1.0 / info.weight_sum;
  for (size_t i = 0; i < n; ++i) {
    if (!valid[i]) continue;
    const double v = visibility[i];
    double gv = 0.0;
    for (int c = 0; c < channels; ++c) {
      const double up = upstream[c];
      grad_features[i * channels + c] += up * v * inv;
      gv += up * (features[i * channels + c] - out[c]);
    }
    grad_visibility[i] += gv * inv;
  }
}

IntegratedRay integrate_ray(const RaySamples& samples) {
  const size_t n = samples.depths.size();
  if (samples.sigma.size() != n || samples.features.size() != n * samples.channels) {
    throw ArgumentError("integrate_ray: length mismatch");
  }
  for (size_t s = 1; s < n; ++s) {
    if (!(samples.depths[s] > samples.depths[s - 1])) {
      throw ArgumentError("integrate_ray: depths must be strictly ascending");
    }
  }
  if (n > 0 && samples.far < samples.depths.back()) throw ArgumentError("integrate_ray: last depth beyond far");
  IntegratedRay out;
  out.features.assign(samples.channels, 0.0);
  out.weights.resize(n);
  double optical = 0.0;
  for (size_t s = 0; s < n; ++s) {
    const double next = s + 1 < n ? samples.depths[s + 1] : samples.far;
    const double x = samples.sigma[s] * (next - samples.depths[s]) * samples.path_scale;
    const double w = std::exp(-optical) * -std::expm1(-x);
    out.weights[s] = w;
    optical += x;
    if (w == 0.0) continue;
    const double* f = samples.features.data() + s * samples.channels;
    for (int c = 0; c < samples.channels; ++c) out.features[c] += w * f[c];
  }
  out.transmittance = std::exp(-optical);
  return out;
}

IntegratedRayGrad integrate_ray_grad(const RaySamples& samples, const IntegratedRay& result,
                                     std::span<const double> upstream_features, double upstream_transmittance) {
  const size_t n = samples.depths.size();
  const int ch = samples.channels;
  IntegratedRayGrad g;
  g.sigma.assign(n, 0.0);
  g.depths.assign(n, 0.0);
  g.features.assign(n * ch, 0.0);
  std::vector<double> gw(n, 0.0), delta(n), transmittance(n);
  double optical = 0.0;
  for (size_t s = 0; s < n; ++s) {
    const double next = s + 1 < n ? samples.depths[s + 1] : samples.far;
    delta[s] = (next - samples.depths[s]) * samples.path_scale;
    transmittance[s] = std::exp(-optical);
    optical += samples.sigma[s] * delta[s];
    const double* f = samples.features.data() + s * ch;
    double acc = 0.0;
    for (int c = 0; c < ch; ++c) {
      acc += upstream_features[c] * f[c];
      g.features[s * ch + c] = upstream_features[c] * result.weights[s];
    }
    gw[s] = acc;
  }
  // dL/dx_s = G_s T_s e^{-x_s} - sum_{j>s} G_j w_j - g_T T_final
  double tail = 0.0;
  for (size_t s = n; s-- > 0;) {
    const double x = samples.sigma[s] * delta[s];
    const double dx = gw[s] * transmittance[s] * std::exp(-x) - tail - upstream_transmittance * result.transmittance;
    g.sigma[s] += dx * delta[s];
    const double ddelta = dx * samples.sigma[s] * samples.path_scale;
    g.depths[s] -= ddelta;
    if (s + 1 < n) g.depths[s + 1] += ddelta;
    tail += gw[s] * result.weights[s];
  }
  return g;
}

}  // namespace evr
