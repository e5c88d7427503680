#include "evr/fit.hpp"

#include "evr/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>

namespace evr {

std::vector<int> fit_schedule(const std::vector<int>& train_views, uint64_t seed, int count) {
  std::vector<int> order = train_views;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> out;
  for (int i = 0; i < count; ++i) out.push_back(order[i % order.size()]);
  return out;
}

FitResult fit_scene(const MultiViewDataset& data, const ModelConfig& model, SceneParams initial,
                    const FitConfig& config, const FitCallback& on_step) {
  config.render.validate();
  if (config.iterations < 0) throw ConfigError("fit: iterations must be >= 0");
  std::vector<int> train = config.train_views;
  if (train.empty()) {
    for (size_t i = 0; i < data.size(); ++i) train.push_back(static_cast<int>(i));
  }
  if (static_cast<int>(train.size()) < config.render.input_views + 1) {
    throw ConfigError("fit: need at least views + 1 training views");
  }

  FitResult result{std::move(initial), AdamState(config.lr), {}};
  Renderer renderer(data, model);
  const std::vector<int> schedule = fit_schedule(train, config.seed, config.iterations);
  std::vector<Image> targets_low(data.size());
  for (int i : train) targets_low[i] = area_downsample(data.images[i], config.render.upsample);

  for (int it = 0; it < config.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const int target = schedule[it];
    std::vector<int> pool;
    for (int v : train) {
      if (v != target) pool.push_back(v);
    }
    RenderConfig rc = config.render;
    rc.seed = config.render.seed * 0x9E3779B97F4A7C15ULL + static_cast<uint64_t>(it);
    const RenderOutput& out = renderer.forward(data.cameras[target], result.scene.values, rc, pool);

    LossRecord rec;
    rec.iteration = it;
    rec.target = target;
    rec.render = loss_render(out.image, data.images[target]);
    rec.inter = loss_inter(out.inter, targets_low[target]);
    rec.total = loss_total(rec.render, rec.inter, 0.0, config.lambda);
    if (!std::isfinite(rec.total)) {
      throw NumericError("fit: non-finite loss at iteration " + std::to_string(it) + " (target view " +
                         std::to_string(target) + ")");
    }
    const Image g_image = mean_squared_error_grad(out.image, data.images[target]);
    const Image g_inter = mean_squared_error_grad(out.inter, targets_low[target]);
    result.scene.zero_grad();
    renderer.backward(&g_image, &g_inter, result.scene.grads);
    adam_step(result.scene, result.adam);
    result.scene.check_finite();
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.trace.push_back(rec);
    if (on_step) on_step(rec);
  }
  return result;
}

FitResult fit_scene(const MultiViewDataset& data, const ModelConfig& model, const FitConfig& config,
                    const FitCallback& on_step) {
  return fit_scene(data, model, SceneParams(ModelParams::initialize(model, config.seed)), config, on_step);
}

void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& trace) {
  out << "iteration,target,L_render,L_inter,L_total,wall_ms\n";
  out << std::setprecision(17);
  for (const auto& r : trace) {
    out << r.iteration << ',' << r.target << ',' << r.render << ',' << r.inter << ',' << r.total << ','
        << std::setprecision(6) << r.wall_ms << std::setprecision(17) << '\n';
  }
}

std::vector<double> moving_average(const std::vector<LossRecord>& trace, int window) {
  std::vector<double> out;
  if (window < 1 || static_cast<int>(trace.size()) < window) return out;
  double sum = 0.0;
  for (int i = 0; i < window; ++i) sum += trace[i].total;
  out.push_back(sum / window);
  for (size_t i = window; i < trace.size(); ++i) {
    sum += trace[i].total - trace[i - window].total;
    out.push_back(sum / window);
  }
  return out;
}

}  // namespace evr
