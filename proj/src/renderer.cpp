#include "evr/renderer.hpp"

#include "evr/errors.hpp"
#include "evr/features.hpp"
#include "evr/parallel.hpp"
#include "evr/sampling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace evr {

void RenderConfig::validate() const {
  if (uniform_samples < 2) throw ConfigError("render.nu: must be >= 2");
  if (hierarchical_samples < 1) throw ConfigError("render.nh: must be >= 1");
  if (input_views < 1) throw ConfigError("render.views: must be >= 1");
  if (upsample < 1) throw ConfigError("render.upsample: must be >= 1");
}

nlohmann::json render_config_to_json(const RenderConfig& c) {
  return {{"nu", c.uniform_samples},
          {"nh", c.hierarchical_samples},
          {"views", c.input_views},
          {"upsample", c.upsample},
          {"deterministic", c.deterministic},
          {"seed", c.seed},
          {"aggregation", c.aggregation == Aggregation::visibility ? "visibility" : "average"},
          {"workers", c.workers}};
}

RenderConfig render_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("render: expected an object");
  RenderConfig c;
  try {
    c.uniform_samples = j.value("nu", c.uniform_samples);
    c.hierarchical_samples = j.value("nh", c.hierarchical_samples);
    c.input_views = j.value("views", c.input_views);
    c.upsample = j.value("upsample", c.upsample);
    c.deterministic = j.value("deterministic", c.deterministic);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    const std::string agg = j.value("aggregation", std::string("visibility"));
    if (agg == "visibility") {
      c.aggregation = Aggregation::visibility;
    } else if (agg == "average") {
      c.aggregation = Aggregation::average;
    } else {
      throw ConfigError("render.aggregation: expected \"visibility\" or \"average\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("render: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

bool inside_image(const Camera& cam, const PixelDepth& px) {
  return px.u >= -0.5 && px.u <= cam.width() - 0.5 && px.v >= -0.5 && px.v <= cam.height() - 0.5;
}

/// Everything one ray computed, retained so the adjoint can replay it.
struct RayTrace {
  double px = 0.0, py = 0.0;
  Vec3 origin, dir;
  double u = 0.0, v = 0.0;
  double coarse_delta = 0.0;
  std::vector<double> coarse_t, coarse_sigma, coarse_w;
  HierarchicalSamples fine;
  std::vector<Vec3> points;          // S
  std::vector<double> plane;         // S, plane coordinate of each fine sample
  std::vector<double> gathered;      // S x N x C
  std::vector<uint8_t> valid;        // S x N
  std::vector<double> vis;           // S x N
  std::vector<PixelDepth> proj;      // S x N
  std::vector<AggregateInfo> info;   // S
  RaySamples samples;
  IntegratedRay result;
};

class RayKernel {
 public:
  RayKernel(const FrameState& fs, const MultiViewDataset& data, int texture_scale)
      : fs_(fs), data_(data), ts_(texture_scale) {
    n_ = static_cast<int>(fs.views.size());
    ct_ = fs.texture.empty() ? fs.params.head.in_channels : fs.texture.front().channels();
    c_ = ct_ + 3;
  }

  int channels() const { return c_; }
  int texture_channels() const { return ct_; }

  void trace(int x, int y, RayTrace& r) const {
    const RenderConfig& cfg = fs_.config;
    const Camera& cam = fs_.camera;
    const DepthPlaneMap& planes = fs_.frustum.planes();
    const double tn = planes.near(), tf = planes.far();
    const VolumeGrid& density = fs_.density.density;
    const int U = cfg.upsample;

    r.px = (x + 0.5) * U - 0.5;
    r.py = (y + 0.5) * U - 0.5;
    r.origin = cam.center();
    r.dir = cam.ray_direction(r.px, r.py);
    const double path_scale = r.dir.norm();
    r.u = fs_.frustum.pixel_to_column(r.px);
    r.v = fs_.frustum.pixel_to_row(r.py);

    const SamplingMode mode = cfg.deterministic ? SamplingMode::deterministic : SamplingMode::stratified;
    Rng rng = ray_rng(cfg.seed, static_cast<uint64_t>(y) * fs_.low_width + x);
    r.coarse_t = uniform_samples(tn, tf, cfg.uniform_samples, mode, &rng);
    r.coarse_sigma.resize(r.coarse_t.size());
    for (size_t k = 0; k < r.coarse_t.size(); ++k) {
      r.coarse_sigma[k] = trilinear_sample1(density, r.u, r.v, planes.index_unchecked(r.coarse_t[k]));
    }
    r.coarse_delta = (tf - tn) / cfg.uniform_samples * path_scale;
    r.coarse_w = coarse_weights(r.coarse_sigma, r.coarse_delta);
    r.fine = hierarchical_samples(tn, tf, r.coarse_w, cfg.hierarchical_samples, mode, &rng);
    auto& t = r.fine.depths;
    for (size_t s = 1; s < t.size(); ++s) {
      if (!(t[s] > t[s - 1])) t[s] = std::nextafter(t[s - 1], tf + 1.0);
    }

    const size_t S = t.size();
    r.points.resize(S);
    r.plane.resize(S);
    r.gathered.assign(S * n_ * c_, 0.0);
    r.valid.assign(S * n_, 0);
    r.vis.assign(S * n_, 0.0);
    r.proj.resize(S * n_);
    r.info.resize(S);
    r.samples.depths = t;
    r.samples.sigma.resize(S);
    r.samples.features.assign(S * c_, 0.0);
    r.samples.channels = c_;
    r.samples.far = tf;
    r.samples.path_scale = path_scale;

    for (size_t s = 0; s < S; ++s) {
      const Vec3 p = r.origin + t[s] * r.dir;
      r.points[s] = p;
      r.plane[s] = std::min(planes.index_unchecked(t[s]), static_cast<double>(planes.plane_count()));
      r.samples.sigma[s] = trilinear_sample1(density, r.u, r.v, r.plane[s]);
      for (int i = 0; i < n_; ++i) {
        const size_t si = s * n_ + i;
        const int view = fs_.views[i];
        const Camera& vc = data_.cameras[view];
        PixelDepth& px = r.proj[si];
        if (!vc.try_project(p, px) || !inside_image(vc, px)) continue;
        r.valid[si] = 1;
        double* dst = r.gathered.data() + si * c_;
        bilinear_sample(fs_.texture[i], image_to_feature(px.u, ts_), image_to_feature(px.v, ts_),
                        std::span<double>(dst, ct_));
        bilinear_sample(data_.images[view], px.u, px.v, std::span<double>(dst + ct_, 3));
        r.vis[si] = cfg.aggregation == Aggregation::average ? 1.0 : point_visibility(p, fs_.visibility[i]);
      }
      r.info[s] = aggregate(std::span<const double>(r.gathered.data() + s * n_ * c_, n_ * c_), c_,
                            std::span<const double>(r.vis.data() + s * n_, n_),
                            std::span<const uint8_t>(r.valid.data() + s * n_, n_),
                            std::span<double>(r.samples.features.data() + s * c_, c_));
    }
    r.result = integrate_ray(r.samples);
  }

  struct Grads {
    VolumeGrid density;
    std::vector<VolumeGrid> visibility;
    std::vector<FeatureMap> texture;
  };

  Grads make_grads() const {
    Grads g;
    const VolumeGrid& d = fs_.density.density;
    g.density = VolumeGrid(d.height(), d.width(), d.depth(), 1);
    for (const auto& v : fs_.visibility) {
      g.visibility.emplace_back(v.visibility.height(), v.visibility.width(), v.visibility.depth(), 1);
    }
    for (const auto& f : fs_.texture) g.texture.emplace_back(f.height(), f.width(), f.channels());
    return g;
  }

  void backprop(const RayTrace& r, std::span<const double> upstream, Grads& g) const {
    const DepthPlaneMap& planes = fs_.frustum.planes();
    const double tn = planes.near(), tf = planes.far();
    const double dd_dt = planes.plane_count() / (tf - tn);
    const VolumeGrid& density = fs_.density.density;
    const bool use_vis = fs_.config.aggregation == Aggregation::visibility;

    const IntegratedRayGrad ig = integrate_ray_grad(r.samples, r.result, upstream, 0.0);
    const size_t S = r.samples.depths.size();
    std::vector<double> dt = ig.depths;
    std::vector<double> g_feat(n_ * c_), g_vis(n_);
    for (size_t s = 0; s < S; ++s) {
      std::fill(g_feat.begin(), g_feat.end(), 0.0);
      std::fill(g_vis.begin(), g_vis.end(), 0.0);
      aggregate_grad(std::span<const double>(r.gathered.data() + s * n_ * c_, n_ * c_), c_,
                     std::span<const double>(r.vis.data() + s * n_, n_),
                     std::span<const uint8_t>(r.valid.data() + s * n_, n_), r.info[s],
                     std::span<const double>(r.samples.features.data() + s * c_, c_),
                     std::span<const double>(ig.features.data() + s * c_, c_), g_feat, g_vis);
      const Vec3& p = r.points[s];
      Vec3 dp = Vec3::Zero();
      for (int i = 0; i < n_; ++i) {
        const size_t si = s * n_ + i;
        if (!r.valid[si]) continue;
        const int view = fs_.views[i];
        const PixelDepth& px = r.proj[si];
        const std::span<const double> gt(g_feat.data() + i * c_, ct_);
        const std::span<const double> grgb(g_feat.data() + i * c_ + ct_, 3);
        const CoordGrad2 cg_t = bilinear_sample_grad(fs_.texture[i], image_to_feature(px.u, ts_),
                                                     image_to_feature(px.v, ts_), gt, &g.texture[i]);
        const CoordGrad2 cg_i = bilinear_sample_grad(data_.images[view], px.u, px.v, grgb, nullptr);
        const double du = cg_t.du / ts_ + cg_i.du;
        const double dv = cg_t.dv / ts_ + cg_i.dv;
        if (du != 0.0 || dv != 0.0) {
          const Mat3 j = data_.cameras[view].project_jacobian(p);
          dp += j.row(0).transpose() * du + j.row(1).transpose() * dv;
        }
        if (use_vis && g_vis[i] != 0.0) {
          dp += point_visibility_grad(p, fs_.visibility[i], g_vis[i], &g.visibility[i]);
        }
      }
      const CoordGrad3 cg = trilinear_sample1_grad(density, r.u, r.v, r.plane[s], ig.sigma[s], &g.density);
      dt[s] += cg.dd * dd_dt + dp.dot(r.dir);
    }

    std::vector<double> g_w(r.coarse_w.size(), 0.0), g_sigma(r.coarse_w.size(), 0.0);
    hierarchical_samples_grad(r.fine, tn, tf, r.coarse_w, dt, g_w);
    coarse_weights_grad(r.coarse_sigma, r.coarse_delta, r.coarse_w, g_w, g_sigma);
    for (size_t k = 0; k < r.coarse_t.size(); ++k) {
      if (g_sigma[k] == 0.0) continue;
      trilinear_sample1_grad(density, r.u, r.v, planes.index_unchecked(r.coarse_t[k]), g_sigma[k], &g.density);
    }
  }

 private:
  const FrameState& fs_;
  const MultiViewDataset& data_;
  int ts_;
  int n_ = 0;
  int ct_ = 0;
  int c_ = 0;
};

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

int grid_extent(int pixels, int scale) { return std::max(2, pixels / scale); }

}  // namespace

Renderer::Renderer(const MultiViewDataset& data, ModelConfig model) : data_(&data), model_(std::move(model)) {
  data.validate();
  model_.validate();
  for (size_t i = 0; i < data.size(); ++i) {
    const Image& img = data.images[i];
    if (img.width() < model_.geometry_scale || img.height() < model_.geometry_scale) {
      throw ArgumentError("Renderer: view " + std::to_string(i) + " is smaller than the geometry scale");
    }
    raw_geometry_.push_back(raw_features(img, model_.geometry_scale));
    raw_texture_.push_back(raw_features(img, model_.texture_scale));
  }
}

FrameState Renderer::evaluate(const Camera& camera, const ModelParams& params, const RenderConfig& config,
                              std::span<const int> pool) const {
  config.validate();
  const auto t0 = Clock::now();
  const int U = config.upsample;
  if (camera.width() % U != 0 || camera.height() % U != 0) {
    throw ArgumentError("render: image size must be divisible by the upsample factor");
  }
  if (params.extractor.texture.out_channels != model_.texture_channels ||
      params.head.in_channels != model_.texture_channels ||
      static_cast<int>(params.density.weights.size()) != model_.fused_channels()) {
    throw ArgumentError("render: parameters do not match the model configuration");
  }

  FrameState fs;
  fs.camera = camera;
  fs.config = config;
  fs.params = params;
  fs.low_width = camera.width() / U;
  fs.low_height = camera.height() / U;

  std::vector<int> candidates;
  if (pool.empty()) {
    for (size_t i = 0; i < data_->size(); ++i) candidates.push_back(static_cast<int>(i));
  } else {
    for (int i : pool) {
      if (i < 0 || static_cast<size_t>(i) >= data_->size()) throw ArgumentError("render: view pool index out of range");
      candidates.push_back(i);
    }
  }
  if (static_cast<int>(candidates.size()) < config.input_views) {
    throw ArgumentError("render: fewer candidate views than input views");
  }
  std::vector<Camera> pool_cams;
  for (int i : candidates) pool_cams.push_back(data_->cameras[i]);
  for (int k : select_nearest_views(camera, pool_cams, config.input_views)) fs.views.push_back(candidates[k]);
  const int N = static_cast<int>(fs.views.size());

  // encoder
  for (int v : fs.views) {
    fs.geometry.push_back(params.extractor.geometry.apply(raw_geometry_[v]));
    fs.texture.push_back(params.extractor.texture.apply(raw_texture_[v]));
  }
  const auto t1 = Clock::now();

  // geometry volume and density
  const DepthPlaneMap planes(data_->near, data_->far, model_.planes);
  fs.frustum = FrustumGrid(camera, planes, grid_extent(camera.width(), model_.geometry_scale),
                           grid_extent(camera.height(), model_.geometry_scale));
  fs.points = build_frustum_points(fs.frustum);
  std::vector<FeatureView> fviews;
  for (int i = 0; i < N; ++i) fviews.push_back({&data_->cameras[fs.views[i]], &fs.geometry[i], model_.geometry_scale});
  fs.swept = sweep_features(fs.frustum, fs.points, fviews);
  if (N >= 2) {
    fs.fused = variance_fuse(fs.swept.per_view, fs.swept.valid, model_.fuse_mean);
  } else {
    fs.fused.volume = VolumeGrid(fs.frustum.grid_h(), fs.frustum.grid_w(), fs.frustum.depth(), model_.fused_channels());
    fs.fused.valid.assign(fs.points.size(), 0);
  }
  if (params.offset) {
    VolumeGrid offset(fs.frustum.grid_h(), fs.frustum.grid_w(), fs.frustum.depth(), 1);
    for (size_t i = 0; i < fs.points.size(); ++i) offset.data()[i] = params.offset->sample(fs.points[i]);
    fs.offset = std::move(offset);
  }
  fs.density = density_head(fs.fused.volume, params.density, fs.offset ? &*fs.offset : nullptr);
  const auto t2 = Clock::now();

  // visibility reasoning
  if (config.aggregation == Aggregation::visibility) {
    for (int v : fs.views) {
      const Camera& vc = data_->cameras[v];
      const FrustumGrid input(vc, planes, grid_extent(vc.width(), model_.geometry_scale),
                              grid_extent(vc.height(), model_.geometry_scale));
      fs.visibility.push_back(build_view_visibility(v, fs.density.density, fs.frustum, input, config.workers));
    }
  }
  const auto t3 = Clock::now();

  // ray integration
  RenderOutput& out = fs.output;
  const RayKernel kernel(fs, *data_, model_.texture_scale);
  const int ct = kernel.texture_channels();
  out.features = FeatureMap(fs.low_height, fs.low_width, ct);
  out.inter = Image(fs.low_height, fs.low_width, 3);
  out.transmittance = FeatureMap(fs.low_height, fs.low_width, 1);
  parallel_for(0, fs.low_height, config.workers, [&](int y) {
    RayTrace r;
    for (int x = 0; x < fs.low_width; ++x) {
      kernel.trace(x, y, r);
      auto f = out.features.pixel(y, x);
      std::copy_n(r.result.features.begin(), ct, f.begin());
      auto c = out.inter.pixel(y, x);
      std::copy_n(r.result.features.begin() + ct, 3, c.begin());
      out.transmittance.at(y, x) = r.result.transmittance;
    }
  });
  const auto t4 = Clock::now();

  fs.head = render_head(out.features, params.head, U);
  out.image = fs.head.image;
  out.views = fs.views;
  const auto t5 = Clock::now();

  out.timings.encoder = ms_between(t0, t1);
  out.timings.geometry = ms_between(t1, t2);
  out.timings.visibility = ms_between(t2, t3);
  out.timings.integration = ms_between(t3, t4);
  out.timings.render_head = ms_between(t4, t5);
  out.timings.total = ms_between(t0, t5);
  return fs;
}

RenderOutput Renderer::render(const Camera& camera, const ModelParams& params, const RenderConfig& config,
                              std::span<const int> pool) const {
  const auto start = Clock::now();
  RenderOutput out = std::move(evaluate(camera, params, config, pool).output);
  // whole call, including validation, frame setup and teardown
  out.timings.total = ms_between(start, Clock::now());
  return out;
}

const RenderOutput& Renderer::forward(const Camera& camera, const ModelParams& params, const RenderConfig& config,
                                      std::span<const int> pool) {
  const auto start = Clock::now();
  frame_ = std::make_unique<FrameState>(evaluate(camera, params, config, pool));
  frame_->output.timings.total = ms_between(start, Clock::now());
  return frame_->output;
}

const FrameState& Renderer::frame() const {
  if (!frame_) throw StateError("renderer: no retained forward pass");
  return *frame_;
}

void Renderer::backward(const Image* grad_image, const Image* grad_inter, ModelParams& grads) const {
  if (!frame_) throw StateError("backward: no retained forward pass");
  const FrameState& fs = *frame_;
  const RenderOutput& out = fs.output;
  const int U = fs.config.upsample;
  if (grad_image != nullptr && !grad_image->same_shape(out.image)) {
    throw ArgumentError("backward: image gradient shape mismatch");
  }
  if (grad_inter != nullptr && !grad_inter->same_shape(out.inter)) {
    throw ArgumentError("backward: inter gradient shape mismatch");
  }

  FeatureMap g_features(out.features.height(), out.features.width(), out.features.channels());
  if (grad_image != nullptr) {
    const RenderHeadGrads hg = render_head_grad(out.features, fs.params.head, U, fs.head, *grad_image);
    add_into(grads.head.weights, hg.params.weights);
    add_into(grads.head.bias, hg.params.bias);
    g_features = hg.features;
  }

  const RayKernel kernel(fs, *data_, model_.texture_scale);
  const int ct = kernel.texture_channels();
  const int C = kernel.channels();
  const int H = fs.low_height, W = fs.low_width;
  std::vector<RayKernel::Grads> chunk(kGradientChunks);
  parallel_for(0, kGradientChunks, fs.config.workers, [&](int c) {
    const int y0 = c * H / kGradientChunks, y1 = (c + 1) * H / kGradientChunks;
    if (y0 == y1) return;
    RayKernel::Grads& g = chunk[c];
    g = kernel.make_grads();
    RayTrace r;
    std::vector<double> upstream(C);
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < W; ++x) {
        const auto gf = g_features.pixel(y, x);
        std::copy(gf.begin(), gf.end(), upstream.begin());
        for (int k = 0; k < 3; ++k) upstream[ct + k] = grad_inter != nullptr ? grad_inter->at(y, x, k) : 0.0;
        if (std::all_of(upstream.begin(), upstream.end(), [](double v) { return v == 0.0; })) continue;
        kernel.trace(x, y, r);
        kernel.backprop(r, upstream, g);
      }
    }
  });

  RayKernel::Grads total = kernel.make_grads();
  for (const auto& g : chunk) {
    if (g.density.size() == 0) continue;
    add_into(total.density.data(), g.density.data());
    for (size_t i = 0; i < total.visibility.size(); ++i) add_into(total.visibility[i].data(), g.visibility[i].data());
    for (size_t i = 0; i < total.texture.size(); ++i) add_into(total.texture[i].data(), g.texture[i].data());
  }

  VolumeGrid& g_density = total.density;
  for (size_t i = 0; i < fs.visibility.size(); ++i) {
    view_visibility_grad(fs.visibility[i], fs.density.density, total.visibility[i], g_density);
  }

  const DensityHeadGrads dg = density_head_grad(fs.fused.volume, fs.params.density, fs.density, g_density);
  add_into(grads.density.weights, dg.params.weights);
  grads.density.bias += dg.params.bias;
  add_into(grads.density.kernel, dg.params.kernel);
  if (fs.params.offset && grads.offset) {
    for (size_t i = 0; i < fs.points.size(); ++i) {
      fs.params.offset->sample_grad(fs.points[i], dg.preactivation.data()[i], grads.offset->values);
    }
  }

  const int N = static_cast<int>(fs.views.size());
  if (N >= 2) {
    const std::vector<VolumeGrid> g_swept =
        variance_fuse_grad(fs.swept.per_view, fs.swept.valid, dg.features, model_.fuse_mean);
    std::vector<FeatureView> fviews;
    std::vector<FeatureMap> g_geometry;
    for (int i = 0; i < N; ++i) {
      fviews.push_back({&data_->cameras[fs.views[i]], &fs.geometry[i], model_.geometry_scale});
      g_geometry.emplace_back(fs.geometry[i].height(), fs.geometry[i].width(), fs.geometry[i].channels());
    }
    sweep_features_grad(fs.points, fviews, fs.swept, g_swept, g_geometry);
    for (int i = 0; i < N; ++i) {
      fs.params.extractor.geometry.accumulate_grad(raw_geometry_[fs.views[i]], g_geometry[i], grads.extractor.geometry);
    }
  }
  for (int i = 0; i < N; ++i) {
    fs.params.extractor.texture.accumulate_grad(raw_texture_[fs.views[i]], total.texture[i], grads.extractor.texture);
  }
}

}  // namespace evr
