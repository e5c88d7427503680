// Acceptance runner: one PASS/FAIL line per criterion.
//   evr_acceptance [criterion ...]    (no argument: all of them)

#include "evr/camera.hpp"
#include "evr/fit.hpp"
#include "evr/metrics.hpp"
#include "evr/params.hpp"
#include "evr/ray.hpp"
#include "evr/renderer.hpp"
#include "evr/synthetic.hpp"
#include "evr/visibility.hpp"

#include "gradient_suite.hpp"
#include "scenes.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>
#include <vector>

using namespace evr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

struct Verdict {
  bool pass = true;
  std::vector<std::string> parts;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    parts.push_back(std::string(ok ? "" : "[x] ") + what);
  }
};

void info(const std::string& name, const std::string& text) {
  std::printf("  info %s: %s\n", name.c_str(), text.c_str());
  std::fflush(stdout);
}

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun cli(const std::string& args) {
  const std::string cmd = std::string(EVR_CLI_PATH) + " " + args + " 2>&1";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string without_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("evr_accept_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() { fs::remove_all(path); }
};

// ---------------------------------------------------------------------------

Verdict gradients() {
  Verdict v;
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_op;
  for (const std::string& op : testing::gradient_ops()) {
    const testing::OpGradResult r = testing::check_op_gradient(op, 100, 1);
    info("gradients", fmt("%-26s %3d instances %6d probes  max rel err %.3e", op.c_str(), r.instances, r.probes,
                          r.max_rel_error));
    if (r.max_rel_error >= 1e-4 || r.instances != 100) v.check(false, op + fmt(" %.3e", r.max_rel_error));
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_op = op;
    }
  }
  v.check(worst < 1e-4, fmt("%zu ops x 100 instances, worst %.2e (%s) < 1e-4", testing::gradient_ops().size(), worst,
                            worst_op.c_str()));
  const testing::OpGradResult e2e = testing::check_end_to_end_gradient(20, 1);
  v.check(e2e.max_rel_error < 1e-3 && e2e.probes == 20,
          fmt("end-to-end 8x8, %d probes, %.2e < 1e-3", e2e.probes, e2e.max_rel_error));
  const double s = seconds_since(t0);
  v.check(s < 300.0, fmt("%.1f s < 300 s", s));
  return v;
}

Verdict visibility_oracle() {
  Verdict v;
  const auto t0 = Clock::now();
  int worst = 1000;
  double max_err = 0.0;
  bool monotone = true, front = true;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const testing::VisibilityOracleStats s = testing::visibility_oracle_scene(seed, 32, 0.1, 0.3, 1000);
    info("visibility_oracle", fmt("seed %2llu  32^3  %4d/%d within 0.02  max err %.4f  monotone %d  vis0 %d",
                                  static_cast<unsigned long long>(seed), s.within, s.points, s.max_error, s.monotone,
                                  s.front_is_one));
    worst = std::min(worst, s.points == 1000 ? s.within : 0);
    max_err = std::max(max_err, s.max_error);
    monotone = monotone && s.monotone;
    front = front && s.front_is_one;
  }
  v.check(worst >= 990, fmt("worst scene %d/1000 within 0.02 (>= 990)", worst));
  v.check(monotone, "columns non-increasing");
  v.check(front, "vis(0) = 1");
  const double s = seconds_since(t0);
  v.check(s < 300.0, fmt("%.1f s < 300 s", s));

  // not gated: the Riemann-sum lag grows with sigma * spacing
  int dense = 1000, coarse = 1000;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    dense = std::min(dense, testing::visibility_oracle_scene(seed, 32, 5.0, 10.0, 1000).within);
    coarse = std::min(coarse, testing::visibility_oracle_scene(seed, 16, 0.1, 0.3, 1000).within);
  }
  info("visibility_oracle", fmt("dense sigma 5-10 at 32^3: worst %d/1000; sigma 0.1-0.3 at 16^3: worst %d/1000",
                                dense, coarse));
  return v;
}

Verdict equations() {
  Verdict v;
  double worst = 0.0;
  const auto near = [&](double got, double want) {
    worst = std::max(worst, std::abs(got - want));
    return std::abs(got - want) <= 1e-6;
  };
  bool ok = true;

  // depth planes
  ok &= near(DepthPlaneMap(2, 6, 96).depth(0), 2.0);
  ok &= near(DepthPlaneMap(2, 6, 96).depth(96), 6.0);
  ok &= near(DepthPlaneMap(2, 6, 4).depth(2), 4.0);
  ok &= near(DepthPlaneMap(2, 6, 4).index(4.0), 2.0);
  ok &= near(DepthPlaneMap(2, 6, 4).index(2.0), 0.0);
  for (double d : {0.0, 0.7, 1.5, 3.25, 4.0}) ok &= near(DepthPlaneMap(2, 6, 4).index(DepthPlaneMap(2, 6, 4).depth(d)), d);
  v.check(ok, "depth map and inverse");

  // alpha and transmittance on an on-axis column with unit spacing
  ok = true;
  const FrustumGrid column(Camera(1, 1, 0, 0, Mat3::Identity(), Vec3::Zero(), 1, 1), DepthPlaneMap(2, 6, 4), 1, 1);
  VolumeGrid sigma(1, 1, 4, 1);
  sigma.data() = {0.0, std::log(2.0), 1e3, 1e9};
  const VolumeGrid alpha = alpha_volume(sigma, column);
  ok &= near(alpha.data()[0], 0.0);
  ok &= near(alpha.data()[1], 0.5);
  ok &= alpha.data()[3] <= 1.0 && near(alpha.data()[3], 1.0);
  VolumeGrid half(1, 1, 4, 1);
  half.data() = {0.5, 0.5, 0.5, 0.5};
  const VolumeGrid vis = visibility_volume(half);
  ok &= near(vis.data()[0], 1.0) && near(vis.data()[2], 0.25);
  VolumeGrid opaque(1, 1, 4, 1);
  opaque.data() = {1.0, 0.3, 0.3, 0.3};
  // an opaque plane passes 1e-6 through the alpha clamp
  for (int d = 1; d < 4; ++d)
    ok &= near(visibility_volume(opaque).data()[d], (1.0 - kAlphaClamp) * std::pow(0.7, d - 1));
  v.check(ok, "alpha and transmittance");

  // aggregation
  ok = true;
  std::array<double, 1> out{};
  const std::array<uint8_t, 2> valid{1, 1};
  aggregate(std::array<double, 2>{0.0, 4.0}, 1, std::array<double, 2>{1.0, 3.0}, valid, out);
  ok &= near(out[0], 3.0);
  aggregate(std::array<double, 2>{0.25, 0.75}, 1, std::array<double, 2>{1.0, 0.0}, valid, out);
  ok &= near(out[0], 0.25);
  aggregate(std::array<double, 2>{0.25, 0.75}, 1, std::array<double, 2>{0.4, 0.4}, valid, out);
  ok &= near(out[0], 0.5);
  v.check(ok, "aggregation");

  // integration
  ok = true;
  const double l = std::log(2.0);
  RaySamples two{{0.0, 1.0}, {l, l}, {3.0, 5.0}, 1, 2.0, 1.0};
  const IntegratedRay r2 = integrate_ray(two);
  ok &= near(r2.features[0], 0.5 * 3.0 + 0.25 * 5.0) && near(r2.transmittance, 0.25);
  RaySamples empty{{0.0, 1.0}, {0.0, 0.0}, {3.0, 5.0}, 1, 2.0, 1.0};
  const IntegratedRay r0 = integrate_ray(empty);
  ok &= near(r0.features[0], 0.0) && near(r0.transmittance, 1.0);
  RaySamples wall{{0.0}, {1e6}, {0.7}, 1, 1.0, 1.0};
  const IntegratedRay r1 = integrate_ray(wall);
  ok &= near(r1.features[0], 0.7) && near(r1.transmittance, 0.0);
  v.check(ok, "integration");

  // uniform and hierarchical sample placement
  ok = true;
  const auto u2 = uniform_samples(0, 1, 2, SamplingMode::deterministic);
  ok &= near(u2[0], 0.25) && near(u2[1], 0.75);
  const auto h4 = hierarchical_samples(0, 1, std::vector<double>(8, 1.0), 4, SamplingMode::deterministic);
  for (int k = 0; k < 4; ++k) ok &= near(h4.depths[k], 0.125 + 0.25 * k);
  v.check(ok, "sample placement");

  // partition of unity on random rays
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double unity = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    RaySamples r;
    r.channels = 1;
    const int n = 1 + trial % 64;
    double t = 2.0 * u(rng);
    for (int i = 0; i < n; ++i) {
      t += 1e-3 + 0.3 * u(rng);
      r.depths.push_back(t);
      r.sigma.push_back(30.0 * std::pow(u(rng), 3.0));
      r.features.push_back(u(rng));
    }
    r.far = t + 0.3 * u(rng) + 1e-3;
    r.path_scale = 1.0 + u(rng);
    const IntegratedRay res = integrate_ray(r);
    double sum = res.transmittance;
    for (double w : res.weights) sum += w;
    unity = std::max(unity, std::abs(sum - 1.0));
  }
  v.check(unity <= 1e-6, fmt("sum w + T = 1 on 10000 rays, max dev %.1e", unity));
  v.parts.push_back(fmt("worst example dev %.1e", worst));
  return v;
}

Verdict occlusion_ablation() {
  Verdict v;
  const auto t0 = Clock::now();
  const MultiViewDataset data = make_dataset(generate_scene(testing::occlusion_scene_spec(128), 1), 0.005);
  const ModelConfig model = testing::occlusion_model();
  const int held = testing::kOcclusionHeldOut;
  std::map<Aggregation, std::pair<double, double>> scores;
  for (Aggregation agg : {Aggregation::visibility, Aggregation::average}) {
    const FitConfig fc = testing::occlusion_fit(agg, 2000);
    const auto t1 = Clock::now();
    const FitResult res = fit_scene(data, model, fc);
    RenderConfig rc = fc.render;
    rc.deterministic = true;
    const RenderOutput out = Renderer(data, model).render(data.cameras[held], res.scene.values, rc, fc.train_views);
    scores[agg] = {psnr(out.image, data.images[held]), ssim(out.image, data.images[held])};
    info("occlusion_ablation", fmt("%s: held-out view %d  PSNR %.3f dB  SSIM %.4f  (%.0f s)",
                                   agg == Aggregation::visibility ? "visibility" : "average", held, scores[agg].first,
                                   scores[agg].second, seconds_since(t1)));
  }
  const auto [pv, sv] = scores[Aggregation::visibility];
  const auto [pa, sa] = scores[Aggregation::average];
  v.check(pv - pa >= 0.5, fmt("PSNR vis %.2f - avg %.2f = %+.2f dB (>= 0.5)", pv, pa, pv - pa));
  v.check(sv > sa, fmt("SSIM vis %.4f > avg %.4f", sv, sa));
  const double s = seconds_since(t0);
  v.check(s < 1200.0, fmt("%.0f s < 1200 s", s));
  return v;
}

Verdict fit_convergence() {
  Verdict v;
  const auto t0 = Clock::now();
  const MultiViewDataset data = make_dataset(generate_scene(testing::plane_scene_spec(64), 1), 0.005);
  const ModelConfig model = testing::plane_model();
  const FitConfig fc = testing::plane_fit(500);
  const FitResult res = fit_scene(data, model, fc);
  RenderConfig rc = fc.render;
  rc.deterministic = true;
  // each training view is rendered from the other training views, as during fitting
  const double train = testing::leave_one_out_psnr(data, model, res.scene.values, rc, fc.train_views);
  v.check(train >= 25.0, fmt("train-view PSNR %.2f dB (>= 25) at 64x64", train));

  const std::vector<double> ma = moving_average(res.trace, 100);
  int rising = 0;
  for (size_t i = 1; i < ma.size(); ++i) rising += ma[i] > ma[i - 1];
  v.check(!ma.empty() && rising == 0,
          fmt("100-iter moving average: %d rising steps of %zu (first %.4f, last %.4f)", rising,
              ma.empty() ? size_t{0} : ma.size() - 1, ma.empty() ? 0.0 : ma.front(), ma.empty() ? 0.0 : ma.back()));
  const double s = seconds_since(t0);
  v.check(s < 300.0, fmt("%.1f s < 300 s", s));

  const RenderOutput held = Renderer(data, model).render(data.cameras[5], res.scene.values, rc, fc.train_views);
  info("fit_convergence", fmt("held-out view 5: PSNR %.2f dB", psnr(held.image, data.images[5])));
  return v;
}

Verdict throughput() {
  Verdict v;
  // parameters are resolution independent: fit at 64x64, render the same scene at 256x256
  const ModelConfig model = testing::plane_model();
  const MultiViewDataset small = make_dataset(generate_scene(testing::plane_scene_spec(64), 1), 0.005);
  const FitConfig fc = testing::plane_fit(100);
  const ModelParams params = fit_scene(small, model, fc).scene.values;
  const MultiViewDataset data = make_dataset(generate_scene(testing::plane_scene_spec(256), 1), 0.005);

  RenderConfig rc = fc.render;  // N_u 64, N_h 8, N 3
  rc.deterministic = true;
  const Renderer renderer(data, model);
  const Camera cam = data.cameras[5];
  const auto timed = [&](int workers) {
    rc.workers = workers;
    renderer.render(cam, params, rc, fc.train_views);
    std::vector<double> ms;
    StageTimings t;
    for (int i = 0; i < 5; ++i) {
      const auto t0 = Clock::now();
      const RenderOutput out = renderer.render(cam, params, rc, fc.train_views);
      ms.push_back(1000.0 * seconds_since(t0));
      if (i == 0) t = out.timings;
    }
    std::sort(ms.begin(), ms.end());
    return std::make_pair(ms[ms.size() / 2], t);
  };
  const auto [one, stages] = timed(1);
  v.check(one < 2000.0, fmt("256x256 single worker %.0f ms (< 2000)", one));
  const double eight = timed(8).first;
  const unsigned cores = std::thread::hardware_concurrency();
  v.check(one / eight >= 3.0, fmt("8 workers %.0f ms, speedup %.2fx (>= 3, %u hardware threads)", eight, one / eight,
                                  cores));
  info("throughput", fmt("256x256 stages ms: encoder %.1f geometry %.1f visibility %.1f integration %.1f "
                         "render head %.1f  sum %.1f  total %.1f",
                         stages.encoder, stages.geometry, stages.visibility, stages.integration, stages.render_head,
                         stages.stage_sum(), stages.total));

  const CliRun bench = cli("bench --width 64 --height 64 --repeats 5");
  double ratio = 0.0;
  const auto at = bench.out.find("stage sum / total = ");
  if (at != std::string::npos) ratio = std::stod(bench.out.substr(at + 20));
  v.check(bench.code == 0 && std::abs(ratio - 1.0) <= 0.05,
          fmt("bench demo scene stage sum / total = %.3f (within 5%%)", ratio));
  const double r256 = stages.stage_sum() / stages.total;
  v.check(std::abs(r256 - 1.0) <= 0.05, fmt("256x256 stage sum / total = %.3f", r256));
  return v;
}

Verdict determinism() {
  Verdict v;
  ScratchDir dir("det");
  const fs::path d = dir.path;
  std::ofstream(d / "spec.json") << testing::plane_scene_spec(64).dump();
  std::ofstream(d / "model.json") << model_config_to_json(testing::plane_model()).dump();
  CliRun r = cli("make-scene --spec " + (d / "spec.json").string() + " --out " + (d / "data").string());
  v.check(r.code == 0, "make-scene");
  if (r.code != 0) return v;
  const std::string fit = "fit --data " + (d / "data").string() + " --model " + (d / "model.json").string() +
                          " --iters 40 --lr 0.02 --holdout 5 --nu 64 --nh 8 --upsample 4";
  const std::string a = fit + " --seed 3 --out " + (d / "ck_a").string() + " --loss-csv " + (d / "a.csv").string();
  const std::string b = fit + " --seed 3 --out " + (d / "ck_b").string() + " --loss-csv " + (d / "b.csv").string();
  const std::string c = fit + " --seed 3 --workers 4 --out " + (d / "ck_c").string() + " --loss-csv " +
                        (d / "c.csv").string();
  const std::string e = fit + " --seed 4 --out " + (d / "ck_e").string() + " --loss-csv " + (d / "e.csv").string();
  for (const std::string* cmd : {&a, &b, &c, &e}) {
    r = cli(*cmd);
    if (r.code != 0) {
      v.check(false, "fit failed: " + r.out.substr(0, r.out.find('\n')));
      return v;
    }
  }
  const std::string ta = without_last_column(slurp(d / "a.csv"));
  v.check(!ta.empty() && ta == without_last_column(slurp(d / "b.csv")), "fit trace identical across runs");
  v.check(ta == without_last_column(slurp(d / "c.csv")), "fit trace identical with 4 workers");
  info("determinism", fmt("seed 4 trace %s seed 3", ta == without_last_column(slurp(d / "e.csv")) ? "equals" : "differs from"));

  const std::string render = "render --checkpoint " + (d / "ck_a").string() + " --view 5 --deterministic";
  std::vector<std::string> pngs;
  int k = 0;
  for (const char* extra : {"--workers 1", "--workers 1", "--workers 2", "--workers 8", "--width 256 --height 256 --workers 1",
                            "--width 256 --height 256 --workers 8"}) {
    const fs::path out = d / fmt("r%d.png", k++);
    r = cli(render + " " + extra + " --out " + out.string());
    pngs.push_back(r.code == 0 ? slurp(out) : "");
  }
  v.check(!pngs[0].empty() && pngs[0] == pngs[1], "render byte-identical across runs");
  v.check(pngs[0] == pngs[2] && pngs[0] == pngs[3], "render byte-identical with 1, 2, 8 workers");
  v.check(!pngs[4].empty() && pngs[4] == pngs[5], "256x256 render byte-identical with 1 and 8 workers");
  return v;
}

const std::vector<std::pair<std::string, std::function<Verdict()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Verdict()>>> all = {
      {"gradients", gradients},
      {"visibility_oracle", visibility_oracle},
      {"equations", equations},
      {"occlusion_ablation", occlusion_ablation},
      {"fit_convergence", fit_convergence},
      {"throughput", throughput},
      {"determinism", determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  if (wanted.empty())
    for (const auto& [name, fn] : criteria()) wanted.push_back(name);
  int failures = 0;
  for (const std::string& name : wanted) {
    const auto it = std::find_if(criteria().begin(), criteria().end(), [&](const auto& c) { return c.first == name; });
    if (it == criteria().end()) {
      std::fprintf(stderr, "unknown criterion %s\n", name.c_str());
      return 2;
    }
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = it->second();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    std::string detail;
    for (const std::string& p : v.parts) detail += (detail.empty() ? "" : "; ") + p;
    std::printf("%s %s (%.1f s): %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), seconds_since(t0), detail.c_str());
    std::fflush(stdout);
    failures += !v.pass;
  }
  return failures == 0 ? 0 : 1;
}
