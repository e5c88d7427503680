// evr: command-line front end for scene generation, fitting, rendering,
// evaluation and the live render service.

#include "evr/checkpoint.hpp"
#include "evr/dataset.hpp"
#include "evr/errors.hpp"
#include "evr/fit.hpp"
#include "evr/image_io.hpp"
#include "evr/metrics.hpp"
#include "evr/renderer.hpp"
#include "evr/service.hpp"
#include "evr/synthetic.hpp"
#include "evr/volume_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <pthread.h>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>

namespace fs = std::filesystem;
using namespace evr;

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  return f;
}

struct Loaded {
  Checkpoint ck;
  MultiViewDataset data;
};

Loaded load_scene(const fs::path& dir) {
  Loaded l;
  l.ck = load_checkpoint(dir);
  l.data = load_dataset(checkpoint_dataset_path(dir, l.ck));
  return l;
}

/// Camera from --camera file or --view index; --width/--height resize it.
Camera pick_camera(const MultiViewDataset& data, const std::string& camera_file, int view, int width, int height) {
  Camera cam;
  if (!camera_file.empty()) {
    try {
      cam = camera_from_json(read_json(camera_file));
    } catch (const ArgumentError& e) {
      throw ArgumentError(camera_file + ": " + e.what());
    }
  } else {
    if (view < 0 || static_cast<size_t>(view) >= data.size()) {
      throw ArgumentError("--view " + std::to_string(view) + " out of range (dataset has " +
                          std::to_string(data.size()) + " views)");
    }
    cam = data.cameras[view];
  }
  if (width > 0 || height > 0) {
    cam = cam.resized(width > 0 ? width : cam.width(), height > 0 ? height : cam.height());
  }
  return cam;
}

std::vector<int> complement(const std::vector<int>& used, size_t n) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(n); ++i) {
    if (std::find(used.begin(), used.end(), i) == used.end()) out.push_back(i);
  }
  return out;
}

void print_timings(const StageTimings& t) {
  const double sum = t.stage_sum();
  std::printf("%-22s %10s %7s\n", "stage", "ms", "share");
  const std::pair<const char*, double> rows[] = {{"encoder", t.encoder},
                                                 {"geometry volume", t.geometry},
                                                 {"visibility reasoning", t.visibility},
                                                 {"ray integration", t.integration},
                                                 {"render head", t.render_head}};
  for (const auto& [name, ms] : rows) std::printf("%-22s %10.3f %6.1f%%\n", name, ms, 100.0 * ms / t.total);
  std::printf("%-22s %10.3f %6.1f%%\n", "stage sum", sum, 100.0 * sum / t.total);
  std::printf("%-22s %10.3f\n", "total", t.total);
}

struct RenderFlags {
  int nu = 0, nh = -1, views = 0, upsample = 0, workers = 0;
  std::string aggregation;

  void add(CLI::App* cmd) {
    cmd->add_option("--nu", nu, "uniform samples per ray");
    cmd->add_option("--nh", nh, "hierarchical samples per ray");
    cmd->add_option("--views", views, "input views per novel view");
    cmd->add_option("--upsample", upsample, "render-head upsampling factor");
    cmd->add_option("--workers", workers, "worker threads (0: all cores)");
    cmd->add_option("--aggregation", aggregation, "visibility or average")
        ->check(CLI::IsMember({"visibility", "average"}));
  }
  void apply(RenderConfig& c, const CLI::App* cmd) const {
    if (cmd->count("--nu")) c.uniform_samples = nu;
    if (cmd->count("--nh")) c.hierarchical_samples = nh;
    if (cmd->count("--views")) c.input_views = views;
    if (cmd->count("--upsample")) c.upsample = upsample;
    if (cmd->count("--workers")) c.workers = workers;
    if (!aggregation.empty()) c.aggregation = aggregation == "average" ? Aggregation::average : Aggregation::visibility;
    c.validate();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalizable volume renderer: synthetic scenes, per-scene fitting, novel-view rendering"};
  app.require_subcommand(1);
  app.fallthrough(false);

  // make-scene
  auto* mk = app.add_subcommand("make-scene", "render a synthetic scene spec into a dataset directory");
  std::string mk_spec, mk_out;
  uint64_t mk_seed = 0;
  double mk_step = 0.005;
  bool mk_float = false, mk_demo = false;
  mk->add_option("--spec", mk_spec, "scene spec JSON");
  mk->add_flag("--demo", mk_demo, "use the built-in demo scene");
  mk->add_option("--out", mk_out, "output directory")->required();
  mk->add_option("--seed", mk_seed, "seed for randomized primitives");
  mk->add_option("--step", mk_step, "oracle ray-march depth step")->check(CLI::PositiveNumber);
  mk->add_flag("--float", mk_float, "also write float32 VGRD copies of each view");

  // fit
  auto* fit = app.add_subcommand("fit", "fit scene parameters to a dataset");
  std::string fit_data, fit_out, fit_model, fit_csv;
  int fit_iters = 500;
  uint64_t fit_seed = 0;
  double fit_lr = 5e-4, fit_lambda = kPerceptualWeight;
  std::vector<int> fit_train, fit_holdout;
  RenderFlags fit_rf;
  fit->add_option("--data", fit_data, "dataset directory")->required();
  fit->add_option("--out", fit_out, "checkpoint directory")->required();
  fit->add_option("--model", fit_model, "model config JSON");
  fit->add_option("--iters", fit_iters, "iterations")->check(CLI::NonNegativeNumber);
  fit->add_option("--seed", fit_seed, "seed for initialization, schedule and sampling");
  fit->add_option("--lr", fit_lr, "Adam learning rate")->check(CLI::PositiveNumber);
  fit->add_option("--lambda", fit_lambda, "weight of the intermediate-image loss")->check(CLI::NonNegativeNumber);
  fit->add_option("--train", fit_train, "training view indices (default: all but --holdout)")->delimiter(',');
  fit->add_option("--holdout", fit_holdout, "views excluded from fitting")->delimiter(',');
  fit->add_option("--loss-csv", fit_csv, "write the per-iteration loss trace");
  fit_rf.add(fit);

  // render
  auto* rd = app.add_subcommand("render", "render a novel view to PNG");
  std::string rd_ck, rd_camera, rd_out;
  int rd_view = 0, rd_w = 0, rd_h = 0;
  bool rd_det = false;
  uint64_t rd_seed = 0;
  RenderFlags rd_rf;
  rd->add_option("--checkpoint", rd_ck, "checkpoint directory")->required();
  rd->add_option("--camera", rd_camera, "camera JSON file");
  rd->add_option("--view", rd_view, "dataset view to render when --camera is absent");
  rd->add_option("--width", rd_w, "output width");
  rd->add_option("--height", rd_h, "output height");
  rd->add_option("--out", rd_out, "output PNG")->required();
  rd->add_flag("--deterministic", rd_det, "deterministic sample placement");
  rd->add_option("--seed", rd_seed, "sampling seed for stochastic renders");
  rd_rf.add(rd);

  // eval
  auto* ev = app.add_subcommand("eval", "PSNR/SSIM of rendered views against ground truth");
  std::string ev_ck, ev_csv, ev_images, ev_ref;
  std::vector<int> ev_views;
  RenderFlags ev_rf;
  ev->add_option("--checkpoint", ev_ck, "checkpoint directory");
  ev->add_option("--images", ev_images, "directory of rendered PNGs (compare mode)");
  ev->add_option("--reference", ev_ref, "directory of reference PNGs (compare mode)");
  ev->add_option("--csv", ev_csv, "write the table as CSV");
  ev_rf.add(ev);
  ev->add_option("--eval-views", ev_views, "views to evaluate (default: held-out views, else all)")->delimiter(',');

  // dump-volume
  auto* dv = app.add_subcommand("dump-volume", "export a density or visibility volume as VGRD");
  std::string dv_ck, dv_camera, dv_out, dv_field = "density", dv_png;
  int dv_view = 0, dv_input = 0, dv_slice = -1;
  dv->add_option("--checkpoint", dv_ck, "checkpoint directory")->required();
  dv->add_option("--camera", dv_camera, "camera JSON file");
  dv->add_option("--view", dv_view, "dataset view when --camera is absent");
  dv->add_option("--field", dv_field, "density, visibility or alpha")
      ->check(CLI::IsMember({"density", "visibility", "alpha"}));
  dv->add_option("--input", dv_input, "input-view slot for visibility/alpha (0 = nearest)");
  dv->add_option("--out", dv_out, "output VGRD file")->required();
  dv->add_option("--slice", dv_slice, "depth plane to export as a heatmap");
  dv->add_option("--png", dv_png, "heatmap PNG path for --slice");

  // load-volume
  auto* lv = app.add_subcommand("load-volume", "summarize a VGRD file");
  std::string lv_in, lv_png;
  int lv_slice = -1, lv_channel = 0;
  lv->add_option("file", lv_in, "VGRD file")->required();
  lv->add_option("--slice", lv_slice, "depth plane to export as a heatmap");
  lv->add_option("--channel", lv_channel, "channel for --slice");
  lv->add_option("--png", lv_png, "heatmap PNG path for --slice");

  // bench
  auto* bn = app.add_subcommand("bench", "per-stage render timing");
  std::string bn_ck;
  int bn_w = 64, bn_h = 64, bn_repeats = 3;
  RenderFlags bn_rf;
  bn->add_option("--checkpoint", bn_ck, "checkpoint (default: built-in demo scene, initial parameters)");
  bn->add_option("--width", bn_w, "frame width")->check(CLI::PositiveNumber);
  bn->add_option("--height", bn_h, "frame height")->check(CLI::PositiveNumber);
  bn->add_option("--repeats", bn_repeats, "timed renders; the median total is reported")->check(CLI::PositiveNumber);
  bn_rf.add(bn);

  // serve
  auto* sv = app.add_subcommand("serve", "HTTP/WebSocket render service");
  std::string sv_ck, sv_address = "127.0.0.1";
  int sv_port = 8080, sv_render_threads = 2;
  sv->add_option("--checkpoint", sv_ck, "checkpoint directory")->required();
  sv->add_option("--address", sv_address, "bind address");
  sv->add_option("--port", sv_port, "port (0: any free port)")->check(CLI::Range(0, 65535));
  sv->add_option("--render-threads", sv_render_threads, "concurrent renders")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*mk) {
      if (mk_spec.empty() == !mk_demo) throw ArgumentError("make-scene: give exactly one of --spec or --demo");
      const auto spec = mk_demo ? demo_scene_spec() : read_json(mk_spec);
      const SyntheticScene scene = generate_scene(spec, mk_seed);
      save_dataset(mk_out, make_dataset(scene, mk_step), mk_float);
      std::printf("wrote %zu views to %s\n", scene.cameras().size(), mk_out.c_str());
      return 0;
    }

    if (*fit) {
      MultiViewDataset data = load_dataset(fit_data);
      ModelConfig model = fit_model.empty() ? ModelConfig{} : model_config_from_json(read_json(fit_model));
      FitConfig fc;
      fc.iterations = fit_iters;
      fc.seed = fit_seed;
      fc.lr = fit_lr;
      fc.lambda = fit_lambda;
      fit_rf.apply(fc.render, fit);
      fc.render.seed = fit_seed;
      for (int v : fit_holdout) {
        if (v < 0 || static_cast<size_t>(v) >= data.size()) throw ArgumentError("--holdout: view index out of range");
      }
      fc.train_views = fit_train.empty() ? complement(fit_holdout, data.size()) : fit_train;
      if (static_cast<int>(fc.train_views.size()) <= fc.render.input_views) {
        throw ArgumentError("fit: need more training views than --views (" + std::to_string(fc.render.input_views) + ")");
      }
      std::ofstream csv;
      if (!fit_csv.empty()) csv = open_out(fit_csv);
      const int every = std::max(1, fit_iters / 10);
      FitResult res = fit_scene(data, model, fc, [&](const LossRecord& r) {
        if (r.iteration % every == 0 || r.iteration + 1 == fit_iters) {
          std::fprintf(stderr, "iter %5d  view %2d  L_total %.6f  (%.1f ms)\n", r.iteration, r.target, r.total,
                       r.wall_ms);
        }
      });
      if (csv.is_open()) write_loss_csv(csv, res.trace);
      Checkpoint ck;
      ck.model = model;
      ck.render = fc.render;
      ck.params = res.scene.values;
      ck.step = res.scene.step;
      ck.seed = fit_seed;
      ck.dataset = fs::absolute(fit_data).lexically_normal().string();
      ck.train_views = fc.train_views;
      save_checkpoint(fit_out, ck);
      std::printf("fitted %d iterations; checkpoint in %s\n", fit_iters, fit_out.c_str());
      return 0;
    }

    if (*rd) {
      Loaded l = load_scene(rd_ck);
      RenderConfig cfg = l.ck.render;
      rd_rf.apply(cfg, rd);
      cfg.deterministic = rd_det;
      if (rd->count("--seed")) cfg.seed = rd_seed;
      if (!rd_det && !rd->count("--seed")) {
        cfg.seed = static_cast<uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
      }
      const Camera cam = pick_camera(l.data, rd_camera, rd_view, rd_w, rd_h);
      Renderer renderer(l.data, l.ck.model);
      const RenderOutput out = renderer.render(cam, l.ck.params, cfg, l.ck.train_views);
      write_png(rd_out, out.image);
      std::printf("%s  %dx%d  %.1f ms\n", rd_out.c_str(), out.image.width(), out.image.height(), out.timings.total);
      return 0;
    }

    if (*ev) {
      struct Row {
        std::string name;
        double psnr, ssim;
      };
      std::vector<Row> rows;
      if (!ev_images.empty() || !ev_ref.empty()) {
        if (ev_images.empty() || ev_ref.empty() || !ev_ck.empty()) {
          throw ArgumentError("eval: compare mode needs --images and --reference and no --checkpoint");
        }
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(ev_images)) {
          if (e.path().extension() == ".png") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw IoError(ev_images + ": no PNG files");
        for (const auto& f : files) {
          const Image a = read_png(f);
          const Image b = read_png(fs::path(ev_ref) / f.filename());
          rows.push_back({f.filename().string(), psnr(a, b), ssim(a, b)});
        }
      } else {
        if (ev_ck.empty()) throw ArgumentError("eval: --checkpoint is required");
        Loaded l = load_scene(ev_ck);
        RenderConfig cfg = l.ck.render;
        ev_rf.apply(cfg, ev);
        cfg.deterministic = true;
        std::vector<int> views = ev_views;
        if (views.empty()) views = complement(l.ck.train_views, l.data.size());
        if (views.empty() || l.ck.train_views.empty()) {
          views.resize(l.data.size());
          std::iota(views.begin(), views.end(), 0);
        }
        Renderer renderer(l.data, l.ck.model);
        for (int v : views) {
          if (v < 0 || static_cast<size_t>(v) >= l.data.size()) throw ArgumentError("--eval-views: index out of range");
          const RenderOutput out = renderer.render(l.data.cameras[v], l.ck.params, cfg, l.ck.train_views);
          rows.push_back({"view_" + std::to_string(v), psnr(out.image, l.data.images[v]),
                          ssim(out.image, l.data.images[v])});
        }
      }
      double mp = 0.0, ms = 0.0;
      std::printf("%-24s %9s %8s\n", "view", "PSNR", "SSIM");
      for (const Row& r : rows) {
        std::printf("%-24s %9.3f %8.4f\n", r.name.c_str(), r.psnr, r.ssim);
        mp += r.psnr / rows.size();
        ms += r.ssim / rows.size();
      }
      std::printf("%-24s %9.3f %8.4f\n", "mean", mp, ms);
      if (!ev_csv.empty()) {
        auto f = open_out(ev_csv);
        f << "view,psnr,ssim\n";
        char buf[128];
        for (const Row& r : rows) {
          std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", r.name.c_str(), r.psnr, r.ssim);
          f << buf;
        }
      }
      return 0;
    }

    if (*dv) {
      Loaded l = load_scene(dv_ck);
      const Camera cam = pick_camera(l.data, dv_camera, dv_view, 0, 0);
      RenderConfig cfg = l.ck.render;
      cfg.deterministic = true;
      Renderer renderer(l.data, l.ck.model);
      const FrameState fs_ = renderer.evaluate(cam, l.ck.params, cfg, l.ck.train_views);
      const VolumeGrid* vol = &fs_.density.density;
      if (dv_field != "density") {
        if (fs_.visibility.empty()) throw ArgumentError("dump-volume: visibility volumes need visibility aggregation");
        if (dv_input < 0 || static_cast<size_t>(dv_input) >= fs_.visibility.size()) {
          throw ArgumentError("--input: slot out of range");
        }
        vol = dv_field == "alpha" ? &fs_.visibility[dv_input].alpha : &fs_.visibility[dv_input].visibility;
      }
      save_volume(dv_out, *vol);
      std::printf("%s  %dx%dx%dx%d\n", dv_out.c_str(), vol->height(), vol->width(), vol->depth(), vol->channels());
      if (dv_slice >= 0) {
        if (dv_png.empty() || dv_slice >= vol->depth()) throw ArgumentError("--slice: needs --png and a valid plane");
        FeatureMap plane(vol->height(), vol->width(), 1);
        double hi = 0.0;
        for (int y = 0; y < vol->height(); ++y)
          for (int x = 0; x < vol->width(); ++x) hi = std::max(hi, plane.at(y, x) = vol->at(y, x, dv_slice));
        write_png(dv_png, heatmap(plane, 0.0, dv_field == "density" ? hi : 1.0));
      }
      return 0;
    }

    if (*lv) {
      const VolumeGrid v = load_volume(lv_in);
      const auto& d = v.data();
      const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
      const double mean = d.empty() ? 0.0 : std::accumulate(d.begin(), d.end(), 0.0) / d.size();
      std::printf("shape %d x %d x %d x %d  min %.6g  max %.6g  mean %.6g\n", v.height(), v.width(), v.depth(),
                  v.channels(), d.empty() ? 0.0 : *lo, d.empty() ? 0.0 : *hi, mean);
      if (lv_slice >= 0) {
        if (lv_png.empty() || lv_slice >= v.depth() || lv_channel < 0 || lv_channel >= v.channels()) {
          throw ArgumentError("--slice: needs --png, a valid plane and channel");
        }
        FeatureMap plane(v.height(), v.width(), 1);
        for (int y = 0; y < v.height(); ++y)
          for (int x = 0; x < v.width(); ++x) plane.at(y, x) = v.at(y, x, lv_slice, lv_channel);
        write_png(lv_png, heatmap(plane, *lo, *hi));
      }
      return 0;
    }

    if (*bn) {
      MultiViewDataset data;
      ModelConfig model;
      ModelParams params;
      RenderConfig cfg;
      std::vector<int> pool;
      if (bn_ck.empty()) {
        data = make_dataset(generate_scene(demo_scene_spec(), 0), 0.01);
        params = ModelParams::initialize(model, 0);
      } else {
        Loaded l = load_scene(bn_ck);
        data = std::move(l.data);
        model = l.ck.model;
        params = std::move(l.ck.params);
        cfg = l.ck.render;
        pool = l.ck.train_views;
      }
      bn_rf.apply(cfg, bn);
      cfg.deterministic = true;
      const Camera cam = data.cameras[0].resized(bn_w, bn_h);
      Renderer renderer(data, model);
      renderer.render(cam, params, cfg, pool);  // warm-up
      std::vector<StageTimings> runs;
      for (int i = 0; i < bn_repeats; ++i) runs.push_back(renderer.render(cam, params, cfg, pool).timings);
      std::sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) { return a.total < b.total; });
      const StageTimings& t = runs[runs.size() / 2];
      std::printf("frame %dx%d  nu %d  nh %d  views %d  workers %d\n", bn_w, bn_h, cfg.uniform_samples,
                  cfg.hierarchical_samples, cfg.input_views, cfg.workers);
      print_timings(t);
      const double ratio = t.stage_sum() / t.total;
      std::printf("decomposition %s (stage sum / total = %.3f)\n", std::abs(ratio - 1.0) <= 0.05 ? "ok" : "off", ratio);
      return 0;
    }

    if (*sv) {
      auto session = ServiceSession::from_checkpoint(sv_ck);
      ServiceOptions opts;
      opts.address = sv_address;
      opts.port = static_cast<uint16_t>(sv_port);
      opts.render_threads = sv_render_threads;
      RenderService service(session, opts);
      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);  // inherited by the service threads
      const uint16_t port = service.start();
      std::printf("listening on http://%s:%u\n", sv_address.c_str(), port);
      std::fflush(stdout);
      int sig = 0;
      sigwait(&signals, &sig);
      service.stop();
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "evr: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
