#include "peddet/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "peddet/gradcheck.hpp"
#include "peddet/image.hpp"
#include "peddet/jsonio.hpp"
#include "peddet/runner.hpp"
#include "peddet/synth.hpp"

namespace peddet {

namespace fs = std::filesystem;
using nlohmann::json;

std::string make_toy_config(int width_divisor, int grid_size, int grid_count) {
  if (width_divisor < 1) throw ValidationError("width divisor must be >= 1");
  if (grid_size != 10 && grid_size != 5) {
    throw ValidationError("toy graph supports grid size 10 or 5");
  }
  auto f = [&](int full) { return std::max(1, full / width_divisor); };
  std::ostringstream cfg;
  cfg << "# generated toy graph, width divisor " << width_divisor << "\n"
      << "image  input   channels=3 width=320 height=320\n"
      << "conv1  sepconv filters=" << f(16) << " kernel=5 stride=2 inputs=image\n"
      << "conv2  sepconv filters=" << f(32) << " kernel=5 inputs=conv1\n"
      << "conv3  sepconv filters=" << f(32) << " kernel=5 inputs=conv2\n"
      << "conv4  sepconv filters=" << f(32) << " kernel=5 inputs=conv3\n"
      << "pool1  avgpool inputs=conv4\n"
      << "conv5  sepconv filters=" << f(64) << " kernel=3 inputs=pool1\n"
      << "conv6  sepconv filters=" << f(64) << " kernel=3 inputs=conv5\n"
      << "merge1 concat  inputs=pool1,conv6\n"
      << "pool2  avgpool inputs=merge1\n"
      << "conv7  sepconv filters=" << f(128) << " kernel=3 inputs=pool2\n"
      << "conv8  sepconv filters=" << f(128) << " kernel=3 inputs=conv7\n"
      << "merge2 concat  inputs=pool2,conv8\n"
      << "pool3  avgpool inputs=merge2\n"
      << "conv9  sepconv filters=" << f(256) << " kernel=3 inputs=pool3\n"
      << "conv10 sepconv filters=" << f(256) << " kernel=3 inputs=conv9\n"
      << "merge3 concat  inputs=pool3,conv10\n"
      << "pool4  avgpool inputs=merge3\n"
      << "tap1   fuse-tap to=10 inputs=merge1\n"
      << "tap2   fuse-tap to=10 inputs=merge2\n"
      << "fusion concat  inputs=tap1,tap2,pool4\n";
  if (grid_size == 5) {
    cfg << "pool5  avgpool inputs=fusion\n"
        << "head   head    grids=" << grid_count << " inputs=pool5\n";
  } else {
    cfg << "head   head    grids=" << grid_count << " inputs=fusion\n";
  }
  return cfg.str();
}

std::string make_mini_config(int grid_count) {
  std::ostringstream cfg;
  cfg << "image  input   channels=3 width=32 height=32\n"
      << "conv1  sepconv filters=4 kernel=3 stride=2 inputs=image\n"
      << "conv2  sepconv filters=8 kernel=3 inputs=conv1\n"
      << "pool1  avgpool inputs=conv2\n"
      << "conv3  sepconv filters=8 kernel=3 inputs=pool1\n"
      << "merge1 concat  inputs=pool1,conv3\n"
      << "pool2  avgpool inputs=merge1\n"
      << "conv4  sepconv filters=16 kernel=3 inputs=pool2\n"
      << "merge2 concat  inputs=pool2,conv4\n"
      << "pool3  avgpool inputs=merge2\n"
      << "tap1   fuse-tap to=2 inputs=merge1\n"
      << "tap2   fuse-tap to=2 inputs=merge2\n"
      << "fusion concat  inputs=tap1,tap2,pool3\n"
      << "head   head    grids=" << grid_count << " inputs=fusion\n";
  return cfg.str();
}

Model load_model(const std::string& config_path,
                 const std::string& weights_path) {
  Model m{load_model_config(config_path), load_weights(weights_path)};
  check_params_match(m.graph, m.params);
  return m;
}

HeadConfig head_config_for(const ModelGraph& graph) {
  HeadConfig cfg;
  cfg.grid_size = graph.head_grid_size();
  cfg.grid_count = graph.grid_count();
  cfg.image_w = graph.input_w();
  cfg.image_h = graph.input_h();
  return cfg;
}

std::vector<std::string> expand_image_paths(
    const std::vector<std::string>& paths) {
  std::vector<std::string> out;
  for (const std::string& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<std::string> dir_files;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".ppm") {
          dir_files.push_back(e.path().string());
        }
      }
      std::sort(dir_files.begin(), dir_files.end());
      out.insert(out.end(), dir_files.begin(), dir_files.end());
    } else {
      out.push_back(p);
    }
  }
  if (out.empty()) throw IoError("no input images found");
  return out;
}

namespace {

void check_grid_overrides(const ModelGraph& graph, int grid_size,
                          int grid_count) {
  if (grid_size > 0 && grid_size != graph.head_grid_size()) {
    throw ValidationError("--grid-size " + std::to_string(grid_size) +
                          " does not match the config head resolution " +
                          std::to_string(graph.head_grid_size()));
  }
  if (grid_count > 0 && grid_count != graph.grid_count()) {
    throw ValidationError("--grid-count " + std::to_string(grid_count) +
                          " does not match the config head grids " +
                          std::to_string(graph.grid_count()));
  }
}

TensorF prepare_image(const ImageU8& img, const ModelGraph& graph) {
  if (img.w == graph.input_w() && img.h == graph.input_h()) {
    return image_to_tensor(img);
  }
  return image_to_tensor(resize_bilinear(img, graph.input_w(), graph.input_h()));
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write output file: " + path);
  return f;
}

}  // namespace

int run_detect(const DetectOptions& opt, std::ostream& log) {
  Model model = load_model(opt.config_path, opt.weights_path);
  check_grid_overrides(model.graph, opt.grid_size, opt.grid_count);

  HeadConfig head = head_config_for(model.graph);
  head.obj_threshold = opt.obj_threshold;
  head.cls_threshold = opt.cls_threshold;
  head.nms_iou = opt.nms_iou;
  head.validate();

  const std::vector<std::string> images = expand_image_paths(opt.image_paths);

  std::ofstream file_out;
  if (!opt.out_path.empty()) file_out = open_out(opt.out_path);
  std::ostream& out = opt.out_path.empty() ? std::cout : file_out;

  bool dumped = false;
  for (const std::string& path : images) {
    const ImageU8 img = read_ppm(path);
    const TensorF input = prepare_image(img, model.graph);
    const TensorF head_raw = graph_forward(model.graph, model.params, input);
    if (!opt.dump_head_path.empty() && !dumped) {
      save_tensor(head_raw, opt.dump_head_path);
      dumped = true;
    }
    const std::vector<Detection> dets = nms(decode(head_raw, head), head.nms_iou);
    const std::string name = fs::path(path).filename().string();
    write_detections_jsonl(out, name, dets);
    if (opt.annotate) {
      ImageU8 annotated = img;
      for (const Detection& d : dets) {
        draw_box_outline(annotated, d.bbox, 3, 0, 255, 0);
      }
      fs::path ap = fs::path(path);
      ap.replace_extension();
      ap += "_annotated.ppm";
      write_ppm(annotated, ap.string());
    }
    log << name << ": " << dets.size() << " detection(s)\n";
  }
  return 0;
}

namespace {

struct TrainSample {
  TensorF input;
  std::vector<BBox> boxes;
  ResponsibilityMap resp;
};

struct ImagePass {
  LossBreakdown<float> breakdown;
  ParamSet<float> grads;  // gradients only; values unused
};

ImagePass train_pass(const ModelGraph& graph, const ParamSet<float>& params,
                     const TrainSample& sample, const HeadConfig& head,
                     const LossConfig& loss_cfg, float scale) {
  ImagePass pass{.breakdown = {}, .grads = params};
  pass.grads.zero_grads();
  Trace<float> trace;
  const TensorF head_raw = graph_forward(graph, params, sample.input, &trace);
  LossResult<float> loss = detection_loss(head_raw, sample.resp, sample.boxes,
                                          head, loss_cfg, /*want_grad=*/true);
  loss.d_head.array() *= scale;
  graph_backward(graph, pass.grads, trace, loss.d_head);
  pass.breakdown = loss.breakdown;
  return pass;
}

}  // namespace

int run_train_toy(const TrainToyOptions& opt, std::ostream& log,
                  TrainToyOutcome* outcome) {
  opt.optim.validate();
  opt.loss.validate();
  if (opt.steps < 0) throw ValidationError("steps must be >= 0");

  // Grid flags shape the built-in toy graph; an explicit config wins.
  const ModelGraph graph =
      opt.config_path.empty()
          ? parse_model_config(make_toy_config(2, opt.grid_size, opt.grid_count))
          : load_model_config(opt.config_path);
  HeadConfig head = head_config_for(graph);

  SynthConfig synth_cfg;
  synth_cfg.count = opt.scene_count;
  synth_cfg.size = graph.input_w();
  const std::vector<SynthScene> scenes =
      make_synthetic_scenes(synth_cfg, opt.seed);

  if (!opt.scenes_dir.empty()) {
    fs::create_directories(opt.scenes_dir);
    std::ofstream gt = open_out((fs::path(opt.scenes_dir) / "gt.jsonl").string());
    for (size_t i = 0; i < scenes.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "scene_%03zu.ppm", i);
      write_ppm(scenes[i].image, (fs::path(opt.scenes_dir) / name).string());
      write_gt_jsonl(gt, name, scenes[i].boxes);
    }
  }

  std::vector<TrainSample> samples;
  samples.reserve(scenes.size());
  for (const SynthScene& s : scenes) {
    samples.push_back({image_to_tensor(s.image), s.boxes,
                       assign_responsibility(s.boxes, head)});
  }

  ParamSet<float> params = init_params<float>(graph, opt.seed);

  std::ofstream loss_log;
  if (!opt.log_path.empty()) loss_log = open_out(opt.log_path);

  TrainToyOutcome result;
  result.param_count = graph.param_count();

  const int batch = std::min<int>(opt.optim.batch_size,
                                  static_cast<int>(samples.size()));
  const float scale = 1.0f / static_cast<float>(batch);
  for (int step = 1; step <= opt.steps; ++step) {
    std::vector<int> batch_idx;
    for (int j = 0; j < batch; ++j) {
      batch_idx.push_back(static_cast<int>(
          (static_cast<long>(step - 1) * batch + j) % samples.size()));
    }

    std::vector<ImagePass> passes(batch_idx.size());
    try {
      if (opt.threads > 1) {
        std::vector<std::future<ImagePass>> futures;
        for (int idx : batch_idx) {
          futures.push_back(std::async(std::launch::async, [&, idx] {
            return train_pass(graph, params, samples[static_cast<size_t>(idx)],
                              head, opt.loss, scale);
          }));
        }
        for (size_t j = 0; j < futures.size(); ++j) passes[j] = futures[j].get();
      } else {
        for (size_t j = 0; j < batch_idx.size(); ++j) {
          passes[j] = train_pass(graph, params,
                                 samples[static_cast<size_t>(batch_idx[j])],
                                 head, opt.loss, scale);
        }
      }
    } catch (const ValidationError& e) {
      throw ValidationError("training aborted at step " + std::to_string(step) +
                            ": " + e.what());
    }

    LossBreakdown<float> mean;
    for (const ImagePass& pass : passes) {
      mean.total += pass.breakdown.total * scale;
      mean.loc += pass.breakdown.loc * scale;
      mean.op += pass.breakdown.op * scale;
      mean.cls += pass.breakdown.cls * scale;
      for (size_t pi = 0; pi < params.params.size(); ++pi) {
        params.params[pi].grad.array() += pass.grads.params[pi].grad.array();
      }
    }
    if (!std::isfinite(mean.total)) {
      throw ValidationError("training aborted at step " + std::to_string(step) +
                            ": non-finite loss");
    }

    if (loss_log) {
      json j{{"step", step},
             {"total", mean.total},
             {"loc", mean.loc},
             {"op", mean.op},
             {"cls", mean.cls}};
      loss_log << j.dump() << "\n";
    }
    if (step == 10) result.step10_total = mean.total;
    result.final_total = mean.total;
    if (step % 200 == 0 || step == 1) {
      log << "step " << step << " loss " << mean.total << " (loc " << mean.loc
          << ", op " << mean.op << ", cls " << mean.cls << ")\n";
    }

    // Linear warmup over the first tenth of the run keeps the initial
    // dense-background gradients from slamming the head into saturation.
    OptimizerConfig step_cfg = opt.optim;
    const int warmup = std::max(1, opt.steps / 10);
    if (step < warmup) {
      step_cfg.learning_rate *= static_cast<double>(step) / warmup;
      step_cfg.learning_rate = std::max(step_cfg.learning_rate, 1e-9);
    }
    sgd_step(params, step_cfg);
  }

  save_weights(params, opt.out_weights);

  // Re-run the finished detector on its own training scenes.
  std::vector<MatchResult> matches;
  for (const TrainSample& s : samples) {
    const TensorF head_raw = graph_forward(graph, params, s.input);
    const std::vector<Detection> dets =
        nms(decode(head_raw, head), head.nms_iou);
    matches.push_back(match_detections(dets, s.boxes, 0.5f));
  }
  result.train_report = compute_report(matches);
  log << "train-set eval: " << report_to_json(result.train_report) << "\n";
  log << "weights: " << opt.out_weights << " (" << result.param_count
      << " parameters)\n";

  if (outcome) *outcome = result;
  return 0;
}

int run_eval(const EvalOptions& opt, std::ostream& log, EvalReport* report) {
  const auto gts = read_gt_jsonl(opt.gt_path);
  const auto dets = read_detections_jsonl(opt.detections_path);
  for (const auto& [name, _] : dets) {
    if (!gts.count(name)) {
      throw ValidationError("detections reference image '" + name +
                            "' absent from the ground-truth file");
    }
  }
  std::vector<MatchResult> matches;
  for (const auto& [name, boxes] : gts) {
    const auto it = dets.find(name);
    static const std::vector<Detection> none;
    matches.push_back(
        match_detections(it == dets.end() ? none : it->second, boxes,
                         opt.match_iou));
  }
  const EvalReport r = compute_report(matches);
  if (report) *report = r;
  if (opt.out_path.empty()) {
    log << report_to_json(r) << "\n";
  } else {
    open_out(opt.out_path) << report_to_json(r) << "\n";
  }
  return 0;
}

int run_bench(const BenchOptions& opt, std::ostream& log, BenchReport* report) {
  Model model = load_model(opt.config_path, opt.weights_path);
  HeadConfig head = head_config_for(model.graph);
  head.obj_threshold = opt.obj_threshold;
  head.cls_threshold = opt.cls_threshold;
  head.nms_iou = opt.nms_iou;

  const std::vector<std::string> paths = expand_image_paths(opt.image_paths);
  std::vector<TensorF> inputs;
  inputs.reserve(paths.size());
  for (const std::string& p : paths) {
    inputs.push_back(prepare_image(read_ppm(p), model.graph));
  }

  const int iters = opt.iters > 0 ? opt.iters : static_cast<int>(inputs.size());
  const BenchReport r = benchmark(
      [&](int i) {
        const TensorF& in = inputs[static_cast<size_t>(i) % inputs.size()];
        const TensorF head_raw = graph_forward(model.graph, model.params, in);
        const std::vector<Detection> dets =
            nms(decode(head_raw, head), head.nms_iou);
        (void)dets;
      },
      iters, opt.warmup);
  if (report) *report = r;

  json j{{"fps", r.fps},
         {"latency_mean_s", r.latency_mean_s},
         {"latency_p50_s", r.latency_p50_s},
         {"latency_p95_s", r.latency_p95_s},
         {"n_timed", r.n_timed},
         {"warmup", r.warmup},
         {"threads", opt.threads},
         {"param_count", model.graph.param_count()},
         {"predictor_slots", head.slot_count()},
         {"weights_mb",
          static_cast<double>(fs::file_size(opt.weights_path)) / 1e6}};
  if (opt.out_path.empty()) {
    log << j.dump() << "\n";
  } else {
    open_out(opt.out_path) << j.dump() << "\n";
  }
  return 0;
}

int run_gradcheck(const GradcheckOptions& opt, std::ostream& log,
                  double* max_rel_error) {
  const ModelGraph graph = opt.config_path.empty()
                               ? parse_model_config(make_mini_config())
                               : load_model_config(opt.config_path);
  HeadConfig head = head_config_for(graph);

  // Deterministic miniature problem: noise image, two ground-truth boxes.
  Rng rng(opt.seed);
  TensorD image(1, graph.input_channels(), graph.input_h(), graph.input_w());
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    image.data()[i] = rng.uniform();
  }
  std::vector<BBox> boxes{{0.31f, 0.42f, 0.28f, 0.33f},
                          {0.72f, 0.68f, 0.52f, 0.49f}};
  const ResponsibilityMap resp = assign_responsibility(boxes, head);
  const LossConfig loss_cfg;

  ParamSet<double> params = init_params<double>(graph, opt.seed);

  Trace<double> trace;
  const TensorD head_raw = graph_forward(graph, params, image, &trace);
  LossResult<double> base = detection_loss(head_raw, resp, boxes, head,
                                           loss_cfg, /*want_grad=*/true);
  params.zero_grads();
  graph_backward(graph, params, trace, base.d_head);
  if (opt.corrupt) {
    for (auto& p : params.params) p.grad.array() = 1.5 * p.grad.array() + 0.1;
  }

  // The objectness targets are stop-gradients: freeze them at the base
  // evaluation so the numeric differences see the same constants the
  // analytic gradient assumed.
  const std::vector<double> frozen = base.obj_targets;
  const auto loss_fn = [&](const ParamSet<double>& p) {
    const TensorD out = graph_forward(graph, p, image);
    return detection_loss(out, resp, boxes, head, loss_cfg,
                          /*want_grad=*/false, &frozen)
        .breakdown.total;
  };

  const GradCheckResult res =
      finite_diff_check(loss_fn, params, opt.epsilon, opt.coords, opt.seed);
  if (max_rel_error) *max_rel_error = res.max_rel_error;

  const bool pass = res.max_rel_error < opt.threshold;
  log << "checked " << res.coords_checked << " coordinates, max relative error "
      << res.max_rel_error;
  if (!res.worst_param.empty()) {
    log << " (worst: " << res.worst_param << "[" << res.worst_index
        << "], analytic " << res.worst_analytic << ", numeric "
        << res.worst_numeric << ")";
  }
  log << "\n" << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? 0 : 1;
}

int run_synth(const SynthOptions& opt, std::ostream& log) {
  SynthConfig cfg;
  cfg.count = opt.count;
  cfg.size = opt.size;
  const std::vector<SynthScene> scenes = make_synthetic_scenes(cfg, opt.seed);
  fs::create_directories(opt.out_dir);
  std::ofstream gt = open_out((fs::path(opt.out_dir) / "gt.jsonl").string());
  for (size_t i = 0; i < scenes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03zu.ppm", i);
    write_ppm(scenes[i].image, (fs::path(opt.out_dir) / name).string());
    write_gt_jsonl(gt, name, scenes[i].boxes);
  }
  log << "wrote " << scenes.size() << " scenes to " << opt.out_dir << "\n";
  return 0;
}

}  // namespace peddet
