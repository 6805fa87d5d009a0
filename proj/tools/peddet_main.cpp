#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "peddet/commands.hpp"
#include "peddet/error.hpp"

namespace {

// Exit codes: 0 success, 1 validation/check failure, 2 I/O or format error.
enum ExitCode { kOk = 0, kCheckFailed = 1, kIoOrFormat = 2 };

int dispatch(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const peddet::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoOrFormat;
  } catch (const peddet::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoOrFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anchor-free single-shot pedestrian detection engine"};
  app.require_subcommand(1);

  peddet::DetectOptions detect;
  peddet::TrainToyOptions train;
  peddet::EvalOptions eval;
  peddet::BenchOptions bench;
  peddet::GradcheckOptions gradcheck;
  peddet::SynthOptions synth;
  uint64_t seed = 1;
  int threads = 1;

  CLI::App* cmd_detect =
      app.add_subcommand("detect", "Detect boxes in PPM images");
  cmd_detect->add_option("--config", detect.config_path, "network config file")
      ->required();
  cmd_detect->add_option("--weights", detect.weights_path, "PWTS weights file")
      ->required();
  cmd_detect
      ->add_option("--images", detect.image_paths,
                   "image files or directories of .ppm")
      ->required();
  cmd_detect->add_option("--out", detect.out_path,
                         "detections JSONL path (default stdout)");
  cmd_detect->add_option("--obj-thresh", detect.obj_threshold,
                         "objectness threshold");
  cmd_detect->add_option("--cls-thresh", detect.cls_threshold,
                         "class-score threshold");
  cmd_detect->add_option("--nms-iou", detect.nms_iou, "NMS IoU threshold");
  cmd_detect->add_flag("--annotate", detect.annotate,
                       "write copies with 3px box outlines");
  cmd_detect->add_option("--grid-size", detect.grid_size,
                         "expected head resolution (validated)");
  cmd_detect->add_option("--grid-count", detect.grid_count,
                         "expected grid count (validated)");
  cmd_detect->add_option("--dump-head", detect.dump_head_path,
                         "write the first raw head tensor as PTEN");

  CLI::App* cmd_train = app.add_subcommand(
      "train-toy", "Overfit the toy graph on synthetic scenes");
  cmd_train->add_option("--config", train.config_path,
                        "network config (default: built-in toy graph)");
  cmd_train->add_option("--out", train.out_weights, "output weights path");
  cmd_train->add_option("--images", train.scenes_dir,
                        "directory to dump the synthetic scenes + gt.jsonl");
  cmd_train->add_option("--log", train.log_path, "loss log JSONL path");
  cmd_train->add_option("--steps", train.steps, "training steps");
  cmd_train->add_option("--count", train.scene_count, "number of scenes");
  cmd_train->add_option("--lr", train.optim.learning_rate, "learning rate");
  cmd_train->add_option("--momentum", train.optim.momentum, "SGD momentum");
  cmd_train->add_option("--weight-decay", train.optim.weight_decay,
                        "L2 weight decay (conv weights only)");
  cmd_train->add_option("--batch", train.optim.batch_size, "mini-batch size");
  cmd_train->add_flag_function(
      "--no-iou-loss",
      [&](int64_t) { train.loss.include_iou_term = false; },
      "drop the IoU term from the localization loss");
  cmd_train->add_option("--grid-size", train.grid_size,
                        "toy head resolution (10 or 5)");
  cmd_train->add_option("--grid-count", train.grid_count, "toy grid count");

  CLI::App* cmd_eval =
      app.add_subcommand("eval", "Score detections against ground truth");
  cmd_eval->add_option("--detections", eval.detections_path, "detections JSONL")
      ->required();
  cmd_eval->add_option("--gt", eval.gt_path, "ground-truth JSONL")->required();
  cmd_eval->add_option("--out", eval.out_path, "report path (default stdout)");
  cmd_eval->add_option("--match-iou", eval.match_iou,
                       "IoU threshold for a true positive");

  CLI::App* cmd_bench =
      app.add_subcommand("bench", "Single-image inference latency benchmark");
  cmd_bench->add_option("--config", bench.config_path, "network config file")
      ->required();
  cmd_bench->add_option("--weights", bench.weights_path, "PWTS weights file")
      ->required();
  cmd_bench
      ->add_option("--images", bench.image_paths,
                   "image files or directories of .ppm")
      ->required();
  cmd_bench->add_option("--out", bench.out_path, "report path (default stdout)");
  cmd_bench->add_option("--warmup", bench.warmup, "untimed warm-up passes");
  cmd_bench->add_option("--iters", bench.iters,
                        "timed passes (default: one per image)");
  cmd_bench->add_option("--nms-iou", bench.nms_iou, "NMS IoU threshold");
  cmd_bench->add_option("--obj-thresh", bench.obj_threshold,
                        "objectness threshold");

  CLI::App* cmd_gradcheck = app.add_subcommand(
      "gradcheck", "Finite-difference check of the full loss gradient");
  cmd_gradcheck->add_option("--config", gradcheck.config_path,
                            "network config (default: built-in mini graph)");
  cmd_gradcheck->add_option("--epsilon", gradcheck.epsilon,
                            "central-difference step");
  cmd_gradcheck->add_option("--coords", gradcheck.coords,
                            "sampled coordinates (min 200 recommended)");
  cmd_gradcheck->add_flag("--corrupt", gradcheck.corrupt, "")->group("");

  CLI::App* cmd_synth =
      app.add_subcommand("synth", "Generate synthetic scenes + ground truth");
  cmd_synth->add_option("--out", synth.out_dir, "output directory")->required();
  cmd_synth->add_option("--count", synth.count, "number of scenes");
  cmd_synth->add_option("--size", synth.size, "image side length");

  app.add_option("--seed", seed, "deterministic seed");
  app.add_option("--threads", threads, "worker thread cap");
  for (CLI::App* sub : {cmd_detect, cmd_train, cmd_eval, cmd_bench,
                        cmd_gradcheck, cmd_synth}) {
    sub->fallthrough();  // let --seed / --threads follow the subcommand
  }

  CLI11_PARSE(app, argc, argv);

  train.seed = gradcheck.seed = synth.seed = seed;
  train.threads = bench.threads = threads;

  if (cmd_detect->parsed()) {
    return dispatch([&] { return peddet::run_detect(detect, std::cerr); });
  }
  if (cmd_train->parsed()) {
    return dispatch([&] { return peddet::run_train_toy(train, std::cerr); });
  }
  if (cmd_eval->parsed()) {
    return dispatch([&] { return peddet::run_eval(eval, std::cout); });
  }
  if (cmd_bench->parsed()) {
    return dispatch([&] { return peddet::run_bench(bench, std::cout); });
  }
  if (cmd_gradcheck->parsed()) {
    return dispatch([&] { return peddet::run_gradcheck(gradcheck, std::cout); });
  }
  if (cmd_synth->parsed()) {
    return dispatch([&] { return peddet::run_synth(synth, std::cerr); });
  }
  return kCheckFailed;
}
