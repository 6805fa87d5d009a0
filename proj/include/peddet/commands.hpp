#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "peddet/eval.hpp"
#include "peddet/graph.hpp"
#include "peddet/head.hpp"
#include "peddet/loss.hpp"
#include "peddet/optim.hpp"
#include "peddet/params.hpp"

namespace peddet {

/// Reference graph scaled down in width for desk-size training runs.
/// grid_size 10 keeps the native head resolution; 5 appends one more
/// pooling stage. grid_count sets the number of size grids.
std::string make_toy_config(int width_divisor = 4, int grid_size = 10,
                            int grid_count = 5);

/// Miniature graph (32x32 input, 2x2 head, 2 grids) small enough for
/// exhaustive finite differencing.
std::string make_mini_config(int grid_count = 2);

struct Model {
  ModelGraph graph;
  ParamSet<float> params;
};

/// Parses the config, loads the weights, and cross-checks them.
Model load_model(const std::string& config_path,
                 const std::string& weights_path);

/// Builds the head geometry implied by a graph; thresholds keep defaults.
HeadConfig head_config_for(const ModelGraph& graph);

// ---------------------------------------------------------------------------

struct DetectOptions {
  std::string config_path;
  std::string weights_path;
  std::vector<std::string> image_paths;  // .ppm files and/or directories
  std::string out_path;                  // empty: stdout
  std::string dump_head_path;            // optional PTEN dump of the head
  float obj_threshold = 0.5f;
  float cls_threshold = 0.5f;
  float nms_iou = 0.45f;
  bool annotate = false;
  int grid_size = 0;   // nonzero: must match the config
  int grid_count = 0;  // nonzero: must match the config
};

int run_detect(const DetectOptions& opt, std::ostream& log);

// ---------------------------------------------------------------------------

struct TrainToyOptions {
  std::string config_path;  // empty: built-in toy graph
  std::string out_weights = "toy.pwts";
  std::string scenes_dir;  // when set, scenes + gt.jsonl are written here
  std::string log_path;    // loss log (JSON lines); empty: no log file
  int steps = 2000;
  int scene_count = 20;
  uint64_t seed = 1;
  int threads = 1;
  int grid_size = 10;
  int grid_count = 5;
  OptimizerConfig optim{0.02, 0.9, 5e-4, 4};  // toy-scale defaults
  LossConfig loss;
};

struct TrainToyOutcome {
  double step10_total = 0;
  double final_total = 0;
  EvalReport train_report;  // detector re-run on its own training set
  long param_count = 0;
};

int run_train_toy(const TrainToyOptions& opt, std::ostream& log,
                  TrainToyOutcome* outcome = nullptr);

// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string detections_path;
  std::string gt_path;
  std::string out_path;  // empty: stdout
  float match_iou = 0.5f;
};

int run_eval(const EvalOptions& opt, std::ostream& log,
             EvalReport* report = nullptr);

// ---------------------------------------------------------------------------

struct BenchOptions {
  std::string config_path;
  std::string weights_path;
  std::vector<std::string> image_paths;
  std::string out_path;  // empty: stdout
  int warmup = 5;
  int iters = 0;  // 0: one timed pass per image
  int threads = 1;
  float obj_threshold = 0.5f;
  float cls_threshold = 0.5f;
  float nms_iou = 0.45f;
};

int run_bench(const BenchOptions& opt, std::ostream& log,
              BenchReport* report = nullptr);

// ---------------------------------------------------------------------------

struct GradcheckOptions {
  std::string config_path;  // empty: built-in miniature graph
  uint64_t seed = 1;
  double epsilon = 1e-4;
  int coords = 250;
  double threshold = 1e-3;
  bool corrupt = false;  // test hook: damage one analytic gradient
};

int run_gradcheck(const GradcheckOptions& opt, std::ostream& log,
                  double* max_rel_error = nullptr);

// ---------------------------------------------------------------------------

struct SynthOptions {
  std::string out_dir;
  int count = 20;
  int size = 320;
  uint64_t seed = 1;
};

int run_synth(const SynthOptions& opt, std::ostream& log);

/// Expands directories into their .ppm files (sorted); passes files through.
std::vector<std::string> expand_image_paths(const std::vector<std::string>& paths);

}  // namespace peddet
