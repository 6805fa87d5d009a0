#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "peddet/head.hpp"

namespace peddet {

struct MatchResult {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  std::vector<float> matched_ious;
};

/// Greedy matching: predictions in descending objectness claim the
/// unmatched ground truth with highest IoU >= threshold. Leftover
/// predictions count as false positives, leftover truths as false
/// negatives. Each side is claimed at most once.
MatchResult match_detections(const std::vector<Detection>& preds,
                             const std::vector<BBox>& gts,
                             float iou_threshold = 0.5f);

/// Aggregated detection metrics over a test set. Ratios whose denominator
/// is zero are undefined (empty optional), never reported as 0.
struct EvalReport {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  int n_images = 0;
  long n_positives = 0;  // matched predictions contributing to mean_iou
  std::optional<double> accuracy;   // tp / (tp + fn)
  std::optional<double> mean_iou;   // mean IoU over matched predictions
  std::optional<double> fppi;       // fp / n_images
  std::optional<double> miss_rate;  // fn / (fn + tp)
};

EvalReport compute_report(const std::vector<MatchResult>& per_image);

/// Latency statistics of single-image inference passes.
struct BenchReport {
  double fps = 0;  // 1 / mean latency
  double latency_mean_s = 0;
  double latency_p50_s = 0;
  double latency_p95_s = 0;
  int n_timed = 0;
  int warmup = 0;
};

/// Computes the report from raw per-image timings (seconds, all > 0).
BenchReport make_bench_report(const std::vector<double>& timings_s,
                              int warmup = 0);

/// Times `run` once per entry of [0, iters) after `warmup` untimed calls.
BenchReport benchmark(const std::function<void(int)>& run, int iters,
                      int warmup = 5);

}  // namespace peddet
