#include "peddet/eval.hpp"

#include <algorithm>
#include <chrono>

#include "peddet/error.hpp"

namespace peddet {

MatchResult match_detections(const std::vector<Detection>& preds,
                             const std::vector<BBox>& gts,
                             float iou_threshold) {
  std::vector<size_t> order(preds.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return preds[a].objectness > preds[b].objectness;
  });

  MatchResult res;
  std::vector<bool> claimed(gts.size(), false);
  for (size_t oi : order) {
    int best = -1;
    float best_iou = 0;
    for (size_t gi = 0; gi < gts.size(); ++gi) {
      if (claimed[gi]) continue;
      const float v = iou(preds[oi].bbox, gts[gi]);
      if (v >= iou_threshold && v > best_iou) {
        best_iou = v;
        best = static_cast<int>(gi);
      }
    }
    if (best >= 0) {
      claimed[static_cast<size_t>(best)] = true;
      ++res.tp;
      res.matched_ious.push_back(best_iou);
    } else {
      ++res.fp;
    }
  }
  res.fn = static_cast<int>(gts.size()) - res.tp;
  return res;
}

EvalReport compute_report(const std::vector<MatchResult>& per_image) {
  if (per_image.empty()) {
    throw ValidationError("compute_report: need at least one image");
  }
  EvalReport r;
  r.n_images = static_cast<int>(per_image.size());
  double iou_sum = 0;
  for (const MatchResult& m : per_image) {
    r.tp += m.tp;
    r.fp += m.fp;
    r.fn += m.fn;
    r.n_positives += static_cast<long>(m.matched_ious.size());
    for (float v : m.matched_ious) iou_sum += v;
  }
  if (r.tp + r.fn > 0) {
    r.accuracy = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    r.miss_rate = static_cast<double>(r.fn) / static_cast<double>(r.fn + r.tp);
  }
  if (r.n_positives > 0) r.mean_iou = iou_sum / static_cast<double>(r.n_positives);
  r.fppi = static_cast<double>(r.fp) / r.n_images;
  return r;
}

BenchReport make_bench_report(const std::vector<double>& timings_s,
                              int warmup) {
  if (timings_s.empty()) {
    throw ValidationError("benchmark: no timings recorded");
  }
  double sum = 0;
  for (double t : timings_s) {
    if (t <= 0) throw ValidationError("benchmark: non-positive timing");
    sum += t;
  }
  std::vector<double> sorted = timings_s;
  std::sort(sorted.begin(), sorted.end());
  auto percentile = [&](double p) {
    const size_t idx = static_cast<size_t>(
        p * (static_cast<double>(sorted.size()) - 1) + 0.5);
    return sorted[std::min(idx, sorted.size() - 1)];
  };
  BenchReport r;
  r.n_timed = static_cast<int>(timings_s.size());
  r.warmup = warmup;
  r.latency_mean_s = sum / static_cast<double>(timings_s.size());
  r.latency_p50_s = percentile(0.50);
  r.latency_p95_s = percentile(0.95);
  r.fps = 1.0 / r.latency_mean_s;
  return r;
}

BenchReport benchmark(const std::function<void(int)>& run, int iters,
                      int warmup) {
  for (int i = 0; i < warmup; ++i) run(i);
  std::vector<double> timings;
  timings.reserve(static_cast<size_t>(iters));
  for (int i = 0; i < iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    run(i);
    const auto t1 = std::chrono::steady_clock::now();
    timings.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  return make_bench_report(timings, warmup);
}

}  // namespace peddet
