#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "peddet/params.hpp"
#include "peddet/rng.hpp"

namespace peddet {

struct GradCheckResult {
  double max_rel_error = 0;
  int coords_checked = 0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  double worst_analytic = 0;
  double worst_numeric = 0;
};

/// Compares the analytic gradients stored in each parameter's grad buffer
/// against 64-bit central differences (L(p+e) - L(p-e)) / 2e on a random
/// sample of coordinates. The relative error of a pair (a, n) is
/// |a - n| / max(|a|, |n|), defined as 0 when both are negligibly small.
/// A non-finite loss evaluation makes the result infinite.
inline GradCheckResult finite_diff_check(
    const std::function<double(const ParamSet<double>&)>& loss_fn,
    ParamSet<double>& params, double epsilon, int min_coords = 200,
    uint64_t seed = 7) {
  std::vector<std::pair<int, Eigen::Index>> coords;
  for (int pi = 0; pi < static_cast<int>(params.params.size()); ++pi) {
    for (Eigen::Index i = 0; i < params.params[pi].value.size(); ++i) {
      coords.emplace_back(pi, i);
    }
  }
  Rng rng(seed);
  const int n_check = std::min<int>(min_coords, static_cast<int>(coords.size()));
  for (int i = 0; i < n_check; ++i) {  // partial Fisher-Yates
    const int j = i + rng.uniform_int(0, static_cast<int>(coords.size()) - 1 - i);
    std::swap(coords[static_cast<size_t>(i)], coords[static_cast<size_t>(j)]);
  }

  GradCheckResult res;
  res.coords_checked = n_check;
  for (int i = 0; i < n_check; ++i) {
    auto [pi, ei] = coords[static_cast<size_t>(i)];
    double& v = params.params[static_cast<size_t>(pi)].value.data()[ei];
    const double saved = v;
    v = saved + epsilon;
    const double lp = loss_fn(params);
    v = saved - epsilon;
    const double lm = loss_fn(params);
    v = saved;

    const double numeric = (lp - lm) / (2 * epsilon);
    const double analytic = params.params[static_cast<size_t>(pi)].grad.data()[ei];
    double rel;
    if (!std::isfinite(lp) || !std::isfinite(lm)) {
      rel = std::numeric_limits<double>::infinity();
    } else {
      const double denom = std::max(std::abs(analytic), std::abs(numeric));
      rel = denom < 1e-10 ? 0.0 : std::abs(analytic - numeric) / denom;
    }
    if (rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_param = params.params[static_cast<size_t>(pi)].name;
      res.worst_index = ei;
      res.worst_analytic = analytic;
      res.worst_numeric = numeric;
    }
  }
  return res;
}

}  // namespace peddet
