#pragma once

#include <vector>

#include "peddet/bbox.hpp"
#include "peddet/image.hpp"

namespace peddet {

struct SynthScene {
  ImageU8 image;
  std::vector<BBox> boxes;
};

/// High-contrast axis-aligned rectangles on a textured noise background.
/// Rectangle sides are drawn so the sqrt-area fraction is uniform on
/// (sqrt_area_lo, sqrt_area_hi], spreading ground truth across all size
/// grids. Placement rejects heavy overlap so every rectangle stays
/// visible.
struct SynthConfig {
  int count = 20;
  int size = 320;
  int min_rects = 1;
  int max_rects = 3;
  double sqrt_area_lo = 0.05;
  double sqrt_area_hi = 0.95;
  double max_overlap_iou = 0.25;
};

std::vector<SynthScene> make_synthetic_scenes(const SynthConfig& cfg,
                                              uint64_t seed);

}  // namespace peddet
