#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "peddet/bbox.hpp"
#include "peddet/tensor.hpp"

namespace peddet {

/// Detection-head geometry and decision thresholds. The head predicts
/// `grid_count` size-specialized planes over a grid_size x grid_size cell
/// lattice, six values per slot (x, y, w, h, objectness, class).
struct HeadConfig {
  int grid_size = 10;
  int grid_count = 5;
  int image_w = 320;
  int image_h = 320;
  float obj_threshold = 0.5f;
  float cls_threshold = 0.5f;
  float nms_iou = 0.45f;

  int slot_count() const { return grid_size * grid_size * grid_count; }
  int head_channels() const { return 6 * grid_count; }
  void validate() const;
};

/// Layout of the six per-slot head channels: channel = grid * 6 + field.
enum HeadField { kFieldX = 0, kFieldY, kFieldW, kFieldH, kFieldObj, kFieldCls };

/// Binary selector over (cell, grid) slots plus the encoded regression
/// targets for one image. Slot order is ((row * G + col) * k + grid).
struct ResponsibilityMap {
  int grid_size = 0;
  int grid_count = 0;
  std::vector<uint8_t> selector;
  std::vector<std::array<float, 4>> targets;  // tx, ty, tw, th
  std::vector<int> gt_index;                  // -1 when the slot is free
  int dropped = 0;                            // collision-overflow count

  int slot(int col, int row, int grid) const {
    return (row * grid_size + col) * grid_count + grid;
  }
  int assigned_count() const;
};

/// Size-responsibility grid index for a box with sqrt-area fraction `a`:
/// the unique g in [0, k) with g/k < a <= (g+1)/k; a = 0 maps to 0.
int grid_for_sqrt_area(float a, int grid_count);

/// Assigns each ground-truth box to the slot (cell of its center, grid of
/// its sqrt-area interval). An occupied slot bumps the box to the next
/// grid, wrapping, so a box is dropped only when every grid at that cell
/// is taken; drops are counted in `dropped`.
ResponsibilityMap assign_responsibility(const std::vector<BBox>& gt_boxes,
                                        const HeadConfig& cfg);

struct Detection {
  BBox bbox;
  float objectness = 0;
  float class_score = 0;
  int grid = 0;
  int cell_x = 0;
  int cell_y = 0;
};

/// Decodes a raw (pre-sigmoid) head tensor into detections that clear both
/// thresholds, sorted by objectness descending (ties: lower grid, then
/// cell x, then cell y first).
std::vector<Detection> decode(const TensorF& head_raw, const HeadConfig& cfg);

/// Greedy non-maximum suppression over the whole detection list (all grids
/// together). Expects the objectness-descending order decode() produces.
std::vector<Detection> nms(const std::vector<Detection>& dets,
                           float iou_threshold);

}  // namespace peddet
