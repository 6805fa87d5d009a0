#include "peddet/head.hpp"

#include <algorithm>
#include <cmath>

#include "peddet/error.hpp"
#include "peddet/ops.hpp"

namespace peddet {

void HeadConfig::validate() const {
  if (grid_size < 1 || grid_count < 1) {
    throw ValidationError("head config: grid size and grid count must be >= 1");
  }
  if (obj_threshold <= 0 || obj_threshold >= 1 || cls_threshold <= 0 ||
      cls_threshold >= 1) {
    throw ValidationError("head config: thresholds must lie in (0,1)");
  }
  if (nms_iou <= 0 || nms_iou >= 1) {
    throw ValidationError("head config: NMS IoU threshold must lie in (0,1)");
  }
}

int ResponsibilityMap::assigned_count() const {
  int n = 0;
  for (uint8_t s : selector) n += s;
  return n;
}

int grid_for_sqrt_area(float a, int grid_count) {
  const int g = static_cast<int>(std::ceil(static_cast<double>(a) * grid_count));
  return std::clamp(g, 1, grid_count) - 1;
}

ResponsibilityMap assign_responsibility(const std::vector<BBox>& gt_boxes,
                                        const HeadConfig& cfg) {
  cfg.validate();
  const int G = cfg.grid_size;
  const int k = cfg.grid_count;

  ResponsibilityMap map;
  map.grid_size = G;
  map.grid_count = k;
  map.selector.assign(static_cast<size_t>(cfg.slot_count()), 0);
  map.targets.assign(static_cast<size_t>(cfg.slot_count()), {0, 0, 0, 0});
  map.gt_index.assign(static_cast<size_t>(cfg.slot_count()), -1);

  for (size_t b = 0; b < gt_boxes.size(); ++b) {
    const BBox& box = gt_boxes[b];
    const int col = std::clamp(static_cast<int>(box.cx * G), 0, G - 1);
    const int row = std::clamp(static_cast<int>(box.cy * G), 0, G - 1);
    const float a = std::sqrt(box.w * box.h);
    const int g0 = grid_for_sqrt_area(a, k);

    int chosen = -1;
    for (int step = 0; step < k; ++step) {
      const int g = (g0 + step) % k;
      if (!map.selector[map.slot(col, row, g)]) {
        chosen = g;
        break;
      }
    }
    if (chosen < 0) {
      ++map.dropped;
      continue;
    }
    const int s = map.slot(col, row, chosen);
    map.selector[s] = 1;
    map.targets[s] = {box.cx * G - col, box.cy * G - row, box.w, box.h};
    map.gt_index[s] = static_cast<int>(b);
  }
  return map;
}

std::vector<Detection> decode(const TensorF& head_raw, const HeadConfig& cfg) {
  cfg.validate();
  const int G = cfg.grid_size;
  const int k = cfg.grid_count;
  if (head_raw.c() != cfg.head_channels() || head_raw.h() != G ||
      head_raw.w() != G || head_raw.n() != 1) {
    throw ShapeError("decode: head tensor " + head_raw.shape_string() +
                     " does not match 1x" + std::to_string(6 * k) + "x" +
                     std::to_string(G) + "x" + std::to_string(G));
  }

  std::vector<Detection> dets;
  for (int g = 0; g < k; ++g) {
    const float* px = head_raw.plane(0, g * 6 + kFieldX);
    const float* py = head_raw.plane(0, g * 6 + kFieldY);
    const float* pw = head_raw.plane(0, g * 6 + kFieldW);
    const float* ph = head_raw.plane(0, g * 6 + kFieldH);
    const float* po = head_raw.plane(0, g * 6 + kFieldObj);
    const float* pc = head_raw.plane(0, g * 6 + kFieldCls);
    for (int row = 0; row < G; ++row) {
      for (int col = 0; col < G; ++col) {
        const int at = row * G + col;
        const float obj = sigmoid_scalar(po[at]);
        if (obj <= cfg.obj_threshold) continue;
        const float cls = sigmoid_scalar(pc[at]);
        if (cls <= cfg.cls_threshold) continue;
        Detection d;
        d.bbox.cx = (col + sigmoid_scalar(px[at])) / G;
        d.bbox.cy = (row + sigmoid_scalar(py[at])) / G;
        d.bbox.w = sigmoid_scalar(pw[at]);
        d.bbox.h = sigmoid_scalar(ph[at]);
        d.objectness = obj;
        d.class_score = cls;
        d.grid = g;
        d.cell_x = col;
        d.cell_y = row;
        dets.push_back(d);
      }
    }
  }
  std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.objectness != b.objectness) return a.objectness > b.objectness;
    if (a.grid != b.grid) return a.grid < b.grid;
    if (a.cell_x != b.cell_x) return a.cell_x < b.cell_x;
    return a.cell_y < b.cell_y;
  });
  return dets;
}

std::vector<Detection> nms(const std::vector<Detection>& dets,
                           float iou_threshold) {
  std::vector<Detection> kept;
  std::vector<bool> suppressed(dets.size(), false);
  for (size_t i = 0; i < dets.size(); ++i) {
    if (suppressed[i]) continue;
    kept.push_back(dets[i]);
    for (size_t j = i + 1; j < dets.size(); ++j) {
      if (!suppressed[j] && iou(dets[i].bbox, dets[j].bbox) > iou_threshold) {
        suppressed[j] = true;
      }
    }
  }
  return kept;
}

}  // namespace peddet
