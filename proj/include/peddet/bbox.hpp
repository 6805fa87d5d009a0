#pragma once

#include <algorithm>
#include <cmath>

namespace peddet {

/// Axis-aligned box in center format, all fields normalized to [0,1]
/// of the image extent.
template <typename Scalar>
struct Box {
  Scalar cx = 0, cy = 0, w = 0, h = 0;

  Scalar x_min() const { return cx - w / 2; }
  Scalar x_max() const { return cx + w / 2; }
  Scalar y_min() const { return cy - h / 2; }
  Scalar y_max() const { return cy + h / 2; }
  Scalar area() const { return w * h; }
};

using BBox = Box<float>;

/// Intersection area over union area, in [0,1]; 0 for disjoint boxes.
template <typename Scalar>
Scalar iou(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar iw = std::min(a.x_max(), b.x_max()) -
                    std::max(a.x_min(), b.x_min());
  const Scalar ih = std::min(a.y_max(), b.y_max()) -
                    std::max(a.y_min(), b.y_min());
  if (iw <= 0 || ih <= 0) return 0;
  const Scalar inter = iw * ih;
  // Summing the areas in value order keeps the result symmetric in (a, b);
  // the min/max also stops fused multiply-adds from rounding one operand
  // differently than the other.
  const Scalar area_a = a.area();
  const Scalar area_b = b.area();
  const Scalar area_sum =
      std::min(area_a, area_b) + std::max(area_a, area_b);
  const Scalar uni = area_sum - inter;
  return inter / uni;
}

/// IoU together with its partial derivatives w.r.t. box `a`'s parameters.
/// Piecewise-smooth; at zero overlap the gradient is defined as 0.
template <typename Scalar>
struct IouGrad {
  Scalar value = 0;
  Scalar d_cx = 0, d_cy = 0, d_w = 0, d_h = 0;
};

template <typename Scalar>
IouGrad<Scalar> iou_with_grad(const Box<Scalar>& a, const Box<Scalar>& b) {
  IouGrad<Scalar> g;
  const Scalar lx = std::max(a.x_min(), b.x_min());
  const Scalar rx = std::min(a.x_max(), b.x_max());
  const Scalar ly = std::max(a.y_min(), b.y_min());
  const Scalar ry = std::min(a.y_max(), b.y_max());
  const Scalar iw = rx - lx;
  const Scalar ih = ry - ly;
  if (iw <= 0 || ih <= 0) return g;

  // Which side of each min/max is a's edge; picks the subgradient at ties.
  const Scalar left_a = a.x_min() > b.x_min() ? Scalar(1) : Scalar(0);
  const Scalar right_a = a.x_max() < b.x_max() ? Scalar(1) : Scalar(0);
  const Scalar bot_a = a.y_min() > b.y_min() ? Scalar(1) : Scalar(0);
  const Scalar top_a = a.y_max() < b.y_max() ? Scalar(1) : Scalar(0);

  const Scalar diw_dcx = right_a - left_a;
  const Scalar diw_dw = (right_a + left_a) / 2;
  const Scalar dih_dcy = top_a - bot_a;
  const Scalar dih_dh = (top_a + bot_a) / 2;

  const Scalar inter = iw * ih;
  const Scalar uni = a.area() + b.area() - inter;
  g.value = inter / uni;

  const Scalar inv_u2 = Scalar(1) / (uni * uni);
  auto d_iou = [&](Scalar d_inter, Scalar d_area_a) {
    // d(inter/uni); d_uni = d_area_a - d_inter.
    return (d_inter * uni - inter * (d_area_a - d_inter)) * inv_u2;
  };
  g.d_cx = d_iou(ih * diw_dcx, Scalar(0));
  g.d_cy = d_iou(iw * dih_dcy, Scalar(0));
  g.d_w = d_iou(ih * diw_dw, a.h);
  g.d_h = d_iou(iw * dih_dh, a.w);
  return g;
}

}  // namespace peddet
