#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "peddet/bbox.hpp"
#include "peddet/head.hpp"
#include "peddet/ops.hpp"
#include "peddet/tensor.hpp"

namespace peddet {

/// Tuning constants of the detection loss. `xi` scales the localization
/// term, `alpha` damps objectness penalties on non-responsible slots.
/// `include_iou_term` switches the smooth-L1 IoU supervision signal on and
/// off (the ablation hook).
struct LossConfig {
  double alpha = 0.1;
  double xi = 5.0;
  bool include_iou_term = true;
  double prob_clamp = 1e-7;

  void validate() const {
    if (alpha <= 0 || xi <= 0) {
      throw ValidationError("loss config: alpha and xi must be positive");
    }
  }
};

/// 0.5 x^2 inside the unit interval, |x| - 0.5 outside; continuous at 1.
template <typename Scalar>
Scalar smooth_l1(Scalar x) {
  const Scalar a = std::abs(x);
  return a < Scalar(1) ? Scalar(0.5) * x * x : a - Scalar(0.5);
}

template <typename Scalar>
Scalar smooth_l1_grad(Scalar x) {
  if (std::abs(x) < Scalar(1)) return x;
  return x > 0 ? Scalar(1) : Scalar(-1);
}

/// Localization loss for one responsible slot: smooth L1 on the cell
/// offsets, squared error on the extents, smooth L1 pulling IoU toward 1.
template <typename Scalar>
Scalar loc_loss(Scalar px, Scalar py, Scalar pw, Scalar ph, Scalar tx,
                Scalar ty, Scalar tw, Scalar th, Scalar iou_value,
                bool include_iou_term = true) {
  Scalar v = smooth_l1(px - tx) + smooth_l1(py - ty) + (pw - tw) * (pw - tw) +
             (ph - th) * (ph - th);
  if (include_iou_term) v += smooth_l1(iou_value - Scalar(1));
  return v;
}

/// Objectness loss: alpha-damped |O| on empty slots, |O - IoU| on
/// responsible ones.
template <typename Scalar>
Scalar op_loss(Scalar objectness, int responsible, Scalar iou_value,
               Scalar alpha) {
  return responsible ? std::abs(objectness - iou_value)
                     : alpha * std::abs(objectness);
}

/// Binary cross-entropy on the class score. The probability is clamped
/// only on the side its log needs, so a confidently correct score costs
/// exactly zero.
template <typename Scalar>
Scalar cls_loss(Scalar class_prob, int responsible,
                Scalar clamp = Scalar(1e-7)) {
  return responsible ? -std::log(std::max(class_prob, clamp))
                     : -std::log(Scalar(1) - std::min(class_prob,
                                                      Scalar(1) - clamp));
}

template <typename Scalar>
struct LossBreakdown {
  Scalar total = 0;
  Scalar loc = 0;  // xi-weighted localization sum
  Scalar op = 0;
  Scalar cls = 0;
  std::vector<Scalar> per_grid;  // slot-sum per size grid
};

template <typename Scalar>
struct LossResult {
  LossBreakdown<Scalar> breakdown;
  /// d(loss)/d(raw head values); filled only when requested.
  Tensor<Scalar> d_head;
  /// Per-slot objectness targets (live predicted-vs-truth IoU on
  /// responsible slots). The finite-difference harness freezes these so
  /// that numeric and analytic gradients agree on the stop-gradient
  /// objectness target.
  std::vector<Scalar> obj_targets;
};

/// Full detection loss over every (cell, grid) slot of one image, plus its
/// exact gradient w.r.t. the raw head tensor. The objectness target is the
/// current predicted-vs-truth IoU, treated as a constant; the IoU term in
/// the localization loss does receive gradients through the predicted box.
template <typename Scalar>
LossResult<Scalar> detection_loss(
    const Tensor<Scalar>& head_raw, const ResponsibilityMap& resp,
    const std::vector<BBox>& gt_boxes, const HeadConfig& head_cfg,
    const LossConfig& cfg, bool want_grad = false,
    const std::vector<Scalar>* frozen_obj_targets = nullptr) {
  cfg.validate();
  const int G = head_cfg.grid_size;
  const int k = head_cfg.grid_count;
  if (head_raw.n() != 1 || head_raw.c() != 6 * k || head_raw.h() != G ||
      head_raw.w() != G) {
    throw ShapeError("detection_loss: head tensor " + head_raw.shape_string() +
                     " does not match config (" + std::to_string(6 * k) +
                     " channels, " + std::to_string(G) + "x" +
                     std::to_string(G) + ")");
  }
  if (resp.grid_size != G || resp.grid_count != k) {
    throw ShapeError("detection_loss: responsibility map geometry mismatch");
  }

  const Scalar alpha = static_cast<Scalar>(cfg.alpha);
  const Scalar xi = static_cast<Scalar>(cfg.xi);
  const Scalar clamp = static_cast<Scalar>(cfg.prob_clamp);

  LossResult<Scalar> res;
  res.breakdown.per_grid.assign(static_cast<size_t>(k), Scalar(0));
  res.obj_targets.assign(static_cast<size_t>(head_cfg.slot_count()), Scalar(0));
  if (want_grad) res.d_head = Tensor<Scalar>(1, 6 * k, G, G);

  for (int g = 0; g < k; ++g) {
    const Scalar* rx = head_raw.plane(0, g * 6 + kFieldX);
    const Scalar* ry = head_raw.plane(0, g * 6 + kFieldY);
    const Scalar* rw = head_raw.plane(0, g * 6 + kFieldW);
    const Scalar* rh = head_raw.plane(0, g * 6 + kFieldH);
    const Scalar* ro = head_raw.plane(0, g * 6 + kFieldObj);
    const Scalar* rc = head_raw.plane(0, g * 6 + kFieldCls);
    Scalar* dx = want_grad ? res.d_head.plane(0, g * 6 + kFieldX) : nullptr;
    Scalar* dy = want_grad ? res.d_head.plane(0, g * 6 + kFieldY) : nullptr;
    Scalar* dw = want_grad ? res.d_head.plane(0, g * 6 + kFieldW) : nullptr;
    Scalar* dh = want_grad ? res.d_head.plane(0, g * 6 + kFieldH) : nullptr;
    Scalar* dobj = want_grad ? res.d_head.plane(0, g * 6 + kFieldObj) : nullptr;
    Scalar* dcls = want_grad ? res.d_head.plane(0, g * 6 + kFieldCls) : nullptr;

    for (int row = 0; row < G; ++row) {
      for (int col = 0; col < G; ++col) {
        const int at = row * G + col;
        const int slot = resp.slot(col, row, g);
        const Scalar so = sigmoid_scalar(ro[at]);
        const Scalar sc = sigmoid_scalar(rc[at]);

        Scalar slot_loc = 0, slot_op = 0, slot_cls = 0;
        if (resp.selector[slot]) {
          const Scalar sx = sigmoid_scalar(rx[at]);
          const Scalar sy = sigmoid_scalar(ry[at]);
          const Scalar sw = sigmoid_scalar(rw[at]);
          const Scalar sh = sigmoid_scalar(rh[at]);
          const auto& t = resp.targets[slot];
          const Scalar tx = static_cast<Scalar>(t[0]);
          const Scalar ty = static_cast<Scalar>(t[1]);
          const Scalar tw = static_cast<Scalar>(t[2]);
          const Scalar th = static_cast<Scalar>(t[3]);

          const BBox& gtf = gt_boxes.at(static_cast<size_t>(resp.gt_index[slot]));
          const Box<Scalar> gt{static_cast<Scalar>(gtf.cx),
                               static_cast<Scalar>(gtf.cy),
                               static_cast<Scalar>(gtf.w),
                               static_cast<Scalar>(gtf.h)};
          const Box<Scalar> pred{(col + sx) / G, (row + sy) / G, sw, sh};
          const IouGrad<Scalar> ig = iou_with_grad(pred, gt);

          res.obj_targets[slot] = ig.value;
          const Scalar obj_target =
              frozen_obj_targets ? (*frozen_obj_targets)[slot] : ig.value;

          slot_loc = xi * loc_loss(sx, sy, sw, sh, tx, ty, tw, th, ig.value,
                                   cfg.include_iou_term);
          slot_op = op_loss(so, 1, obj_target, alpha);
          slot_cls = cls_loss(sc, 1, clamp);

          if (want_grad) {
            const Scalar iou_pull =
                cfg.include_iou_term ? smooth_l1_grad(ig.value - Scalar(1))
                                     : Scalar(0);
            dx[at] += xi * (smooth_l1_grad(sx - tx) + iou_pull * ig.d_cx / G) *
                      sx * (1 - sx);
            dy[at] += xi * (smooth_l1_grad(sy - ty) + iou_pull * ig.d_cy / G) *
                      sy * (1 - sy);
            dw[at] += xi * (2 * (sw - tw) + iou_pull * ig.d_w) * sw * (1 - sw);
            dh[at] += xi * (2 * (sh - th) + iou_pull * ig.d_h) * sh * (1 - sh);
            const Scalar od = so - obj_target;
            dobj[at] += (od > 0 ? Scalar(1) : (od < 0 ? Scalar(-1) : Scalar(0))) *
                        so * (1 - so);
            dcls[at] += sc <= clamp ? Scalar(0) : sc - Scalar(1);
          }
        } else {
          slot_op = op_loss(so, 0, Scalar(0), alpha);
          slot_cls = cls_loss(sc, 0, clamp);
          if (want_grad) {
            dobj[at] += alpha * so * (1 - so);
            dcls[at] += sc >= Scalar(1) - clamp ? Scalar(0) : sc;
          }
        }

        const Scalar slot_total = slot_loc + slot_op + slot_cls;
        if (!std::isfinite(slot_total)) {
          throw ValidationError("detection_loss: non-finite loss at slot (col=" +
                                std::to_string(col) + ", row=" +
                                std::to_string(row) + ", grid=" +
                                std::to_string(g) + ")");
        }
        res.breakdown.loc += slot_loc;
        res.breakdown.op += slot_op;
        res.breakdown.cls += slot_cls;
        res.breakdown.per_grid[static_cast<size_t>(g)] += slot_total;
      }
    }
  }
  res.breakdown.total =
      res.breakdown.loc + res.breakdown.op + res.breakdown.cls;
  return res;
}

}  // namespace peddet
