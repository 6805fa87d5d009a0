#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "peddet/tensor.hpp"

namespace peddet {

enum class Activation { None, Relu, Sigmoid };

/// Output extent under "same" padding: ceil(in / stride).
inline int conv_out_extent(int in, int stride) {
  return (in + stride - 1) / stride;
}

/// Leading zero-pad count, TensorFlow "SAME" convention (extra pad goes
/// to the trailing side). Chosen so 320 -> 160 -> 80 -> 40 -> 20 -> 10
/// closes exactly.
inline int same_pad_before(int in, int kernel, int stride) {
  const int out = conv_out_extent(in, stride);
  const int total = std::max((out - 1) * stride + kernel - in, 0);
  return total / 2;
}

template <typename Scalar>
using MatrixMap = Eigen::Map<
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename Scalar>
using ConstMatrixMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic,
                                                      Eigen::Dynamic,
                                                      Eigen::RowMajor>>;

/// Per-channel 2-D cross-correlation. `kernels` holds one k x k filter per
/// input channel, shape (c, 1, k, k); output channel count equals input's.
template <typename Scalar>
Tensor<Scalar> depthwise_conv(const Tensor<Scalar>& input,
                              const Tensor<Scalar>& kernels, int stride) {
  if (kernels.n() != input.c() || kernels.c() != 1 ||
      kernels.h() != kernels.w()) {
    throw ShapeError("depthwise_conv: kernels " + kernels.shape_string() +
                     " do not match input " + input.shape_string() +
                     " (want (c,1,k,k) with c = input channels)");
  }
  if (stride < 1) throw ShapeError("depthwise_conv: stride must be >= 1");

  const int k = kernels.h();
  const int oh = conv_out_extent(input.h(), stride);
  const int ow = conv_out_extent(input.w(), stride);
  const int pad_y = same_pad_before(input.h(), k, stride);
  const int pad_x = same_pad_before(input.w(), k, stride);

  // Row-wise accumulation: for each kernel element, one fused
  // multiply-add sweep over the valid output columns.
  Tensor<Scalar> out(input.n(), input.c(), oh, ow);
  for (int n = 0; n < input.n(); ++n) {
    for (int c = 0; c < input.c(); ++c) {
      const Scalar* in = input.plane(n, c);
      const Scalar* ker = kernels.plane(c, 0);
      Scalar* dst = out.plane(n, c);
      for (int oy = 0; oy < oh; ++oy) {
        const int iy0 = oy * stride - pad_y;
        const int ky_lo = std::max(0, -iy0);
        const int ky_hi = std::min(k, input.h() - iy0);
        Scalar* drow = dst + oy * ow;
        for (int ky = ky_lo; ky < ky_hi; ++ky) {
          const Scalar* irow = in + (iy0 + ky) * input.w();
          const Scalar* krow = ker + ky * k;
          for (int kx = 0; kx < k; ++kx) {
            const Scalar kv = krow[kx];
            const int q = pad_x - kx;
            const int ox_lo = q <= 0 ? 0 : (q + stride - 1) / stride;
            const int m = input.w() - 1 - kx + pad_x;
            const int ox_hi = m < 0 ? 0 : std::min(ow, m / stride + 1);
            const Scalar* src = irow + ox_lo * stride - pad_x + kx;
            if (stride == 1) {
              for (int ox = ox_lo; ox < ox_hi; ++ox) {
                drow[ox] += kv * src[ox - ox_lo];
              }
            } else {
              for (int ox = ox_lo; ox < ox_hi; ++ox) {
                drow[ox] += kv * src[(ox - ox_lo) * stride];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

/// 1x1 cross-channel mix: per pixel, out = weights * in + bias.
/// `weights` is (c_out, c_in, 1, 1), `bias` is (c_out, 1, 1, 1).
template <typename Scalar>
Tensor<Scalar> pointwise_conv(const Tensor<Scalar>& input,
                              const Tensor<Scalar>& weights,
                              const Tensor<Scalar>& bias) {
  if (weights.c() != input.c() || weights.h() != 1 || weights.w() != 1) {
    throw ShapeError("pointwise_conv: weights " + weights.shape_string() +
                     " do not match input " + input.shape_string() +
                     " (want (c_out,c_in,1,1) with c_in = input channels)");
  }
  const int c_out = weights.n();
  if (bias.n() != c_out || bias.size() != c_out) {
    throw ShapeError("pointwise_conv: bias " + bias.shape_string() +
                     " must hold exactly c_out = " + std::to_string(c_out) +
                     " values");
  }

  const int hw = input.h() * input.w();
  Tensor<Scalar> out(input.n(), c_out, input.h(), input.w());
  ConstMatrixMap<Scalar> w(weights.data(), c_out, input.c());
  Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> b(bias.data(),
                                                               c_out);
  for (int n = 0; n < input.n(); ++n) {
    ConstMatrixMap<Scalar> x(input.plane(n, 0), input.c(), hw);
    MatrixMap<Scalar> y(out.plane(n, 0), c_out, hw);
    y.noalias() = w * x;
    y.colwise() += b;
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& input) {
  Tensor<Scalar> out = input;
  out.array() = out.array().max(Scalar(0));
  return out;
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& input) {
  Tensor<Scalar> out = input;
  out.array() = ((-out.array()).exp() + Scalar(1)).inverse();
  return out;
}

template <typename Scalar>
Scalar sigmoid_scalar(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Scalar>
Tensor<Scalar> apply_activation(const Tensor<Scalar>& input, Activation act) {
  switch (act) {
    case Activation::Relu:
      return relu(input);
    case Activation::Sigmoid:
      return sigmoid(input);
    case Activation::None:
      return input;
  }
  return input;
}

/// Weights of one separable convolution stage.
template <typename Scalar>
struct ConvParams {
  Tensor<Scalar> depthwise;  // (c_in, 1, k, k)
  Tensor<Scalar> pointwise;  // (c_out, c_in, 1, 1)
  Tensor<Scalar> bias;       // (c_out, 1, 1, 1)
  int stride = 1;

  void validate() const {
    const int k = depthwise.h();
    if (k != depthwise.w() || (k != 1 && k != 3 && k != 5)) {
      throw ShapeError("separable conv kernel must be square with size in "
                       "{1,3,5}, got " + depthwise.shape_string());
    }
    if (stride != 1 && stride != 2) {
      throw ShapeError("separable conv stride must be 1 or 2, got " +
                       std::to_string(stride));
    }
    if (pointwise.c() != depthwise.n()) {
      throw ShapeError("separable conv: pointwise input channels " +
                       std::to_string(pointwise.c()) +
                       " != depthwise channels " +
                       std::to_string(depthwise.n()));
    }
    if (bias.size() != pointwise.n()) {
      throw ShapeError("separable conv: bias size " +
                       std::to_string(bias.size()) + " != output channels " +
                       std::to_string(pointwise.n()));
    }
  }
};

/// Depthwise filtering, 1x1 mix, then activation.
template <typename Scalar>
Tensor<Scalar> separable_conv(const Tensor<Scalar>& input,
                              const ConvParams<Scalar>& params,
                              Activation act) {
  params.validate();
  return apply_activation(
      pointwise_conv(depthwise_conv(input, params.depthwise, params.stride),
                     params.pointwise, params.bias),
      act);
}

/// Non-overlapping mean pooling; window and stride must agree and divide
/// the spatial extents (no silent truncation).
template <typename Scalar>
Tensor<Scalar> avg_pool(const Tensor<Scalar>& input, int window = 2,
                        int stride = 2) {
  if (window != stride) {
    throw ShapeError("avg_pool: only window == stride is supported, got " +
                     std::to_string(window) + "/" + std::to_string(stride));
  }
  if (stride < 1 || input.h() % stride != 0 || input.w() % stride != 0) {
    throw ShapeError("avg_pool: spatial extents " + std::to_string(input.h()) +
                     "x" + std::to_string(input.w()) +
                     " not divisible by stride " + std::to_string(stride));
  }
  const int oh = input.h() / stride;
  const int ow = input.w() / stride;
  const Scalar inv = Scalar(1) / Scalar(window * window);
  Tensor<Scalar> out(input.n(), input.c(), oh, ow);
  for (int n = 0; n < input.n(); ++n) {
    for (int c = 0; c < input.c(); ++c) {
      const Scalar* in = input.plane(n, c);
      Scalar* dst = out.plane(n, c);
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          Scalar acc = 0;
          for (int wy = 0; wy < window; ++wy) {
            const Scalar* row = in + (oy * stride + wy) * input.w() +
                                ox * stride;
            for (int wx = 0; wx < window; ++wx) acc += row[wx];
          }
          dst[oy * ow + ox] = acc * inv;
        }
      }
    }
  }
  return out;
}

/// Channel concatenation; inputs must agree on batch and spatial extents.
template <typename Scalar>
Tensor<Scalar> concat_channels(const std::vector<const Tensor<Scalar>*>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Tensor<Scalar>& first = *parts.front();
  int c_total = 0;
  for (const Tensor<Scalar>* p : parts) {
    if (p->n() != first.n() || p->h() != first.h() || p->w() != first.w()) {
      throw ShapeError("concat_channels: input " + p->shape_string() +
                       " does not match " + first.shape_string() +
                       " on batch/spatial extents");
    }
    c_total += p->c();
  }
  Tensor<Scalar> out(first.n(), c_total, first.h(), first.w());
  const int hw = first.h() * first.w();
  for (int n = 0; n < first.n(); ++n) {
    int c_off = 0;
    for (const Tensor<Scalar>* p : parts) {
      std::copy(p->plane(n, 0), p->plane(n, 0) + p->c() * hw,
                out.plane(n, c_off));
      c_off += p->c();
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a,
                               const Tensor<Scalar>& b) {
  return concat_channels<Scalar>({&a, &b});
}

}  // namespace peddet
