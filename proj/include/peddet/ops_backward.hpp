#pragma once

#include <vector>

#include "peddet/ops.hpp"
#include "peddet/tensor.hpp"

namespace peddet {

// Hand-written reverse-mode gradients for each forward op. Every function
// takes the upstream gradient w.r.t. the op's output and returns exact
// analytic gradients w.r.t. the op's inputs and parameters.

template <typename Scalar>
struct DepthwiseGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> kernels;
};

template <typename Scalar>
DepthwiseGrads<Scalar> depthwise_conv_backward(const Tensor<Scalar>& input,
                                               const Tensor<Scalar>& kernels,
                                               int stride,
                                               const Tensor<Scalar>& upstream) {
  const int k = kernels.h();
  const int oh = conv_out_extent(input.h(), stride);
  const int ow = conv_out_extent(input.w(), stride);
  if (upstream.n() != input.n() || upstream.c() != input.c() ||
      upstream.h() != oh || upstream.w() != ow) {
    throw ShapeError("depthwise_conv_backward: upstream " +
                     upstream.shape_string() + " does not match output shape");
  }
  const int pad_y = same_pad_before(input.h(), k, stride);
  const int pad_x = same_pad_before(input.w(), k, stride);

  DepthwiseGrads<Scalar> g;
  g.input = Tensor<Scalar>(input.n(), input.c(), input.h(), input.w());
  g.kernels = Tensor<Scalar>(kernels.n(), kernels.c(), k, k);

  for (int n = 0; n < input.n(); ++n) {
    for (int c = 0; c < input.c(); ++c) {
      const Scalar* in = input.plane(n, c);
      const Scalar* ker = kernels.plane(c, 0);
      const Scalar* up = upstream.plane(n, c);
      Scalar* din = g.input.plane(n, c);
      Scalar* dker = g.kernels.plane(c, 0);
      for (int oy = 0; oy < oh; ++oy) {
        const int iy0 = oy * stride - pad_y;
        const int ky_lo = std::max(0, -iy0);
        const int ky_hi = std::min(k, input.h() - iy0);
        const Scalar* urow = up + oy * ow;
        for (int ky = ky_lo; ky < ky_hi; ++ky) {
          const Scalar* irow = in + (iy0 + ky) * input.w();
          Scalar* drow = din + (iy0 + ky) * input.w();
          for (int kx = 0; kx < k; ++kx) {
            const int q = pad_x - kx;
            const int ox_lo = q <= 0 ? 0 : (q + stride - 1) / stride;
            const int m = input.w() - 1 - kx + pad_x;
            const int ox_hi = m < 0 ? 0 : std::min(ow, m / stride + 1);
            if (ox_lo >= ox_hi) continue;
            const int base = ox_lo * stride - pad_x + kx;
            const Scalar kv = ker[ky * k + kx];
            Scalar acc = 0;
            if (stride == 1) {
              const Scalar* isrc = irow + base;
              Scalar* dsrc = drow + base;
              for (int i = 0; i < ox_hi - ox_lo; ++i) {
                dsrc[i] += urow[ox_lo + i] * kv;
                acc += urow[ox_lo + i] * isrc[i];
              }
            } else {
              for (int i = 0; i < ox_hi - ox_lo; ++i) {
                const Scalar u = urow[ox_lo + i];
                drow[base + i * stride] += u * kv;
                acc += u * irow[base + i * stride];
              }
            }
            dker[ky * k + kx] += acc;
          }
        }
      }
    }
  }
  return g;
}

template <typename Scalar>
struct PointwiseGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;
};

template <typename Scalar>
PointwiseGrads<Scalar> pointwise_conv_backward(const Tensor<Scalar>& input,
                                               const Tensor<Scalar>& weights,
                                               const Tensor<Scalar>& upstream) {
  const int c_out = weights.n();
  if (upstream.n() != input.n() || upstream.c() != c_out ||
      upstream.h() != input.h() || upstream.w() != input.w()) {
    throw ShapeError("pointwise_conv_backward: upstream " +
                     upstream.shape_string() + " does not match output shape");
  }
  const int hw = input.h() * input.w();

  PointwiseGrads<Scalar> g;
  g.input = Tensor<Scalar>(input.n(), input.c(), input.h(), input.w());
  g.weights = Tensor<Scalar>(c_out, input.c(), 1, 1);
  g.bias = Tensor<Scalar>(c_out, 1, 1, 1);

  ConstMatrixMap<Scalar> w(weights.data(), c_out, input.c());
  MatrixMap<Scalar> dw(g.weights.data(), c_out, input.c());
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> db(g.bias.data(), c_out);
  for (int n = 0; n < input.n(); ++n) {
    ConstMatrixMap<Scalar> x(input.plane(n, 0), input.c(), hw);
    ConstMatrixMap<Scalar> u(upstream.plane(n, 0), c_out, hw);
    MatrixMap<Scalar> dx(g.input.plane(n, 0), input.c(), hw);
    dx.noalias() = w.transpose() * u;
    dw.noalias() += u * x.transpose();
    db += u.rowwise().sum();
  }
  return g;
}

/// Each input cell of a pooling window receives upstream / window^2.
template <typename Scalar>
Tensor<Scalar> avg_pool_backward(const Tensor<Scalar>& upstream, int window,
                                 int stride, int in_h, int in_w) {
  if (window != stride || upstream.h() * stride != in_h ||
      upstream.w() * stride != in_w) {
    throw ShapeError("avg_pool_backward: upstream " + upstream.shape_string() +
                     " inconsistent with input extents " +
                     std::to_string(in_h) + "x" + std::to_string(in_w));
  }
  const Scalar inv = Scalar(1) / Scalar(window * window);
  Tensor<Scalar> din(upstream.n(), upstream.c(), in_h, in_w);
  for (int n = 0; n < upstream.n(); ++n) {
    for (int c = 0; c < upstream.c(); ++c) {
      const Scalar* up = upstream.plane(n, c);
      Scalar* dst = din.plane(n, c);
      for (int oy = 0; oy < upstream.h(); ++oy) {
        for (int ox = 0; ox < upstream.w(); ++ox) {
          const Scalar u = up[oy * upstream.w() + ox] * inv;
          for (int wy = 0; wy < window; ++wy) {
            Scalar* row = dst + (oy * stride + wy) * in_w + ox * stride;
            for (int wx = 0; wx < window; ++wx) row[wx] += u;
          }
        }
      }
    }
  }
  return din;
}

/// Routes the upstream gradient of a concatenation back to its sources.
template <typename Scalar>
std::vector<Tensor<Scalar>> concat_channels_backward(
    const Tensor<Scalar>& upstream, const std::vector<int>& channel_counts) {
  int c_total = 0;
  for (int c : channel_counts) c_total += c;
  if (c_total != upstream.c()) {
    throw ShapeError("concat_channels_backward: channel counts sum to " +
                     std::to_string(c_total) + " but upstream has " +
                     std::to_string(upstream.c()));
  }
  const int hw = upstream.h() * upstream.w();
  std::vector<Tensor<Scalar>> grads;
  grads.reserve(channel_counts.size());
  int c_off = 0;
  for (int c : channel_counts) {
    Tensor<Scalar> g(upstream.n(), c, upstream.h(), upstream.w());
    for (int n = 0; n < upstream.n(); ++n) {
      std::copy(upstream.plane(n, c_off), upstream.plane(n, c_off) + c * hw,
                g.plane(n, 0));
    }
    grads.push_back(std::move(g));
    c_off += c;
  }
  return grads;
}

/// d/dx sigmoid(x) = y (1 - y), expressed through the forward output.
template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& output,
                                const Tensor<Scalar>& upstream) {
  if (!output.same_shape(upstream)) {
    throw ShapeError("sigmoid_backward: shape mismatch " +
                     output.shape_string() + " vs " + upstream.shape_string());
  }
  Tensor<Scalar> g = upstream;
  g.array() *= output.array() * (Scalar(1) - output.array());
  return g;
}

/// Gradient passes where the output is positive; defined as 0 at the kink.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& output,
                             const Tensor<Scalar>& upstream) {
  if (!output.same_shape(upstream)) {
    throw ShapeError("relu_backward: shape mismatch " + output.shape_string() +
                     " vs " + upstream.shape_string());
  }
  Tensor<Scalar> g = upstream;
  g.array() *= (output.array() > Scalar(0)).template cast<Scalar>();
  return g;
}

template <typename Scalar>
Tensor<Scalar> activation_backward(Activation act, const Tensor<Scalar>& output,
                                   const Tensor<Scalar>& upstream) {
  switch (act) {
    case Activation::Relu:
      return relu_backward(output, upstream);
    case Activation::Sigmoid:
      return sigmoid_backward(output, upstream);
    case Activation::None:
      return upstream;
  }
  return upstream;
}

}  // namespace peddet
