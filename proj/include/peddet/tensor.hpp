#pragma once

#include <Eigen/Core>
#include <cassert>
#include <cstdint>
#include <string>
#include <utility>

#include "peddet/error.hpp"

namespace peddet {

/// Dense 4-D array in (batch, channels, height, width) order, row-major,
/// i.e. the innermost index is width and one (n, c) plane is contiguous.
/// The scalar type is a template parameter: the engine runs float, the
/// finite-difference harness re-runs the same code in double.
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;

  Tensor(int n, int c, int h, int w) : n_(n), c_(c), h_(h), w_(w) {
    if (n < 1 || c < 1 || h < 1 || w < 1) {
      throw ShapeError("tensor extents must all be >= 1, got " +
                       shape_string(n, c, h, w));
    }
    data_ = Array::Zero(static_cast<Eigen::Index>(n) * c * h * w);
  }

  static Tensor constant(int n, int c, int h, int w, Scalar value) {
    Tensor t(n, c, h, w);
    t.data_.setConstant(value);
    return t;
  }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Array& array() { return data_; }
  const Array& array() const { return data_; }

  /// Unchecked in release builds; hot loops index raw planes instead.
  Scalar& operator()(int n, int c, int y, int x) {
    assert(in_bounds(n, c, y, x));
    return data_[offset(n, c, y, x)];
  }
  Scalar operator()(int n, int c, int y, int x) const {
    assert(in_bounds(n, c, y, x));
    return data_[offset(n, c, y, x)];
  }

  /// Bounds-checked element access; throws on any out-of-range index.
  Scalar& at(int n, int c, int y, int x) {
    check_bounds(n, c, y, x);
    return data_[offset(n, c, y, x)];
  }
  Scalar at(int n, int c, int y, int x) const {
    check_bounds(n, c, y, x);
    return data_[offset(n, c, y, x)];
  }

  /// Start of the contiguous h*w plane for image n, channel c.
  Scalar* plane(int n, int c) {
    assert(n >= 0 && n < n_ && c >= 0 && c < c_);
    return data_.data() + (static_cast<Eigen::Index>(n) * c_ + c) * h_ * w_;
  }
  const Scalar* plane(int n, int c) const {
    assert(n >= 0 && n < n_ && c >= 0 && c < c_);
    return data_.data() + (static_cast<Eigen::Index>(n) * c_ + c) * h_ * w_;
  }

  bool same_shape(const Tensor& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  std::string shape_string() const { return shape_string(n_, c_, h_, w_); }

  static std::string shape_string(int n, int c, int h, int w) {
    return std::to_string(n) + "x" + std::to_string(c) + "x" +
           std::to_string(h) + "x" + std::to_string(w);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(n_, c_, h_, w_);
    out.array() = data_.template cast<Other>();
    return out;
  }

 private:
  bool in_bounds(int n, int c, int y, int x) const {
    return n >= 0 && n < n_ && c >= 0 && c < c_ && y >= 0 && y < h_ &&
           x >= 0 && x < w_;
  }
  void check_bounds(int n, int c, int y, int x) const {
    if (!in_bounds(n, c, y, x)) {
      throw ShapeError("index (" + std::to_string(n) + "," + std::to_string(c) +
                       "," + std::to_string(y) + "," + std::to_string(x) +
                       ") out of bounds for tensor " + shape_string());
    }
  }
  Eigen::Index offset(int n, int c, int y, int x) const {
    return ((static_cast<Eigen::Index>(n) * c_ + c) * h_ + y) * w_ + x;
  }

  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  Array data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename Scalar>
Scalar max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("max_abs_diff: shapes differ, " + a.shape_string() +
                     " vs " + b.shape_string());
  }
  return (a.array() - b.array()).abs().maxCoeff();
}

}  // namespace peddet
