#include <doctest.h>

#include "peddet/ops.hpp"
#include "reference_ops.hpp"

using namespace peddet;

namespace {

ConvParams<float> random_conv(int c_in, int c_out, int k, int stride,
                              Rng& rng) {
  ConvParams<float> p;
  p.depthwise = refops::random_tensor(c_in, 1, k, k, rng);
  p.pointwise = refops::random_tensor(c_out, c_in, 1, 1, rng);
  p.bias = refops::random_tensor(c_out, 1, 1, 1, rng);
  p.stride = stride;
  return p;
}

}  // namespace

TEST_CASE("depthwise: all-ones 3x3 kernel on all-ones 3x3 input") {
  TensorF in = TensorF::constant(1, 1, 3, 3, 1.0f);
  TensorF k = TensorF::constant(1, 1, 3, 3, 1.0f);
  TensorF out = depthwise_conv(in, k, 1);
  CHECK(out(0, 0, 1, 1) == doctest::Approx(9.0f));
  CHECK(out(0, 0, 0, 0) == doctest::Approx(4.0f));
  CHECK(out(0, 0, 0, 2) == doctest::Approx(4.0f));
  CHECK(out(0, 0, 2, 0) == doctest::Approx(4.0f));
  CHECK(out(0, 0, 2, 2) == doctest::Approx(4.0f));
  CHECK(out(0, 0, 0, 1) == doctest::Approx(6.0f));
}

TEST_CASE("depthwise: 1x1 identity kernel is a no-op") {
  Rng rng(11);
  TensorF in = refops::random_tensor(1, 3, 5, 7, rng);
  TensorF k = TensorF::constant(3, 1, 1, 1, 1.0f);
  CHECK(max_abs_diff(depthwise_conv(in, k, 1), in) == 0.0f);
}

TEST_CASE("depthwise: kernel/channel mismatch rejected") {
  TensorF in(1, 3, 4, 4);
  TensorF k(2, 1, 3, 3);
  CHECK_THROWS_AS(depthwise_conv(in, k, 1), ShapeError);
}

TEST_CASE("depthwise: seeded stride-2 case equals nested-loop oracle") {
  Rng rng(42);
  TensorF in = refops::random_tensor(1, 4, 8, 8, rng);
  TensorF k = refops::random_tensor(4, 1, 3, 3, rng);
  TensorF fast = depthwise_conv(in, k, 2);
  TensorF ref = refops::depthwise(in, k, 2);
  CHECK(max_abs_diff(fast, ref) < 1e-5f);
}

TEST_CASE("pointwise: identity weights, zero bias is a no-op") {
  Rng rng(3);
  TensorF in = refops::random_tensor(2, 4, 3, 3, rng);
  TensorF w(4, 4, 1, 1);
  for (int i = 0; i < 4; ++i) w(i, i, 0, 0) = 1.0f;
  TensorF b(4, 1, 1, 1);
  CHECK(max_abs_diff(pointwise_conv(in, w, b), in) == 0.0f);
}

TEST_CASE("pointwise: hand dot product") {
  TensorF in(1, 2, 1, 1);
  in(0, 0, 0, 0) = 3.0f;
  in(0, 1, 0, 0) = 5.0f;
  TensorF w = TensorF::constant(1, 2, 1, 1, 1.0f);
  TensorF b = TensorF::constant(1, 1, 1, 1, 2.0f);
  TensorF out = pointwise_conv(in, w, b);
  CHECK(out.size() == 1);
  CHECK(out(0, 0, 0, 0) == doctest::Approx(10.0f));
}

TEST_CASE("pointwise: inner-dimension mismatch rejected") {
  TensorF in(1, 3, 2, 2);
  TensorF w(4, 2, 1, 1);
  TensorF b(4, 1, 1, 1);
  CHECK_THROWS_AS(pointwise_conv(in, w, b), ShapeError);
}

TEST_CASE("pointwise: seeded case equals nested-loop oracle") {
  Rng rng(7);
  TensorF in = refops::random_tensor(1, 8, 5, 5, rng);
  TensorF w = refops::random_tensor(16, 8, 1, 1, rng);
  TensorF b = refops::random_tensor(16, 1, 1, 1, rng);
  CHECK(max_abs_diff(pointwise_conv(in, w, b), refops::pointwise(in, w, b)) <
        1e-5f);
}

TEST_CASE("separable conv equals its two components plus activation") {
  Rng rng(19);
  TensorF in = refops::random_tensor(1, 3, 6, 6, rng);
  ConvParams<float> p = random_conv(3, 8, 3, 2, rng);
  TensorF composed = apply_activation(
      pointwise_conv(depthwise_conv(in, p.depthwise, p.stride), p.pointwise,
                     p.bias),
      Activation::Relu);
  CHECK(max_abs_diff(separable_conv(in, p, Activation::Relu), composed) ==
        0.0f);
}

TEST_CASE("separable conv: stride 2 halves 320 to 160") {
  Rng rng(23);
  TensorF in(1, 1, 320, 320);
  ConvParams<float> p = random_conv(1, 2, 5, 2, rng);
  TensorF out = separable_conv(in, p, Activation::None);
  CHECK(out.h() == 160);
  CHECK(out.w() == 160);
}

TEST_CASE("separable conv maps extent E to ceil(E/s) for all E in [1,320]") {
  Rng rng(29);
  for (int stride : {1, 2}) {
    ConvParams<float> p = random_conv(1, 1, 3, stride, rng);
    for (int e = 1; e <= 320; ++e) {
      TensorF in(1, 1, e, 1 + (e % 3));
      TensorF out = separable_conv(in, p, Activation::Relu);
      CHECK(out.h() == (e + stride - 1) / stride);
      CHECK(out.w() == (in.w() + stride - 1) / stride);
    }
  }
}

TEST_CASE("avg_pool: 2x2 fixture and constancy") {
  TensorF in(1, 1, 2, 2);
  in(0, 0, 0, 0) = 1;
  in(0, 0, 0, 1) = 2;
  in(0, 0, 1, 0) = 3;
  in(0, 0, 1, 1) = 4;
  TensorF out = avg_pool(in);
  CHECK(out.size() == 1);
  CHECK(out(0, 0, 0, 0) == doctest::Approx(2.5f));

  TensorF c = TensorF::constant(1, 2, 8, 8, 0.37f);
  TensorF pooled = avg_pool(c);
  CHECK(pooled.c() == 2);
  CHECK((pooled.array() - 0.37f).abs().maxCoeff() < 1e-6f);
}

TEST_CASE("avg_pool: non-divisible extents rejected") {
  TensorF in(1, 1, 5, 4);
  CHECK_THROWS_AS(avg_pool(in), ShapeError);
}

TEST_CASE("avg_pool: seeded case equals nested-loop mean oracle") {
  Rng rng(31);
  TensorF in = refops::random_tensor(1, 3, 8, 8, rng);
  CHECK(max_abs_diff(avg_pool(in), refops::avgpool(in, 2, 2)) < 1e-6f);
}

TEST_CASE("concat_channels: layout and mismatch") {
  Rng rng(37);
  TensorF a = refops::random_tensor(1, 2, 4, 4, rng);
  TensorF b = refops::random_tensor(1, 3, 4, 4, rng);
  TensorF out = concat_channels(a, b);
  CHECK(out.c() == 5);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      CHECK(out(0, 0, y, x) == a(0, 0, y, x));
      CHECK(out(0, 1, y, x) == a(0, 1, y, x));
      CHECK(out(0, a.c(), y, x) == b(0, 0, y, x));  // b starts at channel a.c
    }

  TensorF c(1, 1, 3, 4);
  CHECK_THROWS_AS(concat_channels(a, c), ShapeError);
  CHECK_THROWS_AS(concat_channels<float>({}), ShapeError);
}

TEST_CASE("concat_channels is associative in the data") {
  Rng rng(41);
  TensorF a = refops::random_tensor(2, 2, 3, 3, rng);
  TensorF b = refops::random_tensor(2, 1, 3, 3, rng);
  TensorF c = refops::random_tensor(2, 4, 3, 3, rng);
  TensorF left = concat_channels(concat_channels(a, b), c);
  TensorF right = concat_channels(a, concat_channels(b, c));
  CHECK(max_abs_diff(left, right) == 0.0f);
}

TEST_CASE("sigmoid and relu basics") {
  TensorF in(1, 1, 1, 3);
  in(0, 0, 0, 0) = 0.0f;
  in(0, 0, 0, 1) = -3.0f;
  in(0, 0, 0, 2) = 3.0f;
  TensorF s = sigmoid(in);
  CHECK(s(0, 0, 0, 0) == doctest::Approx(0.5f));
  CHECK(s(0, 0, 0, 1) > 0.0f);
  CHECK(s(0, 0, 0, 2) < 1.0f);
  TensorF r = relu(in);
  CHECK(r(0, 0, 0, 1) == 0.0f);
  CHECK(r(0, 0, 0, 2) == 3.0f);
}

TEST_CASE("sigmoid is monotone on a seeded vector") {
  Rng rng(43);
  TensorF in = refops::random_tensor(1, 1, 1, 64, rng, -6.0, 6.0);
  std::sort(in.data(), in.data() + in.size());
  TensorF out = sigmoid(in);
  for (int i = 1; i < 64; ++i) {
    CHECK(out.data()[i] >= out.data()[i - 1]);
    CHECK(out.data()[i] > 0.0f);
    CHECK(out.data()[i] < 1.0f);
  }
}

TEST_CASE("ops do not mutate their inputs") {
  Rng rng(47);
  TensorF in = refops::random_tensor(1, 2, 6, 6, rng);
  TensorF copy = in;
  ConvParams<float> p = random_conv(2, 3, 3, 1, rng);
  (void)separable_conv(in, p, Activation::Sigmoid);
  (void)avg_pool(in);
  (void)concat_channels(in, in);
  CHECK(max_abs_diff(in, copy) == 0.0f);
}

TEST_CASE("forward ops match oracles over many seeded shapes") {
  Rng rng(1234);
  for (int c = 0; c < 40; ++c) {
    const int n = rng.uniform_int(1, 2);
    const int ch = rng.uniform_int(1, 6);
    const int h = rng.uniform_int(4, 14);
    const int w = rng.uniform_int(4, 14);
    const int k = std::array{1, 3, 5}[static_cast<size_t>(rng.uniform_int(0, 2))];
    const int stride = rng.uniform_int(1, 2);

    TensorF in = refops::random_tensor(n, ch, h, w, rng);
    TensorF dk = refops::random_tensor(ch, 1, k, k, rng);
    CHECK(max_abs_diff(depthwise_conv(in, dk, stride),
                       refops::depthwise(in, dk, stride)) < 1e-5f);

    const int co = rng.uniform_int(1, 8);
    TensorF pw = refops::random_tensor(co, ch, 1, 1, rng);
    TensorF b = refops::random_tensor(co, 1, 1, 1, rng);
    CHECK(max_abs_diff(pointwise_conv(in, pw, b),
                       refops::pointwise(in, pw, b)) < 1e-5f);

    TensorF pin = refops::random_tensor(n, ch, 2 * rng.uniform_int(1, 6),
                                        2 * rng.uniform_int(1, 6), rng);
    CHECK(max_abs_diff(avg_pool(pin), refops::avgpool(pin, 2, 2)) < 1e-5f);
  }
}
