#include <cmath>
#include <random>

#include "doctest.h"
#include "imdn/tensor.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace imdn;

TEST_SUITE("tensor") {

TEST_CASE("conv2d matches the naive loop oracle") {
  std::mt19937_64 rng(7);
  struct Case { int n, cin, cout, h, w, k, stride, pad; };
  const Case cases[] = {
      {1, 3, 4, 5, 5, 3, 1, 1},  {2, 2, 5, 7, 4, 3, 1, 1},  {1, 3, 2, 8, 6, 3, 2, 1},
      {1, 4, 3, 9, 9, 3, 2, 1},  {2, 6, 7, 4, 3, 1, 1, 0},  {1, 1, 1, 1, 1, 3, 1, 1},
      {1, 5, 3, 6, 7, 3, 1, 0},  {1, 2, 2, 11, 5, 5, 1, 2}, {1, 64, 48, 6, 5, 3, 1, 1},
  };
  for (const Case& c : cases) {
    CAPTURE(c.k);
    CAPTURE(c.stride);
    const Tensor x = oracle::random_tensor({c.n, c.cin, c.h, c.w}, rng);
    const Tensor wt = oracle::random_tensor({c.cout, c.cin, c.k, c.k}, rng);
    const Tensor b = oracle::random_tensor({1, c.cout, 1, 1}, rng);
    const Tensor got = conv2d(x, wt, b, {c.stride, c.pad});
    const Tensor want = oracle::conv2d(x, wt, b, c.stride, c.pad);
    REQUIRE(got.shape() == want.shape());
    CHECK(max_abs_diff(got, want) < 1e-12);
  }
}

TEST_CASE("conv2d output extents and errors") {
  CHECK(conv_output_extent(24, 3, {1, 1}) == 24);
  CHECK(conv_output_extent(64, 3, {2, 1}) == 32);
  CHECK(conv_output_extent(7, 3, {2, 1}) == 4);
  CHECK(conv_output_extent(5, 1, {1, 0}) == 5);
  const Tensor x({1, 3, 4, 4});
  const Tensor w({2, 4, 3, 3});
  const Tensor b({1, 2, 1, 1});
  CHECK_ERROR(conv2d(x, w, b, {1, 1}), ErrorCode::shape_mismatch);
  CHECK_ERROR(conv2d(x, Tensor({2, 3, 3, 3}), Tensor({1, 5, 1, 1}), {1, 1}), ErrorCode::shape_mismatch);
  CHECK_ERROR(conv2d(x, Tensor({2, 3, 3, 3}), b, {0, 1}), ErrorCode::invalid_argument);
}

TEST_CASE("conv layer parameter count") {
  CHECK(make_conv(64, 64, 3).param_count() == 36928);
  CHECK(make_conv(48, 16, 3).param_count() == 6928);
  CHECK(make_conv(64, 64, 1).param_count() == 4160);
}

TEST_CASE("activations") {
  const Tensor x({1, 1, 1, 4}, {-2.0, -0.0, 0.0, 3.0});
  const Tensor lr = leaky_relu(x, 0.05);
  CHECK(lr[0] == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(lr[1] == 0.0);
  CHECK(lr[3] == 3.0);
  CHECK(relu(x)[0] == 0.0);
  CHECK(relu(x)[3] == 3.0);
  CHECK_ERROR(leaky_relu(x, 0.0), ErrorCode::invalid_argument);
  CHECK_ERROR(leaky_relu(x, 1.0), ErrorCode::invalid_argument);

  const Tensor big({1, 1, 1, 3}, {-800.0, 0.0, 800.0});
  const Tensor s = sigmoid(big);
  CHECK(s[0] >= 0.0);
  CHECK(s[0] < 1e-300);
  CHECK(s[1] == 0.5);
  CHECK(s[2] == 1.0);
  CHECK(all_finite(s));
}

TEST_CASE("split, slice and concat are inverse") {
  std::mt19937_64 rng(3);
  const Tensor x = oracle::random_tensor({2, 64, 3, 4}, rng);
  auto [a, b] = channel_split(x, 16);
  CHECK(a.c() == 16);
  CHECK(b.c() == 48);
  CHECK(concat_channels({a, b}) == x);
  CHECK(slice_channels(x, 16, 64) == b);
  CHECK(slice_channels(x, 5, 9).at(1, 0, 2, 3) == x.at(1, 5, 2, 3));
  CHECK_ERROR(channel_split(x, 0), ErrorCode::invalid_argument);
  CHECK_ERROR(channel_split(x, 64), ErrorCode::invalid_argument);
  CHECK_ERROR(concat_channels({a, Tensor({2, 3, 3, 5})}), ErrorCode::shape_mismatch);
}

TEST_CASE("pixel shuffle matches the index oracle and unshuffle inverts it") {
  std::mt19937_64 rng(11);
  for (int s : {1, 2, 3, 4}) {
    const Tensor x = oracle::random_tensor({2, 3 * s * s, 3, 5}, rng);
    const Tensor y = pixel_shuffle(x, s);
    CHECK(y.shape() == Shape{2, 3, 3 * s, 5 * s});
    CHECK(y == oracle::pixel_shuffle(x, s));
    CHECK(pixel_unshuffle(y, s) == x);
  }
  CHECK_ERROR(pixel_shuffle(Tensor({1, 5, 2, 2}), 2), ErrorCode::invalid_argument);
}

TEST_CASE("global contrast pool is std plus mean") {
  Tensor x({1, 2, 2, 2}, {1.0, 2.0, 3.0, 4.0, 5.0, 5.0, 5.0, 5.0});
  const Tensor z = global_contrast_pool(x);
  CHECK(z.shape() == Shape{1, 2, 1, 1});
  CHECK(z[0] == doctest::Approx(2.5 + std::sqrt(1.25)).epsilon(1e-15));
  CHECK(z[1] == 5.0);
}

TEST_CASE("channel scale, add, crop, paste") {
  std::mt19937_64 rng(5);
  const Tensor x = oracle::random_tensor({2, 3, 4, 4}, rng);
  const Tensor g({2, 3, 1, 1}, {1, 2, 3, 4, 5, 6});
  const Tensor y = channel_scale(x, g);
  CHECK(y.at(1, 2, 3, 1) == x.at(1, 2, 3, 1) * 6.0);
  CHECK_ERROR(channel_scale(x, Tensor({1, 3, 1, 1})), ErrorCode::shape_mismatch);
  CHECK(add(x, y).at(0, 1, 2, 3) == x.at(0, 1, 2, 3) + y.at(0, 1, 2, 3));
  CHECK(sub(x, y).at(1, 0, 0, 2) == x.at(1, 0, 0, 2) - y.at(1, 0, 0, 2));
  CHECK(scale(x, -2.0).at(1, 2, 1, 1) == -2.0 * x.at(1, 2, 1, 1));
  CHECK_ERROR(add(x, Tensor({2, 3, 4, 5})), ErrorCode::shape_mismatch);

  const Tensor c = crop(x, 1, 2, 3, 2);
  CHECK(c.shape() == Shape{2, 3, 3, 2});
  CHECK(c.at(1, 1, 0, 0) == x.at(1, 1, 1, 2));
  Tensor dst({2, 3, 4, 4});
  paste(dst, c, 1, 2);
  CHECK(dst.at(1, 1, 3, 3) == x.at(1, 1, 3, 3));
  CHECK(dst.at(1, 1, 0, 0) == 0.0);
  CHECK_ERROR(crop(x, 2, 2, 3, 1), ErrorCode::invalid_argument);
  CHECK_ERROR(paste(dst, c, 2, 2), ErrorCode::invalid_argument);
}

TEST_CASE("tensor construction errors") {
  CHECK_ERROR(Tensor({1, -1, 2, 2}), ErrorCode::invalid_argument);
  CHECK_ERROR(Tensor({1, 1, 2, 2}, std::vector<double>(3)), ErrorCode::shape_mismatch);
}

}
