#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "imdn/error.hpp"

namespace imdn {

// Batch, channel, height, width.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const noexcept {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

// Dense rank-4 double tensor in NCHW row-major order.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  int n() const noexcept { return shape_.n; }
  int c() const noexcept { return shape_.c; }
  int h() const noexcept { return shape_.h; }
  int w() const noexcept { return shape_.w; }
  std::size_t numel() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  std::size_t offset(int n, int c, int h, int w) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double& at(int n, int c, int h, int w) noexcept { return data_[offset(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const noexcept { return data_[offset(n, c, h, w)]; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // Pointer to the (n, c) plane.
  double* plane(int n, int c) noexcept { return data_.data() + offset(n, c, 0, 0); }
  const double* plane(int n, int c) const noexcept { return data_.data() + offset(n, c, 0, 0); }

  void fill(double v);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

struct ConvGeometry {
  int stride = 1;
  int padding = 0;
};

// Learnable 2-D convolution: weight (out, in, k, k), bias (1, out, 1, 1).
struct ConvLayer {
  Tensor weight;
  Tensor bias;
  ConvGeometry geometry;

  int out_channels() const noexcept { return weight.n(); }
  int in_channels() const noexcept { return weight.c(); }
  int kernel() const noexcept { return weight.h(); }
  std::size_t param_count() const noexcept { return weight.numel() + bias.numel(); }
};

ConvLayer make_conv(int in_channels, int out_channels, int kernel, int stride = 1,
                    int padding = -1);

int conv_output_extent(int extent, int kernel, ConvGeometry g);

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, ConvGeometry g);
Tensor conv2d(const Tensor& input, const ConvLayer& layer);

Tensor leaky_relu(const Tensor& x, double slope);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Channels [0, first) and [first, C).
std::pair<Tensor, Tensor> channel_split(const Tensor& x, int first);
Tensor slice_channels(const Tensor& x, int begin, int end);
Tensor concat_channels(std::span<const Tensor> parts);
Tensor concat_channels(std::initializer_list<Tensor> parts);

Tensor pixel_shuffle(const Tensor& x, int scale);
Tensor pixel_unshuffle(const Tensor& x, int scale);

// Per-channel population standard deviation plus mean, shape (N, C, 1, 1).
Tensor global_contrast_pool(const Tensor& x);

Tensor channel_scale(const Tensor& x, const Tensor& gates);
Tensor add(const Tensor& x, const Tensor& y);
Tensor sub(const Tensor& x, const Tensor& y);
Tensor scale(const Tensor& x, double factor);

// Spatial sub-window [row0, row0 + rows) x [col0, col0 + cols) of every plane.
Tensor crop(const Tensor& x, int row0, int col0, int rows, int cols);
// Writes src into dst at (row0, col0); channel and batch counts must match.
void paste(Tensor& dst, const Tensor& src, int row0, int col0);

double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& x);

}  // namespace imdn
