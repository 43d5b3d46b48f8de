#include "imdn/tiler.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <unordered_map>

namespace imdn {

namespace {

constexpr int kPatchMultiple = 4;

int increment_for(int extent, int padding, const char* axis) {
  const int half = extent / 2;
  const int inc = padding - (half + padding) % kPatchMultiple;
  if (half + inc > extent)
    fail(ErrorCode::invalid_argument,
         std::string("tile ") + axis + " " + std::to_string(half + inc) + " exceeds image " +
             axis + " " + std::to_string(extent) + "; use a smaller padding or a larger image");
  return inc;
}

void check_padding(int padding) {
  if (padding < kPatchMultiple || padding % kPatchMultiple != 0)
    fail(ErrorCode::invalid_argument, "tile padding must be 4k with k >= 1, got " +
                                          std::to_string(padding));
}

// Returns (source start, paste start, paste length, discard) along one axis.
struct AxisSplit {
  int source = 0;
  int paste = 0;
  int length = 0;
  int discard = 0;
};

std::array<AxisSplit, 2> split_axis(int extent, int tile) {
  const int half = extent / 2;
  AxisSplit first{0, 0, half, 0};
  const int start = extent - tile;
  AxisSplit second{start, half, extent - half, half - start};
  return {first, second};
}

}  // namespace

Increments compute_increments(int height, int width, int padding) {
  check_padding(padding);
  if (height < 1 || width < 1)
    fail(ErrorCode::invalid_argument, "compute_increments: image must be non-empty");
  return {increment_for(height, padding, "height"), increment_for(width, padding, "width")};
}

std::array<TileSpec, 4> compute_tiles(int height, int width, int padding) {
  const Increments inc = compute_increments(height, width, padding);
  const int tile_h = height / 2 + inc.rows;
  const int tile_w = width / 2 + inc.cols;
  const auto rows = split_axis(height, tile_h);
  const auto cols = split_axis(width, tile_w);
  std::array<TileSpec, 4> tiles;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      TileSpec& t = tiles[r * 2 + c];
      t.source = {rows[r].source, cols[c].source, tile_h, tile_w};
      t.paste = {rows[r].paste, cols[c].paste, rows[r].length, cols[c].length};
      t.discard_top = rows[r].discard;
      t.discard_left = cols[c].discard;
    }
  return tiles;
}

Tensor tiled_forward(const Model& model, const Tensor& image, int padding,
                     std::array<int, 4> order) {
  if (model.config().topology != Topology::any_scale)
    fail(ErrorCode::invalid_argument, "tiled inference needs an any-scale model");
  if (image.c() != 3) fail(ErrorCode::shape_mismatch, "tiled_forward: expected RGB input");
  {
    std::array<int, 4> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != std::array<int, 4>{0, 1, 2, 3})
      fail(ErrorCode::invalid_argument, "tiled_forward: order must permute 0..3");
  }
  const std::array<TileSpec, 4> tiles = compute_tiles(image.h(), image.w(), padding);

  std::array<std::future<Tensor>, 4> jobs;
  for (int idx : order) {
    const TileSpec& t = tiles[idx];
    jobs[idx] = std::async(std::launch::async, [&model, &image, t] {
      const Tensor patch = crop(image, t.source.row0, t.source.col0, t.source.rows, t.source.cols);
      const Tensor out = model.forward(patch);
      return crop(out, t.discard_top, t.discard_left, t.paste.rows, t.paste.cols);
    });
  }
  Tensor result({image.n(), 3, image.h(), image.w()});
  for (int i = 0; i < 4; ++i) paste(result, jobs[i].get(), tiles[i].paste.row0, tiles[i].paste.col0);
  return result;
}

ImageBuffer super_resolve_tiled(const ImageBuffer& image, const Model& model, int padding) {
  if (image.height < 8 || image.width < 8)
    fail(ErrorCode::invalid_argument, "tiled inference needs images of at least 8x8");
  return tensor_to_image(tiled_forward(model, image_to_tensor(image), padding));
}

double seam_discontinuity(const Tensor& output, int height, int width) {
  const int mid_r = height / 2;
  const int mid_c = width / 2;
  double worst = 0.0;
  for (int n = 0; n < output.n(); ++n)
    for (int c = 0; c < output.c(); ++c) {
      if (mid_r > 0)
        for (int col = 0; col < width; ++col)
          worst = std::max(worst, std::abs(output.at(n, c, mid_r, col) -
                                           output.at(n, c, mid_r - 1, col)));
      if (mid_c > 0)
        for (int row = 0; row < height; ++row)
          worst = std::max(worst, std::abs(output.at(n, c, row, mid_c) -
                                           output.at(n, c, row, mid_c - 1)));
    }
  return worst;
}

std::optional<int> receptive_radius(const Model& model) {
  // Footprint of one output cell of a layer, in input pixels:
  // [jump * j + lo, jump * j + hi].
  struct Footprint {
    int jump = 1;
    int lo = 0;
    int hi = 0;
  };
  std::unordered_map<std::string, Footprint> at;
  Footprint last;
  for (const LayerSlot& l : model.layers()) {
    if (l.attention_branch) return std::nullopt;
    Footprint in;
    bool first = true;
    for (const std::string& s : l.sources) {
      const Footprint& f = at.at(s);
      if (first) {
        in = f;
        first = false;
      } else {
        in.lo = std::min(in.lo, f.lo);
        in.hi = std::max(in.hi, f.hi);
        in.jump = std::max(in.jump, f.jump);
      }
    }
    const int k = l.kernel();
    const int p = l.geometry.padding;
    Footprint out;
    out.jump = in.jump * l.geometry.stride;
    out.lo = in.lo - in.jump * p;
    out.hi = in.hi + in.jump * (k - 1 - p);
    at[l.name] = out;
    last = out;
  }
  // Any-scale output pixel q = jump * j + r with r in [0, jump).
  return std::max(last.jump - 1 - last.lo, last.hi);
}

int padding_for_radius(int height, int width, int radius) {
  for (int padding = kPatchMultiple;; padding += kPatchMultiple) {
    const Increments inc = compute_increments(height, width, padding);
    if (inc.rows >= radius && inc.cols >= radius) return padding;
  }
}

}  // namespace imdn
