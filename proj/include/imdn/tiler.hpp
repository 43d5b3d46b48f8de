#pragma once

#include <array>
#include <optional>

#include "imdn/image.hpp"
#include "imdn/model.hpp"

namespace imdn {

struct Rect {
  int row0 = 0;
  int col0 = 0;
  int rows = 0;
  int cols = 0;

  friend bool operator==(const Rect&, const Rect&) = default;
};

// One of the four corner-anchored patches. The network runs on `source`;
// `paste` is where the kept part lands. Input and output share coordinates.
struct TileSpec {
  Rect source;
  Rect paste;
  int discard_top = 0;   // local rows skipped before the kept region
  int discard_left = 0;  // local cols skipped before the kept region
};

struct Increments {
  int rows = 0;
  int cols = 0;
};

inline constexpr int kDefaultTilePadding = 4;

// Extra rows/cols added to floor(H/2) and floor(W/2) so each patch side is a
// multiple of 4: padding - (floor(extent/2) + padding) % 4. `padding` must be
// a positive multiple of 4.
Increments compute_increments(int height, int width, int padding);

// Order: top-left, top-right, bottom-left, bottom-right.
std::array<TileSpec, 4> compute_tiles(int height, int width, int padding);

// Runs `model` (any-scale topology) on each tile and stitches the kept
// regions. Tiles run concurrently; `order` permutes the submission order.
Tensor tiled_forward(const Model& model, const Tensor& image, int padding,
                     std::array<int, 4> order = {0, 1, 2, 3});

ImageBuffer super_resolve_tiled(const ImageBuffer& image, const Model& model,
                                int padding = kDefaultTilePadding);

// Largest |difference| between neighbouring output pixels straddling the
// internal paste boundaries.
double seam_discontinuity(const Tensor& output, int height, int width);

// Distance in input pixels beyond which an output pixel cannot see; nullopt
// when a global statistic (channel attention) makes every pixel see the whole patch.
std::optional<int> receptive_radius(const Model& model);

// Smallest padding 4k whose increments cover `radius` for this image size.
int padding_for_radius(int height, int width, int radius);

}  // namespace imdn
