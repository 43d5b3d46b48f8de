#include <random>
#include <vector>

#include "doctest.h"
#include "imdn/tiler.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace imdn;

namespace {

ImdnConfig truncated_any_scale() {
  ImdnConfig c = ImdnConfig::narrow(8, 1, 1);
  c.use_cca = false;
  c.topology = Topology::any_scale;
  return c;
}

}  // namespace

TEST_SUITE("tiler") {

TEST_CASE("increments") {
  const Increments a = compute_increments(101, 77, 4);
  CHECK((101 / 2 + a.rows) % 4 == 0);
  CHECK((77 / 2 + a.cols) % 4 == 0);
  CHECK(a.rows == 2);  // 4 - (50 + 4) % 4
  CHECK(a.cols == 2);  // 4 - (38 + 4) % 4
  CHECK_ERROR(compute_increments(64, 64, 3), ErrorCode::invalid_argument);
  CHECK_ERROR(compute_increments(64, 64, 0), ErrorCode::invalid_argument);
  CHECK_ERROR(compute_increments(8, 8, 12), ErrorCode::invalid_argument);
}

TEST_CASE("randomised divisibility and exact partition") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> extent(8, 500);
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int h = extent(rng);
    const int w = extent(rng);
    for (int p : {4, 8, 12}) {
      std::array<TileSpec, 4> tiles;
      try {
        tiles = compute_tiles(h, w, p);
      } catch (const Error&) {
        CHECK((h / 2 + p - (h / 2 + p) % 4 > h || w / 2 + p - (w / 2 + p) % 4 > w));
        continue;
      }
      ++checked;
      std::vector<int> cover(static_cast<std::size_t>(h) * w, 0);
      for (const TileSpec& t : tiles) {
        CHECK(t.source.rows % 4 == 0);
        CHECK(t.source.cols % 4 == 0);
        CHECK(t.source.row0 >= 0);
        CHECK(t.source.col0 >= 0);
        CHECK(t.source.row0 + t.source.rows <= h);
        CHECK(t.source.col0 + t.source.cols <= w);
        // kept region sits inside the patch
        CHECK(t.paste.row0 == t.source.row0 + t.discard_top);
        CHECK(t.paste.col0 == t.source.col0 + t.discard_left);
        CHECK(t.discard_top + t.paste.rows <= t.source.rows);
        CHECK(t.discard_left + t.paste.cols <= t.source.cols);
        for (int r = 0; r < t.paste.rows; ++r)
          for (int c = 0; c < t.paste.cols; ++c)
            ++cover[static_cast<std::size_t>(t.paste.row0 + r) * w + t.paste.col0 + c];
      }
      bool exact = true;
      for (int v : cover) exact = exact && v == 1;
      CHECK(exact);
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("receptive radius of the truncated network matches a perturbation probe") {
  Model m(truncated_any_scale());
  init_weights(m, 4);
  const std::optional<int> r = receptive_radius(m);
  REQUIRE(r);
  CHECK(*r == 30);

  std::mt19937_64 rng(1);
  Tensor x = oracle::random_tensor({1, 3, 96, 96}, rng, 0.0, 1.0);
  const Tensor base = m.forward(x);
  // Pixel 49 sits at offset 1 inside a stride-4 cell, where the reach peaks.
  for (int c = 0; c < 3; ++c) x.at(0, c, 49, 49) += 0.5;
  const Tensor moved = m.forward(x);
  int reach = 0;
  for (int h = 0; h < 96; ++h)
    for (int w = 0; w < 96; ++w)
      for (int c = 0; c < 3; ++c)
        if (moved.at(0, c, h, w) != base.at(0, c, h, w))
          reach = std::max({reach, std::abs(h - 49), std::abs(w - 49)});
  CHECK(reach == *r);

  CHECK_FALSE(receptive_radius(build_imdn_as(ImdnConfig::narrow(8, 1, 1))));
}

TEST_CASE("tiled output equals whole-image output when the overlap covers the receptive field") {
  Model m(truncated_any_scale());
  init_weights(m, 11);
  std::mt19937_64 rng(12);
  const Tensor x = oracle::random_tensor({1, 3, 104, 104}, rng, 0.0, 1.0);
  const int padding = padding_for_radius(104, 104, *receptive_radius(m));
  const Tensor whole = m.forward(x);
  const Tensor tiled = tiled_forward(m, x, padding);
  CHECK(max_abs_diff(whole, tiled) < 1e-9);
  CHECK(tiled_forward(m, x, padding, {3, 1, 2, 0}) == tiled);
  CHECK(tiled_forward(m, x, padding, {1, 0, 3, 2}) == tiled);
  CHECK_ERROR(tiled_forward(m, x, padding, {0, 0, 1, 2}), ErrorCode::invalid_argument);
}

TEST_CASE("odd sizes and the default padding") {
  Model m = build_imdn_as(ImdnConfig::narrow(8, 1, 1));
  init_weights(m, 2);
  ImageBuffer img(101, 77, 128);
  const ImageBuffer out = super_resolve_tiled(img, m);
  CHECK(out.height == 101);
  CHECK(out.width == 77);
  CHECK_ERROR(super_resolve_tiled(ImageBuffer(7, 20), m), ErrorCode::invalid_argument);
  CHECK_ERROR(super_resolve_tiled(img, m, 3), ErrorCode::invalid_argument);
  CHECK_ERROR(tiled_forward(build_imdn(ImdnConfig::narrow(8, 1, 2)), Tensor({1, 3, 16, 16}), 4),
              ErrorCode::invalid_argument);
}

TEST_CASE("seam metric") {
  CHECK(seam_discontinuity(Tensor({1, 3, 10, 10}, 0.25), 10, 10) == 0.0);
  Tensor t({1, 1, 4, 4});
  t.at(0, 0, 2, 1) = 0.5;
  CHECK(seam_discontinuity(t, 4, 4) == 0.5);
}

}
