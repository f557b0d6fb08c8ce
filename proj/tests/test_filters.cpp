#include <doctest.h>

#include <algorithm>

#include "promptseg/errors.hpp"
#include "promptseg/filters.hpp"
#include "promptseg/rng.hpp"
#include "promptseg/scene.hpp"

#include "helpers.hpp"

using namespace promptseg;

namespace {

BinaryRaster rect_raster(int height, int width, int y0, int x0, int h, int w) {
  BinaryRaster r = BinaryRaster::zeros(height, width);
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) r.set(y, x, 1);
  }
  return r;
}

std::vector<Mask> random_mask_set(int height, int width, int count, Rng& rng) {
  std::vector<Mask> masks;
  for (int i = 0; i < count; ++i) {
    Mask m = rle_encode(testing::random_rect_raster(height, width, 4, 24, rng));
    m.id = i;
    m.quality = 0.25 + 0.75 * rng.uniform();
    masks.push_back(std::move(m));
  }
  return masks;
}

BinaryRaster pixel_union(const std::vector<Mask>& masks, int height, int width) {
  BinaryRaster u = BinaryRaster::zeros(height, width);
  for (const auto& m : masks) {
    const BinaryRaster r = rle_decode(m);
    for (size_t i = 0; i < u.data.size(); ++i) u.data[i] |= r.data[i];
  }
  return u;
}

}  // namespace

TEST_CASE("dedup keeps the higher quality duplicate") {
  Mask strong = rle_encode(rect_raster(16, 16, 2, 2, 6, 6));
  strong.id = 0;
  strong.quality = 0.9;
  Mask weak = strong;
  weak.id = 1;
  weak.quality = 0.5;
  const auto out = dedup({strong, weak}, FilterConfig{});
  REQUIRE(out.size() == 1);
  CHECK(out[0].id == 0);
}

TEST_CASE("dedup leaves disjoint masks alone") {
  Mask a = rle_encode(rect_raster(16, 16, 0, 0, 4, 4));
  a.id = 0;
  Mask b = rle_encode(rect_raster(16, 16, 8, 8, 4, 4));
  b.id = 1;
  const auto out = dedup({a, b}, FilterConfig{});
  CHECK(out.size() == 2);
}

TEST_CASE("dedup output is pairwise below threshold on 50 random masks") {
  Rng rng(99);
  const auto masks = random_mask_set(32, 32, 50, rng);
  const FilterConfig config;
  const auto out = dedup(masks, config);
  CHECK(out.size() <= masks.size());
  for (size_t i = 0; i < out.size(); ++i) {
    for (size_t j = i + 1; j < out.size(); ++j) {
      CHECK(iou(out[i], out[j]) < config.dup_iou_threshold);
    }
  }
}

TEST_CASE("split assigns a contained mask its pixels and preserves the union") {
  Mask outer = rle_encode(rect_raster(24, 24, 2, 2, 12, 12));
  outer.id = 0;
  Mask inner = rle_encode(rect_raster(24, 24, 4, 4, 6, 6));
  inner.id = 1;
  const auto out = split_intersections({outer, inner}, FilterConfig{});
  REQUIRE(out.size() == 2);
  const auto& inner_out = out[1];
  const auto& outer_out = out[0];
  CHECK(inner_out.id == 1);
  CHECK(rle_decode(inner_out) == rle_decode(inner));  // smaller mask wins its pixels
  CHECK(outer_out.area == outer.area - inner.area);
  CHECK(pixel_union(out, 24, 24) == pixel_union({outer, inner}, 24, 24));
}

TEST_CASE("split is a no-op on disjoint masks") {
  Mask a = rle_encode(rect_raster(16, 16, 0, 0, 5, 5));
  a.id = 3;
  Mask b = rle_encode(rect_raster(16, 16, 9, 9, 5, 5));
  b.id = 7;
  const auto out = split_intersections({a, b}, FilterConfig{});
  REQUIRE(out.size() == 2);
  CHECK(rle_decode(out[0]) == rle_decode(a));
  CHECK(rle_decode(out[1]) == rle_decode(b));
}

TEST_CASE("split on 30 random masks: disjoint, union preserving, single cover") {
  Rng rng(123);
  const auto masks = random_mask_set(64, 64, 30, rng);
  const auto out = split_intersections(masks, FilterConfig{});

  // Per-pixel brute force: every input-covered pixel covered exactly once.
  std::vector<int> cover(64 * 64, 0);
  for (const auto& m : out) {
    const BinaryRaster r = rle_decode(m);
    for (size_t i = 0; i < r.data.size(); ++i) cover[i] += r.data[i];
  }
  const BinaryRaster input_union = pixel_union(masks, 64, 64);
  for (size_t i = 0; i < cover.size(); ++i) {
    CHECK(cover[i] == (input_union.data[i] ? 1 : 0));
  }
}

TEST_CASE("a mask shrunk below the overlap threshold keeps sole-cover pixels") {
  // 10x10 square nearly covered by a slightly smaller, higher-priority one.
  Mask big = rle_encode(rect_raster(24, 24, 0, 0, 10, 10));
  big.id = 0;
  BinaryRaster almost = rect_raster(24, 24, 0, 0, 10, 10);
  almost.set(0, 0, 0);
  almost.set(0, 1, 0);
  almost.set(1, 0, 0);
  almost.set(1, 1, 0);  // area 96 < 100, higher priority in the split order
  Mask small = rle_encode(almost);
  small.id = 1;
  const auto out = split_intersections({big, small}, FilterConfig{});
  // big keeps only 4 pixels = 4% of its area; those pixels have no other
  // cover, so big must survive (union preservation wins over absorption).
  REQUIRE(out.size() == 2);
  CHECK(out[0].id == 0);
  CHECK(out[0].area == 4);
}

TEST_CASE("a sliver remnant with alternative cover is absorbed") {
  // thief takes 96 of target's 100 pixels; giant covers the leftover corners.
  BinaryRaster thief_raster = rect_raster(32, 32, 6, 6, 10, 10);
  thief_raster.set(6, 6, 0);
  thief_raster.set(6, 15, 0);
  thief_raster.set(15, 6, 0);
  thief_raster.set(15, 15, 0);
  Mask thief = rle_encode(thief_raster);  // area 96
  thief.id = 0;
  Mask target = rle_encode(rect_raster(32, 32, 6, 6, 10, 10));  // area 100
  target.id = 1;
  Mask giant = rle_encode(rect_raster(32, 32, 0, 0, 20, 20));  // area 400
  giant.id = 2;

  const std::vector<Mask> input = {thief, target, giant};
  const auto out = split_intersections(input, FilterConfig{});
  // target survives with 4 px = 4% < 5% and every remnant pixel is covered by
  // giant, so it is absorbed.
  REQUIRE(out.size() == 2);
  CHECK(out[0].id == 0);
  CHECK(out[0].area == 96);
  CHECK(out[1].id == 2);
  CHECK(out[1].area == 400 - 96);
  CHECK(pixel_union(out, 32, 32) == pixel_union(input, 32, 32));
}

TEST_CASE("filter_pipeline on the 4-rectangle scene with distractors") {
  const std::vector<std::pair<std::string, Rgb>> palette = {
      {"a", Rgb{255, 0, 0}},
      {"b", Rgb{0, 255, 0}},
      {"c", Rgb{0, 0, 255}},
      {"d", Rgb{255, 255, 0}},
  };
  SyntheticScene scene = random_rect_scene(256, 256, 4, palette, 21, 48, 80);
  scene.distractors.duplicates = true;
  scene.distractors.dilated = true;
  scene.distractors.dilation_px = 1;

  const auto proposals = synthetic_propose(scene);
  REQUIRE(proposals.size() == 12);
  const auto out = filter_pipeline(proposals, FilterConfig{});

  REQUIRE(out.size() == 4);
  for (size_t i = 0; i < out.size(); ++i) {
    for (size_t j = i + 1; j < out.size(); ++j) CHECK(iou(out[i], out[j]) == 0.0);
  }
  // The four exact rectangles' union is intact.
  BinaryRaster expected = BinaryRaster::zeros(256, 256);
  for (const auto& region : scene.regions) {
    for (size_t i = 0; i < expected.data.size(); ++i) expected.data[i] |= region.raster.data[i];
  }
  CHECK(pixel_union(out, 256, 256) == expected);
}

TEST_CASE("filter_pipeline trivia: empty input, fixed point") {
  CHECK(filter_pipeline({}, FilterConfig{}).empty());

  Rng rng(5);
  const auto masks = random_mask_set(48, 48, 12, rng);
  const auto once = filter_pipeline(masks, FilterConfig{});
  const auto twice = filter_pipeline(once, FilterConfig{});
  REQUIRE(once.size() == twice.size());
  for (size_t i = 0; i < once.size(); ++i) {
    CHECK(once[i].id == twice[i].id);
    CHECK(rle_decode(once[i]) == rle_decode(twice[i]));
  }
}

TEST_CASE("filter output is independent of input order") {
  Rng rng(17);
  auto masks = random_mask_set(48, 48, 15, rng);
  const auto baseline = filter_pipeline(masks, FilterConfig{});

  for (int trial = 0; trial < 5; ++trial) {
    shuffle(masks, rng);
    const auto out = filter_pipeline(masks, FilterConfig{});
    REQUIRE(out.size() == baseline.size());
    for (size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i].id == baseline[i].id);
      CHECK(rle_decode(out[i]) == rle_decode(baseline[i]));
    }
  }
}

TEST_CASE("filters reject mismatched dimensions and bad thresholds") {
  Mask a = rle_encode(rect_raster(16, 16, 0, 0, 4, 4));
  Mask b = rle_encode(rect_raster(16, 17, 0, 0, 4, 4));
  b.id = 1;
  CHECK_THROWS_AS(dedup({a, b}, FilterConfig{}), ShapeError);
  CHECK_THROWS_AS(split_intersections({a, b}, FilterConfig{}), ShapeError);

  FilterConfig bad;
  bad.dup_iou_threshold = 0.0;
  CHECK_THROWS_AS(dedup({a}, bad), ConfigError);
  bad = FilterConfig{};
  bad.overlap_threshold = 1.5;
  CHECK_THROWS_AS(split_intersections({a}, bad), ConfigError);
}

TEST_CASE("disabling stages gates them") {
  Mask outer = rle_encode(rect_raster(24, 24, 2, 2, 12, 12));
  outer.id = 0;
  Mask inner = rle_encode(rect_raster(24, 24, 4, 4, 6, 6));
  inner.id = 1;
  FilterConfig drop_only;
  drop_only.enable_split = false;
  const auto out = filter_pipeline({outer, inner}, drop_only);
  // IoU 36/144 = 0.25 < 0.9: both survive, still overlapping.
  REQUIRE(out.size() == 2);
  CHECK(iou(out[0], out[1]) > 0.0);
}
