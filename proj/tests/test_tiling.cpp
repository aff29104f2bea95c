#include <gtest/gtest.h>

#include <set>

#include "vegmap/rng.hpp"
#include "vegmap/synthfield.hpp"
#include "vegmap/tiling.hpp"

using namespace vegmap;

namespace {

CoverMask blob_mask(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  CoverMask m("bv", w, h);
  for (int d = 0; d < 6; ++d) {
    const double cx = rng.uniform(0, w), cy = rng.uniform(0, h), r = rng.uniform(10, 40);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) m.set(x, y, true);
      }
    }
  }
  return m;
}

}  // namespace

TEST(GridTiles, FieldImageAt128) {
  EXPECT_EQ(grid_tiles(4096, 2160, 128, 1).size(), 512u);
}

TEST(GridTiles, EqualsEnumeration) {
  for (int w : {100, 257}) {
    for (int size : {16, 32, 50}) {
      for (int shifts : {1, 2, 3, 5}) {
        std::vector<TileSpec> expect;
        std::set<std::pair<int, int>> seen;
        for (int k = 0; k < shifts; ++k) {
          const int off = k * size / shifts;
          for (int y = off; y + size <= 90; y += size) {
            for (int x = off; x + size <= w; x += size) {
              if (seen.insert({x, y}).second) expect.push_back({"i", x, y, size});
            }
          }
        }
        EXPECT_EQ(grid_tiles(w, 90, size, shifts, "i"), expect);
      }
    }
  }
}

TEST(GridTiles, ShiftOffsetsAndBounds) {
  const auto tiles = grid_tiles(300, 300, 128, 3);
  std::set<int> offsets;
  for (const auto& t : tiles) {
    EXPECT_LE(t.x + t.size, 300);
    EXPECT_LE(t.y + t.size, 300);
    if (t.x == t.y) offsets.insert(t.x);
  }
  EXPECT_TRUE(offsets.count(42));
  EXPECT_TRUE(offsets.count(85));
}

TEST(GridTiles, RejectsBadArguments) {
  EXPECT_THROW(grid_tiles(100, 100, 0, 1), Error);
  EXPECT_THROW(grid_tiles(100, 100, 10, 0), Error);
  EXPECT_THROW(grid_tiles(100, 50, 64, 1), Error);
}

TEST(OverlayFraction, IntegralMatchesDirectCount) {
  const auto mask = blob_mask(160, 120, 3);
  const MaskIntegral integral(mask);
  for (const auto& t : grid_tiles(160, 120, 24, 4)) {
    EXPECT_DOUBLE_EQ(integral.fraction(t), overlay_fraction(t, mask));
  }
  EXPECT_THROW(overlay_fraction({"", 150, 0, 24}, mask), Error);
}

TEST(SelectTiles, EveryTileMeetsThreshold) {
  RgbImage img(160, 120);
  const auto mask = blob_mask(160, 120, 7);
  for (double sth : {0.3, 0.6, 0.9, 1.0}) {
    const auto m = select_training_tiles(img, mask, {32, sth, 3, "bv"}, "img");
    for (const auto& e : m.entries()) {
      EXPECT_GE(overlay_fraction(e.tile, mask), sth);
      EXPECT_EQ(e.label, "bv");
      EXPECT_EQ(e.provenance, Provenance::mask_hue);
    }
    std::size_t expect = 0;
    for (const auto& t : grid_tiles(160, 120, 32, 3)) expect += overlay_fraction(t, mask) >= sth;
    EXPECT_EQ(m.size(), expect);
  }
}

TEST(SelectTiles, MonotoneInThresholdAndShifts) {
  const auto scene = generate_scene(field_preset(5, 512, 384));
  const auto mask = scene.truth.mask_of(0);
  for (int size : {32, 64}) {
    std::size_t prev = SIZE_MAX;
    for (double sth : {0.5, 0.8, 0.9, 0.95, 0.99, 0.999, 1.0}) {
      const auto n = select_training_tiles(scene.image, mask, {size, sth, 3, "bv"}, "a").size();
      EXPECT_LE(n, prev);
      prev = n;
    }
    std::size_t last = 0;
    for (int shifts : {1, 2, 4, 8}) {
      // Offset sets for 1, 2, 4, 8 shifts are nested.
      const auto n = select_training_tiles(scene.image, mask, {size, 0.9, shifts, "bv"}, "a").size();
      EXPECT_GE(n, last);
      last = n;
    }
  }
}

TEST(SelectTiles, Validation) {
  RgbImage img(64, 64);
  CoverMask mask("bv", 64, 64);
  EXPECT_THROW(select_training_tiles(img, mask, {16, 0.0, 1, "bv"}, "a"), Error);
  EXPECT_THROW(select_training_tiles(img, mask, {16, 1.5, 1, "bv"}, "a"), Error);
  EXPECT_THROW(select_training_tiles(img, CoverMask("bv", 32, 64), {16, 0.5, 1, "bv"}, "a"), Error);
  EXPECT_THROW(select_training_tiles(img, mask, {16, 0.5, 1, ""}, "a"), Error);
  EXPECT_EQ(select_training_tiles(img, mask, {16, 0.5, 1, "bv"}, "a").size(), 0u);
}

TEST(Manifest, JsonlRoundTrip) {
  TileManifest m;
  m.add({{"img-a", 0, 0, 64}, "bv", Provenance::direct, Review::pending});
  m.add({{"img-a", 64, 0, 64}, std::nullopt, Provenance::neighbor_suggested, Review::rejected});
  m.add({{"img-b", 0, 64, 64}, "soil", Provenance::mask_hue, Review::approved});
  const auto text = manifest_to_jsonl(m);
  EXPECT_EQ(manifest_from_jsonl(text), m);
  EXPECT_NE(text.find("\"label\":null"), std::string::npos);
  EXPECT_NE(text.find("\"provenance\":\"neighbor-suggested\""), std::string::npos);
  EXPECT_EQ(m.trainable().size(), 2u);
}

TEST(Manifest, RejectsDuplicatesAndBadLines) {
  TileManifest m;
  m.add({{"a", 0, 0, 8}, "x", Provenance::direct, Review::pending});
  EXPECT_THROW(m.add({{"a", 0, 0, 8}, "y", Provenance::direct, Review::pending}), Error);
  try {
    manifest_from_jsonl("{\"image_id\":\"a\",\"x\":0,\"y\":0,\"size\":8,\"label\":\"x\",\"provenance\":\"direct\"}\nnot json\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse_error);
    EXPECT_NE(e.detail().find("line 2"), std::string::npos);
  }
  EXPECT_THROW(manifest_from_jsonl("{\"image_id\":\"a\",\"x\":0,\"y\":0,\"size\":8,\"label\":\"x\",\"provenance\":\"magic\"}\n"), Error);
}

TEST(Manifest, MergeDropsConflicts) {
  TileManifest a, b;
  a.add({{"i", 0, 0, 8}, "bv", Provenance::mask_hue, Review::pending});
  a.add({{"i", 8, 0, 8}, "bv", Provenance::mask_hue, Review::pending});
  b.add({{"i", 0, 0, 8}, "ca", Provenance::mask_hue, Review::pending});
  b.add({{"i", 8, 0, 8}, "bv", Provenance::mask_hue, Review::pending});
  b.add({{"i", 16, 0, 8}, "ca", Provenance::mask_hue, Review::pending});
  std::vector<TileSpec> conflicts;
  const auto m = merge_manifests({a, b}, &conflicts);
  ASSERT_EQ(conflicts.size(), 1u);
  EXPECT_EQ(conflicts[0], (TileSpec{"i", 0, 0, 8}));
  EXPECT_EQ(m.size(), 2u);
  EXPECT_FALSE(m.contains({"i", 0, 0, 8}));
}

TEST(CropTile, CopiesFootprint) {
  RgbImage img(10, 10);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) img.at(x, y) = {static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y), 0};
  }
  const auto t = crop_tile(img, {"", 3, 4, 5});
  EXPECT_EQ(t.at(0, 0), (Rgb{3, 4, 0}));
  EXPECT_EQ(t.at(4, 4), (Rgb{7, 8, 0}));
  EXPECT_THROW(crop_tile(img, {"", 6, 6, 5}), Error);
}
