#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "vegmap/hsv.hpp"
#include "vegmap/hue.hpp"
#include "vegmap/image_io.hpp"
#include "vegmap/rng.hpp"
#include "vegmap/synthfield.hpp"

using namespace vegmap;

namespace {

// Textbook hexcone on normalized floats, written independently of rgb_to_hsv.
void reference_hsv(Rgb p, double& h, double& s, double& v) {
  const double r = p.r / 255.0, g = p.g / 255.0, b = p.b / 255.0;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  v = mx;
  const int imax = std::max({p.r, p.g, p.b}), imin = std::min({p.r, p.g, p.b});
  s = imax > 0 ? static_cast<double>(imax - imin) / imax : 0.0;
  if (mx == mn) {
    h = 0.0;
    return;
  }
  const double rc = (mx - r) / (mx - mn), gc = (mx - g) / (mx - mn), bc = (mx - b) / (mx - mn);
  double hh;
  if (r == mx) {
    hh = bc - gc;
  } else if (g == mx) {
    hh = 2.0 + rc - bc;
  } else {
    hh = 4.0 + gc - rc;
  }
  h = std::fmod(hh / 6.0 + 1.0, 1.0) * 360.0;
}

RgbImage random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  RgbImage img(w, h);
  for (auto& p : img.pixels()) {
    p = {static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
         static_cast<std::uint8_t>(rng.below(256))};
  }
  return img;
}

CoverMask random_mask(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  CoverMask m("m", w, h);
  for (auto& b : m.bits.pixels()) b = rng.below(3) != 0;
  return m;
}

}  // namespace

TEST(Hsv, MatchesReferenceHexcone) {
  Rng rng(11);
  for (int i = 0; i < 20000; ++i) {
    const Rgb p{static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                static_cast<std::uint8_t>(rng.below(256))};
    double h, s, v;
    reference_hsv(p, h, s, v);
    const auto got = rgb_to_hsv(p);
    EXPECT_NEAR(got.s, s, 1e-12);
    EXPECT_NEAR(got.v, v, 1e-12);
    if (got.hue_defined) {
      const double d = std::abs(got.h - h);
      EXPECT_LT(std::min(d, 360.0 - d), 1e-9);
    }
    EXPECT_GE(got.h, 0.0);
    EXPECT_LT(got.h, 360.0);
  }
}

TEST(Hsv, RoundTripIsExact) {
  Rng rng(5);
  for (int i = 0; i < 100000; ++i) {
    const Rgb p{static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                static_cast<std::uint8_t>(rng.below(256))};
    ASSERT_EQ(hsv_to_rgb(rgb_to_hsv(p)), p);
  }
}

TEST(Hsv, PrimariesAndSecondaries) {
  EXPECT_EQ(rgb_to_hsv({255, 0, 0}).h, 0.0);
  EXPECT_EQ(rgb_to_hsv({255, 255, 0}).h, 60.0);
  EXPECT_EQ(rgb_to_hsv({0, 255, 0}).h, 120.0);
  EXPECT_EQ(rgb_to_hsv({0, 255, 255}).h, 180.0);
  EXPECT_EQ(rgb_to_hsv({0, 0, 255}).h, 240.0);
  EXPECT_EQ(rgb_to_hsv({255, 0, 255}).h, 300.0);
}

TEST(Hsv, GreysHaveNoHue) {
  for (int g : {0, 1, 128, 255}) {
    const auto p = rgb_to_hsv({static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(g),
                               static_cast<std::uint8_t>(g)});
    EXPECT_FALSE(p.hue_defined);
    EXPECT_EQ(p.s, 0.0);
    EXPECT_FALSE(is_chromatic(p, 0.0));
  }
}

TEST(HueRangeSet, ParsesAndSorts) {
  const auto r = HueRangeSet::parse("210-235, 25-55");
  ASSERT_EQ(r.intervals().size(), 2u);
  EXPECT_EQ(r.intervals()[0].lo, 25);
  EXPECT_EQ(r.to_string(), "25-55,210-235");
  EXPECT_EQ(r.total_width(), 31 + 26);
  EXPECT_TRUE(r.contains(55.9));
  EXPECT_FALSE(r.contains(56.0));
  EXPECT_TRUE(r.contains(25.0));
  EXPECT_FALSE(r.contains(24.99));
}

TEST(HueRangeSet, RejectsBadInput) {
  EXPECT_THROW(HueRangeSet::parse("50-60,55-70"), Error);
  EXPECT_THROW(HueRangeSet::parse("60-50"), Error);
  EXPECT_THROW(HueRangeSet::parse("0-360"), Error);
  EXPECT_THROW(HueRangeSet::parse("a-b"), Error);
  EXPECT_THROW(HueRangeSet::parse("10-20,"), Error);
}

TEST(HueRangeSet, JsonRoundTrip) {
  const auto r = HueRangeSet::parse("25-55,210-235");
  EXPECT_EQ(ranges_from_json(ranges_to_json(r)), r);
}

TEST(Spectrum, EqualsPerPixelEnumeration) {
  const auto scene = generate_scene(field_preset(3, 160, 120));
  const auto mask = random_mask(160, 120, 4);
  for (double sat_min : {0.0, 0.05, 0.3}) {
    const auto s = compute_hue_spectrum(scene.image, mask, sat_min);
    std::array<std::size_t, 360> counts{};
    std::size_t n = 0;
    for (int y = 0; y < 120; ++y) {
      for (int x = 0; x < 160; ++x) {
        if (!mask.test(x, y)) continue;
        double h, sat, v;
        const auto p = scene.image.at(x, y);
        reference_hsv(p, h, sat, v);
        if (p.r == p.g && p.g == p.b) continue;
        if (sat < sat_min) continue;
        ++counts[static_cast<std::size_t>(std::floor(h + 1e-9)) % 360];
        ++n;
      }
    }
    ASSERT_EQ(s.pixel_count, n);
    double total = 0.0;
    for (int b = 0; b < 360; ++b) {
      EXPECT_NEAR(s.bins[b], static_cast<double>(counts[b]) / n, 1e-12) << "bin " << b;
      total += s.bins[b];
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Spectrum, PureHueLandsInOneBin) {
  RgbImage img(4, 4, Rgb{0, 255, 0});
  CoverMask all("m", 4, 4);
  for (auto& b : all.bits.pixels()) b = 1;
  const auto s = compute_hue_spectrum(img, all);
  EXPECT_EQ(s.bins[120], 1.0);
}

TEST(Spectrum, ShapeMismatchThrows) {
  EXPECT_THROW(compute_hue_spectrum(RgbImage(4, 4), CoverMask("m", 5, 4)), Error);
  EXPECT_THROW(compute_hue_spectrum(RgbImage(4, 4), CoverMask("m", 4, 4), 1.5), Error);
}

TEST(Spectrum, CsvRoundTrip) {
  const auto img = random_image(30, 30, 9);
  const auto s = compute_hue_spectrum(img, random_mask(30, 30, 10));
  const auto csv = spectrum_to_csv(s);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 361);
  const auto back = spectrum_from_csv(csv);
  for (int b = 0; b < 360; ++b) EXPECT_EQ(back.bins[b], s.bins[b]);
  EXPECT_THROW(spectrum_from_csv("bin,fraction\n0,1\n"), Error);
}

namespace {

// Exhaustive search over interval sets whose endpoints sit on occupied bins.
int brute_min_width(const HueSpectrum& s, double target, int max_intervals) {
  std::vector<int> occ;
  for (int b = 0; b < 360; ++b) {
    if (s.bins[b] > 0) occ.push_back(b);
  }
  struct Iv {
    int lo, hi;
    double mass;
  };
  std::vector<Iv> ivs;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    for (std::size_t j = i; j < occ.size(); ++j) ivs.push_back({occ[i], occ[j], s.mass(occ[i], occ[j])});
  }
  int best = 1000;
  for (const auto& a : ivs) {
    if (a.mass >= target - 1e-9) best = std::min(best, a.hi - a.lo + 1);
    if (max_intervals < 2) continue;
    for (const auto& b : ivs) {
      if (b.lo <= a.hi) continue;
      if (a.mass + b.mass >= target - 1e-9) best = std::min(best, a.hi - a.lo + 1 + b.hi - b.lo + 1);
    }
  }
  return best;
}

}  // namespace

TEST(DeriveHueRanges, MatchesExhaustiveSearch) {
  Rng rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    HueSpectrum s;
    const int k = 3 + static_cast<int>(rng.below(8));
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
      const auto b = rng.below(360);
      const double w = 1.0 + static_cast<double>(rng.below(20));
      s.bins[b] += w;
      total += w;
    }
    for (auto& v : s.bins) v /= total;
    s.pixel_count = 100;
    for (int m : {1, 2}) {
      for (double mass : {0.5, 0.8, 0.95, 1.0}) {
        const auto r = derive_hue_ranges(s, mass, m);
        EXPECT_LE(static_cast<int>(r.intervals().size()), m);
        EXPECT_GE(r.mass(s), mass - 1e-9);
        EXPECT_EQ(r.total_width(), brute_min_width(s, mass, m)) << "trial " << trial << " m " << m;
      }
    }
  }
}

TEST(DeriveHueRanges, BimodalSoilNeedsTwoIntervals) {
  HueSpectrum s;
  for (int b = 25; b <= 55; ++b) s.bins[b] = 0.7 / 31;
  for (int b = 210; b <= 235; ++b) s.bins[b] = 0.3 / 26;
  s.pixel_count = 1000;
  const auto two = derive_hue_ranges(s, 0.999, 2);
  EXPECT_EQ(two.to_string(), "25-55,210-235");
  const auto one = derive_hue_ranges(s, 0.999, 1);
  EXPECT_EQ(one.intervals().size(), 1u);
  EXPECT_GT(one.total_width(), two.total_width());
}

TEST(DeriveHueRanges, MoreIntervalsNeverWider) {
  const auto img = random_image(64, 64, 2);
  CoverMask all("m", 64, 64);
  for (auto& b : all.bits.pixels()) b = 1;
  const auto s = compute_hue_spectrum(img, all);
  int prev = 1000;
  for (int m = 1; m <= 4; ++m) {
    const auto w = derive_hue_ranges(s, 0.6, m).total_width();
    EXPECT_LE(w, prev);
    prev = w;
  }
}

TEST(DeriveHueRanges, RejectsEmptySpectrum) {
  EXPECT_THROW(derive_hue_ranges(HueSpectrum{}, 0.9, 2), Error);
  HueSpectrum s;
  s.bins[10] = 1.0;
  s.pixel_count = 1;
  EXPECT_THROW(derive_hue_ranges(s, 0.0, 2), Error);
  EXPECT_THROW(derive_hue_ranges(s, 0.5, 0), Error);
}

TEST(RefineMask, EqualsPerPixelOracle) {
  const auto img = random_image(50, 40, 31);
  const auto mask = random_mask(50, 40, 32);
  const auto ranges = HueRangeSet::parse("25-55,210-235");
  for (bool soil : {false, true}) {
    const auto out = refine_mask(mask, img, ranges, 0.1, soil);
    EXPECT_EQ(out.class_name, mask.class_name);
    for (int y = 0; y < 40; ++y) {
      for (int x = 0; x < 50; ++x) {
        double h, s, v;
        const auto p = img.at(x, y);
        reference_hsv(p, h, s, v);
        const bool chroma = !(p.r == p.g && p.g == p.b) && s >= 0.1;
        const int bin = static_cast<int>(std::floor(h + 1e-9)) % 360;
        const bool in = (bin >= 25 && bin <= 55) || (bin >= 210 && bin <= 235);
        const bool expect = mask.test(x, y) && (chroma ? in : soil);
        ASSERT_EQ(out.test(x, y), expect) << x << "," << y;
      }
    }
  }
}

TEST(RefineMask, NeverGrowsAndRejectsEmptyRanges) {
  const auto img = random_image(20, 20, 1);
  const auto mask = random_mask(20, 20, 2);
  const auto out = refine_mask(mask, img, HueRangeSet::parse("0-359"));
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) EXPECT_LE(out.test(x, y), mask.test(x, y));
  }
  EXPECT_THROW(refine_mask(mask, img, HueRangeSet{}), Error);
}

TEST(ImageIo, PngRoundTrip) {
  const auto img = random_image(37, 23, 8);
  EXPECT_EQ(decode_image(encode_png(img)), img);
  const auto mask = random_mask(37, 23, 9);
  const auto back = decode_mask(encode_mask(mask), "m");
  EXPECT_EQ(back, mask);
}

TEST(ImageIo, RejectsGarbage) {
  EXPECT_THROW(decode_image(Bytes{1, 2, 3, 4}), Error);
  Bytes truncated = encode_png(random_image(8, 8, 1));
  truncated.resize(truncated.size() / 2);
  EXPECT_THROW(decode_image(truncated), Error);
  EXPECT_THROW(read_image("/nonexistent/file.png"), Error);
}

TEST(ImageIo, DownscaleBoundsLongestSide) {
  const auto img = random_image(100, 40, 3);
  const auto small = downscale(img, 25);
  EXPECT_LE(std::max(small.width(), small.height()), 25);
  EXPECT_EQ(downscale(img, 200), img);
}
