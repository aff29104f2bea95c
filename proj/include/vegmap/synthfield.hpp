#pragma once

// Seeded synthetic field scenes with pixel-level ground truth: a soil
// background with shadow clumps and disk-union vegetation patches, each class
// drawn from its own HSV distribution.

#include <algorithm>
#include <cmath>
#include <array>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "vegmap/error.hpp"
#include "vegmap/hsv.hpp"
#include "vegmap/hue.hpp"
#include "vegmap/image.hpp"
#include "vegmap/image_io.hpp"
#include "vegmap/rng.hpp"
#include "vegmap/tiling.hpp"

namespace vegmap {

struct ClassSpec {
  std::string name;
  HueRangeSet hues;
  std::vector<double> weights;  ///< one per hue interval; empty = proportional to width
  double sat_mean = 0.5;
  double sat_spread = 0.05;
  double val_mean = 0.5;
  double val_spread = 0.05;
  double speckle = 0.0;  ///< relative value jitter amplitude
  int patch_count = 0;
  double radius_mean = 40.0;
  double radius_spread = 10.0;
  std::optional<double> area_fraction;  ///< target share of the image; overrides radius_mean
};

struct SceneSpec {
  int width = 512;
  int height = 512;
  std::vector<ClassSpec> classes;
  std::size_t background = 0;  ///< soil class index
  double shadow_fraction = 0.0;  ///< share of soil pixels under shadow
  double shadow_radius = 10.0;
  double noise_sigma = 0.0;  ///< 8-bit units
  int blur_radius = 0;
  std::uint64_t seed = 0;

  std::vector<std::string> class_names() const {
    std::vector<std::string> out;
    for (const auto& c : classes) out.push_back(c.name);
    return out;
  }
};

struct GroundTruth {
  int width = 0;
  int height = 0;
  std::vector<std::string> class_list;
  Raster<std::uint8_t> labels;

  CoverMask mask_of(std::size_t k) const {
    CoverMask m{class_list.at(k), Raster<std::uint8_t>(width, height, 0)};
    const auto& src = labels.pixels();
    auto dst = m.bits.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] == k ? 1 : 0;
    return m;
  }

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct Scene {
  RgbImage image;
  GroundTruth truth;
};

inline void validate_scene_spec(const SceneSpec& s) {
  require(s.width > 0 && s.height > 0, ErrorCode::invalid_argument, "scene dimensions must be positive");
  require(!s.classes.empty() && s.classes.size() <= 255, ErrorCode::invalid_argument,
          "scene needs between 1 and 255 classes");
  require(s.background < s.classes.size(), ErrorCode::invalid_argument,
          "background index outside class list");
  require(s.shadow_fraction >= 0.0 && s.shadow_fraction <= 1.0, ErrorCode::invalid_argument,
          "shadow_fraction must lie in [0, 1]");
  require(s.noise_sigma >= 0.0 && s.blur_radius >= 0, ErrorCode::invalid_argument,
          "noise and blur must be non-negative");
  const double half = std::min(s.width, s.height) / 2.0;
  for (std::size_t i = 0; i < s.classes.size(); ++i) {
    const auto& c = s.classes[i];
    for (std::size_t j = 0; j < i; ++j) {
      require(s.classes[j].name != c.name, ErrorCode::invalid_argument, "duplicate class name", c.name);
    }
    require(!c.hues.empty(), ErrorCode::invalid_argument, "class needs at least one hue interval",
            c.name);
    require(c.weights.empty() || c.weights.size() == c.hues.intervals().size(),
            ErrorCode::invalid_argument, "one weight per hue interval is required", c.name);
    for (double w : c.weights) {
      require(w >= 0.0, ErrorCode::invalid_argument, "hue weights must be non-negative", c.name);
    }
    require(c.sat_mean > 0.0 && c.sat_mean <= 1.0 && c.val_mean > 0.0 && c.val_mean <= 1.0,
            ErrorCode::invalid_argument, "saturation/value means must lie in (0, 1]", c.name);
    require(c.patch_count >= 0, ErrorCode::invalid_argument, "patch_count must be non-negative", c.name);
    if (i != s.background && c.patch_count > 0) {
      require(c.radius_mean > 0.0 && c.radius_mean < half, ErrorCode::invalid_argument,
              "patches larger than image", fmt::format("{} radius {}", c.name, c.radius_mean));
    }
    if (c.area_fraction) {
      require(*c.area_fraction >= 0.0 && *c.area_fraction < 1.0, ErrorCode::invalid_argument,
              "area_fraction must lie in [0, 1)", c.name);
    }
  }
}

namespace detail {

/// Paints a disk onto pixels currently labelled `from`; returns pixels changed.
/// Stops once `budget` pixels have been painted.
inline std::size_t paint_disk(Raster<std::uint8_t>& labels, double cx, double cy, double r,
                              std::uint8_t from, std::uint8_t to, std::size_t budget) {
  std::size_t painted = 0;
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
  const int y1 = std::min(labels.height() - 1, static_cast<int>(std::ceil(cy + r)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
  const int x1 = std::min(labels.width() - 1, static_cast<int>(std::ceil(cx + r)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (painted >= budget) return painted;
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy > r * r) continue;
      auto& l = labels.at(x, y);
      if (l != from) continue;
      l = to;
      ++painted;
    }
  }
  return painted;
}

/// A patch: one main disk plus a few overlapping satellites for ragged edges.
inline std::size_t paint_patch(Raster<std::uint8_t>& labels, Rng& rng, double r, std::uint8_t from,
                               std::uint8_t to, std::size_t budget) {
  const double cx = rng.uniform(0.0, labels.width());
  const double cy = rng.uniform(0.0, labels.height());
  std::size_t painted = paint_disk(labels, cx, cy, r, from, to, budget);
  for (int s = 0; s < 4 && painted < budget; ++s) {
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double dist = rng.uniform(0.3, 0.9) * r;
    const double sr = rng.uniform(0.3, 0.6) * r;
    painted += paint_disk(labels, cx + dist * std::cos(angle), cy + dist * std::sin(angle), sr, from,
                          to, budget - painted);
  }
  return painted;
}

inline std::size_t pick_interval(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

/// Draws a pixel whose quantized hue falls inside interval `iv`.
inline Rgb sample_pixel(Rng& rng, const ClassSpec& c, const HueInterval& iv, double value_scale) {
  Rgb px{};
  for (int attempt = 0; attempt < 32; ++attempt) {
    const double h = rng.uniform(iv.lo, iv.hi + 1.0);
    const double s = std::clamp(rng.normal(c.sat_mean, c.sat_spread), 0.15, 1.0);
    const double jitter = 1.0 + c.speckle * rng.uniform(-1.0, 1.0);
    const double v = std::clamp(rng.normal(c.val_mean, c.val_spread) * jitter * value_scale, 0.15, 1.0);
    px = hsv_to_rgb(std::fmod(h, 360.0), s, v);
    const auto back = rgb_to_hsv(px);
    if (is_chromatic(back, kDefaultSatMin) && iv.contains(back.h)) return px;
  }
  return hsv_to_rgb((iv.lo + iv.hi + 1) / 2.0, c.sat_mean, c.val_mean * value_scale);
}

inline RgbImage box_blur(const RgbImage& img, int r) {
  if (r <= 0) return img;
  const int w = img.width(), h = img.height();
  auto pass = [&](const Raster<std::array<double, 3>>& src, bool horizontal) {
    Raster<std::array<double, 3>> dst(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        std::array<double, 3> acc{};
        int n = 0;
        for (int d = -r; d <= r; ++d) {
          const int xx = horizontal ? x + d : x, yy = horizontal ? y : y + d;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          for (int ch = 0; ch < 3; ++ch) acc[ch] += src.at(xx, yy)[ch];
          ++n;
        }
        for (int ch = 0; ch < 3; ++ch) dst.at(x, y)[ch] = acc[ch] / n;
      }
    }
    return dst;
  };
  Raster<std::array<double, 3>> f(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto p = img.at(x, y);
      f.at(x, y) = {double(p.r), double(p.g), double(p.b)};
    }
  }
  const auto out = pass(pass(f, true), false);
  RgbImage res(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto& v = out.at(x, y);
      res.at(x, y) = {to_byte(v[0] / 255.0), to_byte(v[1] / 255.0), to_byte(v[2] / 255.0)};
    }
  }
  return res;
}

}  // namespace detail

inline Scene generate_scene(const SceneSpec& spec) {
  validate_scene_spec(spec);
  const int w = spec.width, h = spec.height;
  const auto bg = static_cast<std::uint8_t>(spec.background);
  const std::size_t total = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);

  GroundTruth gt{w, h, spec.class_names(), Raster<std::uint8_t>(w, h, bg)};
  Rng geometry(Rng::derive(spec.seed, 1));
  for (std::size_t k = 0; k < spec.classes.size(); ++k) {
    const auto& c = spec.classes[k];
    if (k == spec.background || c.patch_count == 0) continue;
    const auto label = static_cast<std::uint8_t>(k);
    if (c.area_fraction) {
      const auto target = static_cast<std::size_t>(std::llround(*c.area_fraction * static_cast<double>(total)));
      const double r = std::sqrt(static_cast<double>(target) / c.patch_count / std::numbers::pi);
      require(r < std::min(w, h) / 2.0, ErrorCode::invalid_argument, "patches larger than image",
              c.name);
      std::size_t painted = 0;
      for (int attempt = 0; painted < target; ++attempt) {
        require(attempt < 100 * c.patch_count + 1000, ErrorCode::invalid_argument,
                "area fraction unreachable: background exhausted", c.name);
        const double pr = r * std::max(0.3, 1.0 + geometry.normal(0.0, 0.15));
        painted += detail::paint_disk(gt.labels, geometry.uniform(0.0, w), geometry.uniform(0.0, h),
                                      pr, bg, label, target - painted);
      }
    } else {
      for (int p = 0; p < c.patch_count; ++p) {
        const double r = std::max(1.0, geometry.normal(c.radius_mean, c.radius_spread));
        detail::paint_patch(gt.labels, geometry, r, bg, label, total);
      }
    }
  }

  // Shadow clumps over soil, tracked separately so labels stay soil.
  Raster<std::uint8_t> shadow(w, h, 0);
  if (spec.shadow_fraction > 0.0) {
    std::size_t soil = 0;
    for (auto l : gt.labels.pixels()) soil += l == bg;
    Raster<std::uint8_t> marks = gt.labels;
    const auto target = static_cast<std::size_t>(std::llround(spec.shadow_fraction * static_cast<double>(soil)));
    std::size_t painted = 0;
    const auto shadow_label = static_cast<std::uint8_t>(255);
    for (std::size_t attempt = 0; painted < target && attempt < 100 * total; ++attempt) {
      const double r = std::max(1.0, geometry.normal(spec.shadow_radius, spec.shadow_radius / 4));
      painted += detail::paint_disk(marks, geometry.uniform(0.0, w), geometry.uniform(0.0, h), r, bg,
                                    shadow_label, target - painted);
    }
    for (std::size_t i = 0; i < total; ++i) shadow.pixels()[i] = marks.pixels()[i] == shadow_label;
  }

  // Per-class interval weights; soil's last interval is reserved for shadow.
  std::vector<std::vector<double>> weights;
  for (std::size_t k = 0; k < spec.classes.size(); ++k) {
    const auto& c = spec.classes[k];
    std::vector<double> wts = c.weights;
    if (wts.empty()) {
      for (const auto& iv : c.hues.intervals()) wts.push_back(iv.width());
    }
    if (k == spec.background && wts.size() > 1) wts.back() = 0.0;
    weights.push_back(std::move(wts));
  }

  RgbImage img(w, h);
  Rng colour(Rng::derive(spec.seed, 2));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto k = gt.labels.at(x, y);
      const auto& c = spec.classes[k];
      const auto& ivs = c.hues.intervals();
      if (shadow.at(x, y)) {
        img.at(x, y) = detail::sample_pixel(colour, c, ivs.back(), 0.6);
      } else {
        img.at(x, y) = detail::sample_pixel(colour, c, ivs[detail::pick_interval(colour, weights[k])], 1.0);
      }
    }
  }

  if (spec.noise_sigma > 0.0) {
    Rng noise(Rng::derive(spec.seed, 3));
    for (auto& p : img.pixels()) {
      auto add = [&](std::uint8_t v) {
        return static_cast<std::uint8_t>(std::clamp(std::lround(v + noise.normal(0.0, spec.noise_sigma)), 0L, 255L));
      };
      p = {add(p.r), add(p.g), add(p.b)};
    }
  }
  img = detail::box_blur(img, spec.blur_radius);
  return {std::move(img), std::move(gt)};
}

/// Modal ground-truth label inside the tile; ties go to the earlier class.
inline std::size_t majority_label(const GroundTruth& gt, const TileSpec& tile) {
  require_tile_in_bounds(tile, gt.width, gt.height);
  std::vector<std::size_t> hist(gt.class_list.size(), 0);
  for (int y = tile.y; y < tile.y + tile.size; ++y) {
    for (int x = tile.x; x < tile.x + tile.size; ++x) ++hist[gt.labels.at(x, y)];
  }
  return static_cast<std::size_t>(std::max_element(hist.begin(), hist.end()) - hist.begin());
}

/// A four-class field: two crops sharing a green hue band, a broader-hued
/// weed, and bimodal soil whose blue mode comes from shadow.
inline SceneSpec field_preset(std::uint64_t seed, int width = 2048, int height = 1536) {
  SceneSpec s;
  s.width = width;
  s.height = height;
  s.seed = seed;
  s.background = 3;
  s.shadow_fraction = 0.15;
  s.shadow_radius = 14.0;
  s.noise_sigma = 1.5;
  auto plant = [](std::string name, std::string hues, double sm, double vm, double speckle,
                  double area) {
    ClassSpec c;
    c.name = std::move(name);
    c.hues = HueRangeSet::parse(hues);
    c.sat_mean = sm;
    c.sat_spread = 0.05;
    c.val_mean = vm;
    c.val_spread = 0.05;
    c.speckle = speckle;
    c.patch_count = 2;
    c.area_fraction = area;
    return c;
  };
  s.classes.push_back(plant("bv", "65-115", 0.65, 0.45, 0.10, 0.16));
  s.classes.push_back(plant("ca", "65-115", 0.30, 0.70, 0.25, 0.14));
  s.classes.push_back(plant("sa", "65-155", 0.50, 0.60, 0.15, 0.14));
  ClassSpec soil = plant("soil", "32-48,215-230", 0.40, 0.50, 0.05, 0.0);
  soil.patch_count = 0;
  soil.area_fraction.reset();
  soil.weights = {1.0, 0.0};
  s.classes.push_back(soil);
  return s;
}

/// Hue ranges an expert would adopt for the preset's classes.
inline std::vector<HueRangeSet> field_preset_ranges() {
  return {HueRangeSet::parse("55-125"), HueRangeSet::parse("55-125"), HueRangeSet::parse("55-165"),
          HueRangeSet::parse("25-55,210-235")};
}

inline nlohmann::ordered_json scene_spec_to_json(const SceneSpec& s) {
  auto classes = nlohmann::ordered_json::array();
  for (const auto& c : s.classes) {
    nlohmann::ordered_json j{{"name", c.name},
                             {"hues", c.hues.to_string()},
                             {"weights", c.weights},
                             {"sat_mean", c.sat_mean},
                             {"sat_spread", c.sat_spread},
                             {"val_mean", c.val_mean},
                             {"val_spread", c.val_spread},
                             {"speckle", c.speckle},
                             {"patch_count", c.patch_count},
                             {"radius_mean", c.radius_mean},
                             {"radius_spread", c.radius_spread}};
    if (c.area_fraction) j["area_fraction"] = *c.area_fraction;
    classes.push_back(std::move(j));
  }
  return {{"width", s.width},
          {"height", s.height},
          {"seed", s.seed},
          {"background", s.background},
          {"shadow_fraction", s.shadow_fraction},
          {"shadow_radius", s.shadow_radius},
          {"noise_sigma", s.noise_sigma},
          {"blur_radius", s.blur_radius},
          {"classes", std::move(classes)}};
}

inline SceneSpec scene_spec_from_json(const nlohmann::json& j) {
  try {
    SceneSpec s;
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.seed = j.value("seed", std::uint64_t{0});
    s.background = j.value("background", std::size_t{0});
    s.shadow_fraction = j.value("shadow_fraction", 0.0);
    s.shadow_radius = j.value("shadow_radius", 10.0);
    s.noise_sigma = j.value("noise_sigma", 0.0);
    s.blur_radius = j.value("blur_radius", 0);
    for (const auto& cj : j.at("classes")) {
      ClassSpec c;
      c.name = cj.at("name").get<std::string>();
      c.hues = HueRangeSet::parse(cj.at("hues").get<std::string>());
      c.weights = cj.value("weights", std::vector<double>{});
      c.sat_mean = cj.value("sat_mean", c.sat_mean);
      c.sat_spread = cj.value("sat_spread", c.sat_spread);
      c.val_mean = cj.value("val_mean", c.val_mean);
      c.val_spread = cj.value("val_spread", c.val_spread);
      c.speckle = cj.value("speckle", c.speckle);
      c.patch_count = cj.value("patch_count", c.patch_count);
      c.radius_mean = cj.value("radius_mean", c.radius_mean);
      c.radius_spread = cj.value("radius_spread", c.radius_spread);
      if (cj.contains("area_fraction")) c.area_fraction = cj.at("area_fraction").get<double>();
      s.classes.push_back(std::move(c));
    }
    validate_scene_spec(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, "malformed scene spec", e.what());
  }
}

inline nlohmann::ordered_json truth_sidecar(const GroundTruth& gt, std::uint64_t seed) {
  return {{"width", gt.width}, {"height", gt.height}, {"class_list", gt.class_list}, {"seed", seed}};
}

inline GroundTruth read_truth(const std::filesystem::path& labels_png,
                              const std::filesystem::path& sidecar) {
  GroundTruth gt;
  gt.labels = decode_gray_png(read_file_bytes(labels_png));
  const auto j = nlohmann::json::parse(read_text_file(sidecar));
  gt.width = gt.labels.width();
  gt.height = gt.labels.height();
  gt.class_list = j.at("class_list").get<std::vector<std::string>>();
  for (auto l : gt.labels.pixels()) {
    require(l < gt.class_list.size(), ErrorCode::parse_error, "label outside class list",
            fmt::format("{}", l));
  }
  return gt;
}

}  // namespace vegmap
