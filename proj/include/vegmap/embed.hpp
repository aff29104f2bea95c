#pragma once

// Handcrafted baseline tile embedder (67 features).
//
// Layout:
//   [0..35]  hue histogram, 36 bins of 10 degrees over chromatic pixels
//            (hue defined and s >= 0.05)
//   [36..43] saturation histogram, 8 bins over all pixels
//   [44..51] value histogram, 8 bins over all pixels
//   [52..57] hue circular mean / 360, hue circular variance (1 - R),
//            saturation mean, saturation std, value mean, value std
//   [58..61] GLCM contrast, correlation, energy, homogeneity at offset (1,0)
//   [62..65] the same at offset (0,1); value channel quantized to 16 levels,
//            symmetric co-occurrence counts
//   [66]     edge density: fraction of pixels whose value-gradient magnitude
//            (central differences, replicated border) exceeds 0.1
// Histograms sum to 1, or are all zero when no pixel qualifies.

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "vegmap/feature_matrix.hpp"
#include "vegmap/hsv.hpp"
#include "vegmap/hue.hpp"
#include "vegmap/tiling.hpp"

namespace vegmap {

inline constexpr std::size_t kBaselineDim = 67;
inline constexpr const char* kBaselineLayout = "baseline67/v1";
inline constexpr int kGlcmLevels = 16;
inline constexpr int kMinTileSide = 16;

struct GlcmFeatures {
  double contrast = 0.0;
  double correlation = 0.0;
  double energy = 0.0;
  double homogeneity = 0.0;
};

/// Normalized symmetric co-occurrence matrix of `levels` (row-major raster of
/// level indices) at offset (dx, dy).
inline std::vector<double> glcm_matrix(const Raster<std::uint8_t>& levels, int n_levels, int dx,
                                       int dy) {
  std::vector<double> p(static_cast<std::size_t>(n_levels * n_levels), 0.0);
  double total = 0.0;
  for (int y = 0; y < levels.height(); ++y) {
    const int y2 = y + dy;
    if (y2 < 0 || y2 >= levels.height()) continue;
    for (int x = 0; x < levels.width(); ++x) {
      const int x2 = x + dx;
      if (x2 < 0 || x2 >= levels.width()) continue;
      const int a = levels.at(x, y), b = levels.at(x2, y2);
      p[static_cast<std::size_t>(a * n_levels + b)] += 1.0;
      p[static_cast<std::size_t>(b * n_levels + a)] += 1.0;
      total += 2.0;
    }
  }
  if (total > 0.0) {
    for (auto& v : p) v /= total;
  }
  return p;
}

inline GlcmFeatures glcm_features(const std::vector<double>& p, int n) {
  GlcmFeatures f;
  double mu_i = 0.0, mu_j = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = p[static_cast<std::size_t>(i * n + j)];
      mu_i += i * v;
      mu_j += j * v;
    }
  }
  double var_i = 0.0, var_j = 0.0, cov = 0.0, asm_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = p[static_cast<std::size_t>(i * n + j)];
      const double d = i - j;
      f.contrast += d * d * v;
      f.homogeneity += v / (1.0 + d * d);
      asm_sum += v * v;
      var_i += (i - mu_i) * (i - mu_i) * v;
      var_j += (j - mu_j) * (j - mu_j) * v;
      cov += (i - mu_i) * (j - mu_j) * v;
    }
  }
  f.energy = std::sqrt(asm_sum);
  const double denom = std::sqrt(var_i * var_j);
  // Zero-variance tiles make correlation 0/0; defined as 0.
  f.correlation = denom > 1e-15 ? cov / denom : 0.0;
  return f;
}

inline int quantize_value(double v, int levels) {
  return std::min(levels - 1, static_cast<int>(v * levels));
}

inline FeatureVector embed_baseline(const RgbImage& tile) {
  require(tile.width() == tile.height(), ErrorCode::invalid_argument, "tile must be square",
          fmt::format("{}x{}", tile.width(), tile.height()));
  require(tile.width() >= kMinTileSide, ErrorCode::invalid_argument,
          "tile side must be at least 16 px", fmt::format("{}", tile.width()));

  std::array<double, kBaselineDim> f{};
  const int w = tile.width(), h = tile.height();
  const double n = static_cast<double>(w) * h;

  Raster<double> value(w, h, 0.0);
  Raster<std::uint8_t> levels(w, h, 0);
  std::size_t chromatic = 0;
  double sin_sum = 0.0, cos_sum = 0.0;
  double s_sum = 0.0, s_sq = 0.0, v_sum = 0.0, v_sq = 0.0;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto hsv = rgb_to_hsv(tile.at(x, y));
      if (is_chromatic(hsv, kDefaultSatMin)) {
        f[static_cast<std::size_t>(std::min(35, static_cast<int>(hsv.h / 10.0)))] += 1.0;
        const double rad = hsv.h * std::numbers::pi / 180.0;
        sin_sum += std::sin(rad);
        cos_sum += std::cos(rad);
        ++chromatic;
      }
      f[36 + static_cast<std::size_t>(std::min(7, static_cast<int>(hsv.s * 8.0)))] += 1.0;
      f[44 + static_cast<std::size_t>(std::min(7, static_cast<int>(hsv.v * 8.0)))] += 1.0;
      s_sum += hsv.s;
      s_sq += hsv.s * hsv.s;
      v_sum += hsv.v;
      v_sq += hsv.v * hsv.v;
      value.at(x, y) = hsv.v;
      levels.at(x, y) = static_cast<std::uint8_t>(quantize_value(hsv.v, kGlcmLevels));
    }
  }

  if (chromatic > 0) {
    for (std::size_t b = 0; b < 36; ++b) f[b] /= static_cast<double>(chromatic);
    const double c = static_cast<double>(chromatic);
    double mean_angle = std::atan2(sin_sum / c, cos_sum / c) * 180.0 / std::numbers::pi;
    if (mean_angle < 0.0) mean_angle += 360.0;
    const double resultant = std::hypot(sin_sum / c, cos_sum / c);
    f[52] = mean_angle / 360.0;
    f[53] = std::clamp(1.0 - resultant, 0.0, 1.0);
  }
  for (std::size_t b = 36; b < 52; ++b) f[b] /= n;
  const double s_mean = s_sum / n, v_mean = v_sum / n;
  f[54] = s_mean;
  f[55] = std::sqrt(std::max(0.0, s_sq / n - s_mean * s_mean));
  f[56] = v_mean;
  f[57] = std::sqrt(std::max(0.0, v_sq / n - v_mean * v_mean));

  const auto g0 = glcm_features(glcm_matrix(levels, kGlcmLevels, 1, 0), kGlcmLevels);
  const auto g1 = glcm_features(glcm_matrix(levels, kGlcmLevels, 0, 1), kGlcmLevels);
  f[58] = g0.contrast;
  f[59] = g0.correlation;
  f[60] = g0.energy;
  f[61] = g0.homogeneity;
  f[62] = g1.contrast;
  f[63] = g1.correlation;
  f[64] = g1.energy;
  f[65] = g1.homogeneity;

  std::size_t edges = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (value.at(std::min(x + 1, w - 1), y) - value.at(std::max(x - 1, 0), y)) / 2;
      const double gy = (value.at(x, std::min(y + 1, h - 1)) - value.at(x, std::max(y - 1, 0))) / 2;
      if (std::hypot(gx, gy) > 0.1) ++edges;
    }
  }
  f[66] = static_cast<double>(edges) / n;
  return {std::vector<double>(f.begin(), f.end()), kBaselineLayout};
}

/// Embeds every tile of `tiles` cut from `img`, in order.
inline FeatureMatrix embed_tiles(const RgbImage& img, std::span<const TileSpec> tiles) {
  FeatureMatrix out(kBaselineLayout, kBaselineDim);
  for (const auto& t : tiles) {
    out.add_row(t, embed_baseline(crop_tile(img, t)).values);
  }
  return out;
}

}  // namespace vegmap
