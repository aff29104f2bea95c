#pragma once

#include <algorithm>
#include <cmath>

#include "vegmap/image.hpp"

namespace vegmap {

struct HsvPixel {
  double h = 0.0;  ///< degrees in [0, 360); 0 when hue is undefined
  double s = 0.0;  ///< [0, 1]
  double v = 0.0;  ///< [0, 1]
  bool hue_defined = false;
};

/// Hexcone RGB -> HSV. Achromatic pixels (max == min) carry h = 0 and
/// hue_defined = false.
inline HsvPixel rgb_to_hsv(Rgb p) noexcept {
  const int r = p.r, g = p.g, b = p.b;
  const int max = std::max({r, g, b});
  const int min = std::min({r, g, b});
  const int delta = max - min;

  HsvPixel out;
  out.v = max / 255.0;
  out.s = max == 0 ? 0.0 : static_cast<double>(delta) / max;
  if (delta == 0) return out;

  out.hue_defined = true;
  // One division of exact integers: whole-degree hues come out exact.
  int num;
  if (max == r) {
    num = 60 * (g - b);
    if (num < 0) num += 360 * delta;
  } else if (max == g) {
    num = 60 * (b - r) + 120 * delta;
  } else {
    num = 60 * (r - g) + 240 * delta;
  }
  double h = static_cast<double>(num) / delta;
  if (h >= 360.0) h -= 360.0;
  out.h = h;
  return out;
}

struct RgbF {
  double r, g, b;  ///< 0..255, unrounded
};

inline RgbF hsv_to_rgb_exact(double h, double s, double v) noexcept {
  const double c = v * s;
  const double hp = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0) / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  return {(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0};
}

inline std::uint8_t to_byte(double value) noexcept {
  return static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
}

inline Rgb hsv_to_rgb(double h, double s, double v) noexcept {
  const auto f = hsv_to_rgb_exact(h, s, v);
  return {to_byte(f.r), to_byte(f.g), to_byte(f.b)};
}

inline Rgb hsv_to_rgb(const HsvPixel& p) noexcept { return hsv_to_rgb(p.h, p.s, p.v); }

/// Hue that survives the saturation gate used by spectra and mask refinement.
inline bool is_chromatic(const HsvPixel& p, double sat_min) noexcept {
  return p.hue_defined && p.s >= sat_min;
}

}  // namespace vegmap
