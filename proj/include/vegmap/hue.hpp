#pragma once

// Hue spectra of masked regions, hue-interval sets, and hue-based mask refinement.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "vegmap/hsv.hpp"
#include "vegmap/image.hpp"

namespace vegmap {

inline constexpr double kDefaultSatMin = 0.05;
inline constexpr int kHueBins = 360;

/// 1-degree, left-closed hue histogram over qualifying pixels.
struct HueSpectrum {
  std::array<double, kHueBins> bins{};
  std::size_t pixel_count = 0;

  double mass(int lo, int hi) const {
    double m = 0.0;
    for (int i = lo; i <= hi; ++i) m += bins[static_cast<std::size_t>(i)];
    return m;
  }
};

inline int hue_bin(double h) noexcept {
  const int bin = static_cast<int>(std::floor(h));
  return std::clamp(bin, 0, kHueBins - 1);
}

struct HueInterval {
  int lo = 0;
  int hi = 0;

  int width() const noexcept { return hi - lo + 1; }
  bool contains(double h) const noexcept {
    const int bin = hue_bin(h);
    return bin >= lo && bin <= hi;
  }
  friend bool operator==(const HueInterval&, const HueInterval&) = default;
};

/// Sorted, pairwise-disjoint union of inclusive degree intervals within [0, 359].
class HueRangeSet {
 public:
  HueRangeSet() = default;
  explicit HueRangeSet(std::vector<HueInterval> intervals) : intervals_(std::move(intervals)) {
    for (const auto& iv : intervals_) {
      require(iv.lo >= 0 && iv.lo <= iv.hi && iv.hi <= 359, ErrorCode::invalid_argument,
              "hue interval must satisfy 0 <= lo <= hi <= 359",
              fmt::format("[{}, {}]", iv.lo, iv.hi));
    }
    std::sort(intervals_.begin(), intervals_.end(),
              [](const HueInterval& a, const HueInterval& b) { return a.lo < b.lo; });
    for (std::size_t i = 1; i < intervals_.size(); ++i) {
      require(intervals_[i].lo > intervals_[i - 1].hi, ErrorCode::invalid_argument,
              "hue intervals overlap",
              fmt::format("[{}, {}] and [{}, {}]", intervals_[i - 1].lo, intervals_[i - 1].hi,
                          intervals_[i].lo, intervals_[i].hi));
    }
  }

  const std::vector<HueInterval>& intervals() const noexcept { return intervals_; }
  bool empty() const noexcept { return intervals_.empty(); }

  bool contains(double h) const noexcept {
    return std::any_of(intervals_.begin(), intervals_.end(),
                       [h](const HueInterval& iv) { return iv.contains(h); });
  }

  int total_width() const noexcept {
    int w = 0;
    for (const auto& iv : intervals_) w += iv.width();
    return w;
  }

  double mass(const HueSpectrum& spectrum) const {
    double m = 0.0;
    for (const auto& iv : intervals_) m += spectrum.mass(iv.lo, iv.hi);
    return m;
  }

  /// Parses "55-125" or "25-55,210-235" (a single value "120" means [120,120]).
  static HueRangeSet parse(std::string_view text) {
    std::vector<HueInterval> out;
    std::size_t start = 0;
    while (start <= text.size()) {
      auto end = text.find(',', start);
      if (end == std::string_view::npos) end = text.size();
      std::string_view item = text.substr(start, end - start);
      while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
      while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
      require(!item.empty(), ErrorCode::parse_error, "empty hue interval", std::string(text));
      const auto dash = item.find('-');
      auto parse_int = [&](std::string_view s) {
        int value = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        require(ec == std::errc{} && ptr == s.data() + s.size(), ErrorCode::parse_error,
                "invalid hue value", std::string(s));
        return value;
      };
      if (dash == std::string_view::npos) {
        const int v = parse_int(item);
        out.push_back({v, v});
      } else {
        out.push_back({parse_int(item.substr(0, dash)), parse_int(item.substr(dash + 1))});
      }
      start = end + 1;
    }
    return HueRangeSet(std::move(out));
  }

  std::string to_string() const {
    std::string s;
    for (const auto& iv : intervals_) {
      if (!s.empty()) s += ',';
      s += fmt::format("{}-{}", iv.lo, iv.hi);
    }
    return s;
  }

  friend bool operator==(const HueRangeSet&, const HueRangeSet&) = default;

 private:
  std::vector<HueInterval> intervals_;
};

inline void validate_sat_min(double sat_min) {
  require(sat_min >= 0.0 && sat_min <= 1.0, ErrorCode::invalid_argument,
          "sat_min must lie in [0, 1]", fmt::format("{}", sat_min));
}

inline HueSpectrum compute_hue_spectrum(const RgbImage& img, const CoverMask& mask,
                                        double sat_min = kDefaultSatMin) {
  require_same_shape(img, mask);
  validate_sat_min(sat_min);
  std::array<std::size_t, kHueBins> counts{};
  HueSpectrum out;
  const auto px = img.pixels();
  const auto bits = mask.bits.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (!bits[i]) continue;
    const auto hsv = rgb_to_hsv(px[i]);
    if (!is_chromatic(hsv, sat_min)) continue;
    ++counts[static_cast<std::size_t>(hue_bin(hsv.h))];
    ++out.pixel_count;
  }
  if (out.pixel_count > 0) {
    const double n = static_cast<double>(out.pixel_count);
    for (std::size_t b = 0; b < kHueBins; ++b) out.bins[b] = static_cast<double>(counts[b]) / n;
  }
  return out;
}

/// Finds at most `max_intervals` disjoint intervals whose combined spectrum mass
/// reaches `mass`, with the smallest total width. Among equal widths the largest
/// covered mass wins. Exhaustive dynamic programme over bin boundaries.
inline HueRangeSet derive_hue_ranges(const HueSpectrum& spectrum, double mass, int max_intervals) {
  require(mass > 0.0 && mass <= 1.0, ErrorCode::invalid_argument, "mass must lie in (0, 1]");
  require(max_intervals >= 1 && max_intervals <= kHueBins, ErrorCode::invalid_argument,
          "max_intervals must lie in [1, 360]");
  require(spectrum.pixel_count > 0, ErrorCode::degenerate_data,
          "cannot derive hue ranges from an empty spectrum");

  int runs = 0;
  for (int i = 0; i < kHueBins; ++i) {
    if (spectrum.bins[i] > 0.0 && (i == 0 || spectrum.bins[i - 1] <= 0.0)) ++runs;
  }
  const int J = std::min(max_intervals, std::max(runs, 1));
  constexpr int W = kHueBins;
  constexpr double kNone = -1.0;
  constexpr double kTol = 1e-9;

  // value[i][j][w][open]: best mass after deciding bins [0, i).
  const std::size_t layer = static_cast<std::size_t>(J + 1) * (W + 1) * 2;
  std::vector<double> value(layer * (kHueBins + 1), kNone);
  auto at = [&](int i, int j, int w, int open) -> double& {
    return value[static_cast<std::size_t>(i) * layer +
                 (static_cast<std::size_t>(j) * (W + 1) + static_cast<std::size_t>(w)) * 2 +
                 static_cast<std::size_t>(open)];
  };
  at(0, 0, 0, 0) = 0.0;
  for (int i = 0; i < kHueBins; ++i) {
    const double m = spectrum.bins[static_cast<std::size_t>(i)];
    for (int j = 0; j <= J; ++j) {
      for (int w = 0; w <= i; ++w) {
        for (int open = 0; open < 2; ++open) {
          const double cur = at(i, j, w, open);
          if (cur < 0.0) continue;
          double& skip = at(i + 1, j, w, 0);
          skip = std::max(skip, cur);
          if (open) {
            double& ext = at(i + 1, j, w + 1, 1);
            ext = std::max(ext, cur + m);
          } else if (j < J) {
            double& start = at(i + 1, j + 1, w + 1, 1);
            start = std::max(start, cur + m);
          }
        }
      }
    }
  }

  int best_w = -1, best_j = 0, best_open = 0;
  double best_mass = kNone;
  for (int w = 1; w <= W && best_w < 0; ++w) {
    for (int j = 1; j <= J; ++j) {
      for (int open = 0; open < 2; ++open) {
        const double v = at(kHueBins, j, w, open);
        if (v >= mass - kTol && v > best_mass) {
          best_mass = v;
          best_w = w;
          best_j = j;
          best_open = open;
        }
      }
    }
  }
  require(best_w > 0, ErrorCode::degenerate_data, "no interval set reaches the requested mass");

  std::vector<HueInterval> intervals;
  int j = best_j, w = best_w, open = best_open;
  int hi = -1;
  for (int i = kHueBins; i > 0; --i) {
    const double cur = at(i, j, w, open);
    const double m = spectrum.bins[static_cast<std::size_t>(i - 1)];
    if (open) {
      if (hi < 0) hi = i - 1;
      if (w >= 1 && at(i - 1, j, w - 1, 1) >= 0.0 && at(i - 1, j, w - 1, 1) + m == cur) {
        w -= 1;
      } else {
        intervals.push_back({i - 1, hi});
        hi = -1;
        j -= 1;
        w -= 1;
        open = 0;
      }
    } else {
      if (at(i - 1, j, w, 0) == cur) {
        open = 0;
      } else {
        open = 1;
      }
    }
  }
  std::reverse(intervals.begin(), intervals.end());

  std::vector<HueInterval> merged;
  for (const auto& iv : intervals) {
    if (!merged.empty() && merged.back().hi + 1 == iv.lo) {
      merged.back().hi = iv.hi;
    } else {
      merged.push_back(iv);
    }
  }
  return HueRangeSet(std::move(merged));
}

/// Keeps a mask bit iff the pixel is chromatic (hue defined, s >= sat_min) and
/// its hue falls in `ranges`. With `accept_achromatic` (used for bare soil,
/// whose grey shadowed pixels carry no hue), achromatic pixels are kept too.
inline CoverMask refine_mask(const CoverMask& mask, const RgbImage& img, const HueRangeSet& ranges,
                             double sat_min = kDefaultSatMin, bool accept_achromatic = false) {
  require_same_shape(img, mask);
  validate_sat_min(sat_min);
  require(!ranges.empty(), ErrorCode::invalid_argument, "hue range set must be non-empty");
  CoverMask out(mask.class_name, mask.width(), mask.height());
  const auto px = img.pixels();
  const auto in = mask.bits.pixels();
  auto dst = out.bits.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (!in[i]) continue;
    const auto hsv = rgb_to_hsv(px[i]);
    const bool keep = is_chromatic(hsv, sat_min) ? ranges.contains(hsv.h) : accept_achromatic;
    dst[i] = keep ? 1 : 0;
  }
  return out;
}

// Serialization --------------------------------------------------------------

inline std::string spectrum_to_csv(const HueSpectrum& spectrum) {
  std::string out = "bin,fraction\n";
  for (int b = 0; b < kHueBins; ++b) out += fmt::format("{},{}\n", b, spectrum.bins[b]);
  return out;
}

inline HueSpectrum spectrum_from_csv(const std::string& text) {
  HueSpectrum out;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  require(line.rfind("bin,fraction", 0) == 0, ErrorCode::parse_error,
          "spectrum CSV must start with header 'bin,fraction'");
  int rows = 0;
  double total = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    require(comma != std::string::npos, ErrorCode::parse_error, "malformed spectrum row", line);
    int bin = 0;
    double fraction = 0.0;
    auto r1 = std::from_chars(line.data(), line.data() + comma, bin);
    auto r2 = std::from_chars(line.data() + comma + 1, line.data() + line.size(), fraction);
    require(r1.ec == std::errc{} && r2.ec == std::errc{} && bin >= 0 && bin < kHueBins &&
                std::isfinite(fraction) && fraction >= 0.0,
            ErrorCode::parse_error, "malformed spectrum row", line);
    out.bins[static_cast<std::size_t>(bin)] = fraction;
    total += fraction;
    ++rows;
  }
  require(rows == kHueBins, ErrorCode::parse_error, "spectrum CSV must have 360 rows",
          fmt::format("got {}", rows));
  // Pixel counts are not persisted; a non-empty spectrum is marked with a count of 1.
  out.pixel_count = total > 0.0 ? 1 : 0;
  return out;
}

inline nlohmann::json ranges_to_json(const HueRangeSet& ranges) {
  auto arr = nlohmann::json::array();
  for (const auto& iv : ranges.intervals()) arr.push_back({iv.lo, iv.hi});
  return arr;
}

inline HueRangeSet ranges_from_json(const nlohmann::json& j) {
  require(j.is_array(), ErrorCode::parse_error, "hue ranges must be a JSON array of [lo, hi]");
  std::vector<HueInterval> out;
  for (const auto& item : j) {
    require(item.is_array() && item.size() == 2 && item[0].is_number_integer() &&
                item[1].is_number_integer(),
            ErrorCode::parse_error, "hue range entries must be [lo, hi] integer pairs",
            item.dump());
    out.push_back({item[0].get<int>(), item[1].get<int>()});
  }
  return HueRangeSet(std::move(out));
}

}  // namespace vegmap
