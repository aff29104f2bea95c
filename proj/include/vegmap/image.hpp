#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vegmap/error.hpp"

namespace vegmap {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Row-major raster with value semantics. Width and height are at least 1.
template <typename Pixel>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, Pixel fill = Pixel{}) : width_(width), height_(height) {
    require(width >= 1 && height >= 1, ErrorCode::invalid_argument,
            "raster dimensions must be at least 1x1");
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  Raster(int width, int height, std::vector<Pixel> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    require(width >= 1 && height >= 1, ErrorCode::invalid_argument,
            "raster dimensions must be at least 1x1");
    require(pixels_.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
            ErrorCode::dimension_mismatch, "pixel count does not match width x height");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  Pixel& at(int x, int y) { return pixels_[index(x, y)]; }
  const Pixel& at(int x, int y) const { return pixels_[index(x, y)]; }

  std::span<Pixel> pixels() noexcept { return pixels_; }
  std::span<const Pixel> pixels() const noexcept { return pixels_; }

  template <typename Other>
  bool same_shape(const Raster<Other>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Pixel> pixels_;
};

using RgbImage = Raster<Rgb>;

/// Binary per-class mask aligned to an image; bits are 0 or 1.
struct CoverMask {
  std::string class_name;
  Raster<std::uint8_t> bits;

  CoverMask() = default;
  CoverMask(std::string name, int width, int height)
      : class_name(std::move(name)), bits(width, height, 0) {}
  CoverMask(std::string name, Raster<std::uint8_t> raster)
      : class_name(std::move(name)), bits(std::move(raster)) {
    for (auto& b : bits.pixels()) b = b != 0 ? 1 : 0;
  }

  int width() const noexcept { return bits.width(); }
  int height() const noexcept { return bits.height(); }
  bool test(int x, int y) const { return bits.at(x, y) != 0; }
  void set(int x, int y, bool on) { bits.at(x, y) = on ? 1 : 0; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits.pixels()) n += b;
    return n;
  }

  friend bool operator==(const CoverMask&, const CoverMask&) = default;
};

inline void require_same_shape(const RgbImage& img, const CoverMask& mask) {
  require(img.same_shape(mask.bits), ErrorCode::dimension_mismatch,
          "image and mask dimensions differ",
          std::to_string(img.width()) + "x" + std::to_string(img.height()) + " vs " +
              std::to_string(mask.width()) + "x" + std::to_string(mask.height()));
}

}  // namespace vegmap
