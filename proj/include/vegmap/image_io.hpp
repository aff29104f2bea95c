#pragma once

// PNG/JPEG decode and PNG encode. Masks are single-channel PNGs where any
// nonzero sample is in-mask; they are written back as 0/255.

#include <algorithm>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "vegmap/error.hpp"
#include "vegmap/image.hpp"

namespace vegmap {

using Bytes = std::vector<std::uint8_t>;

inline Bytes read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open file", path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::filesystem::path& path, const void* data, std::size_t n) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write file", path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  require(static_cast<bool>(out), ErrorCode::io_error, "short write", path.string());
}

inline void write_file_bytes(const std::filesystem::path& path, const Bytes& bytes) {
  write_file_bytes(path, bytes.data(), bytes.size());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, text.data(), text.size());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

namespace detail {

inline bool is_png(const Bytes& data) {
  static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  return data.size() >= 8 && std::equal(sig, sig + 8, data.begin());
}

inline bool is_jpeg(const Bytes& data) {
  return data.size() >= 3 && data[0] == 0xFF && data[1] == 0xD8 && data[2] == 0xFF;
}

inline Bytes decode_png(const Bytes& data, std::uint32_t format, int& width, int& height) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  require(png_image_begin_read_from_memory(&image, data.data(), data.size()) != 0,
          ErrorCode::parse_error, "invalid PNG data", image.message);
  image.format = format;
  Bytes pixels(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr) == 0) {
    std::string message = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::parse_error, "PNG decode failed", message);
  }
  width = static_cast<int>(image.width);
  height = static_cast<int>(image.height);
  return pixels;
}

inline Bytes encode_png(const std::uint8_t* pixels, int width, int height, std::uint32_t format) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  png_alloc_size_t size = 0;
  require(png_image_write_get_memory_size(image, size, 0, pixels, 0, nullptr) != 0,
          ErrorCode::io_error, "PNG encode sizing failed", image.message);
  Bytes out(size);
  require(png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr) != 0,
          ErrorCode::io_error, "PNG encode failed", image.message);
  out.resize(size);
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Kept free of C++ objects with destructors between setjmp and longjmp.
inline bool decode_jpeg_raw(const Bytes& data, Bytes& pixels, int& width, int& height,
                            char* message) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.message[0] = '\0';
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::snprintf(message, JMSG_LENGTH_MAX, "%s", err.message);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data.data(), static_cast<unsigned long>(data.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  pixels.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) *
                                       static_cast<std::size_t>(width) * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

}  // namespace detail

inline RgbImage decode_image(const Bytes& data) {
  int width = 0, height = 0;
  Bytes raw;
  if (detail::is_png(data)) {
    raw = detail::decode_png(data, PNG_FORMAT_RGB, width, height);
  } else if (detail::is_jpeg(data)) {
    char message[JMSG_LENGTH_MAX];
    require(detail::decode_jpeg_raw(data, raw, width, height, message), ErrorCode::parse_error,
            "JPEG decode failed", message);
  } else {
    throw Error(ErrorCode::parse_error, "unsupported image format (expected PNG or JPEG)");
  }
  std::vector<Rgb> px(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = {raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]};
  return RgbImage(width, height, std::move(px));
}

inline RgbImage read_image(const std::filesystem::path& path) {
  try {
    return decode_image(read_file_bytes(path));
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), path.string() + (e.detail().empty() ? "" : ": " + e.detail()));
  }
}

inline Bytes encode_png(const RgbImage& img) {
  Bytes raw(img.size() * 3);
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    raw[3 * i] = px[i].r;
    raw[3 * i + 1] = px[i].g;
    raw[3 * i + 2] = px[i].b;
  }
  return detail::encode_png(raw.data(), img.width(), img.height(), PNG_FORMAT_RGB);
}

inline Bytes encode_png(const Raster<std::uint8_t>& gray) {
  return detail::encode_png(gray.pixels().data(), gray.width(), gray.height(), PNG_FORMAT_GRAY);
}

inline void write_png(const std::filesystem::path& path, const RgbImage& img) {
  write_file_bytes(path, encode_png(img));
}

inline Raster<std::uint8_t> decode_gray_png(const Bytes& data) {
  require(detail::is_png(data), ErrorCode::parse_error, "expected a PNG");
  int width = 0, height = 0;
  auto raw = detail::decode_png(data, PNG_FORMAT_GRAY, width, height);
  return Raster<std::uint8_t>(width, height, std::move(raw));
}

inline CoverMask decode_mask(const Bytes& data, std::string class_name) {
  return CoverMask(std::move(class_name), decode_gray_png(data));
}

inline CoverMask read_mask(const std::filesystem::path& path, std::string class_name) {
  try {
    return decode_mask(read_file_bytes(path), std::move(class_name));
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), path.string() + (e.detail().empty() ? "" : ": " + e.detail()));
  }
}

inline Bytes encode_mask(const CoverMask& mask) {
  Raster<std::uint8_t> gray(mask.width(), mask.height(), 0);
  const auto in = mask.bits.pixels();
  auto out = gray.pixels();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] ? 255 : 0;
  return encode_png(gray);
}

inline void write_mask(const std::filesystem::path& path, const CoverMask& mask) {
  write_file_bytes(path, encode_mask(mask));
}

/// Box-filter downscale so that max(width, height) <= max_dim.
inline RgbImage downscale(const RgbImage& img, int max_dim) {
  require(max_dim >= 1, ErrorCode::invalid_argument, "maxdim must be >= 1");
  const int longest = std::max(img.width(), img.height());
  if (longest <= max_dim) return img;
  const double scale = static_cast<double>(longest) / max_dim;
  const int w = std::max(1, static_cast<int>(img.width() / scale));
  const int h = std::max(1, static_cast<int>(img.height() / scale));
  RgbImage out(w, h);
  for (int y = 0; y < h; ++y) {
    const int y0 = static_cast<int>(y * scale);
    const int y1 = std::max(y0 + 1, std::min(img.height(), static_cast<int>((y + 1) * scale)));
    for (int x = 0; x < w; ++x) {
      const int x0 = static_cast<int>(x * scale);
      const int x1 = std::max(x0 + 1, std::min(img.width(), static_cast<int>((x + 1) * scale)));
      std::uint64_t r = 0, g = 0, b = 0, n = 0;
      for (int yy = y0; yy < y1; ++yy) {
        for (int xx = x0; xx < x1; ++xx) {
          const auto p = img.at(xx, yy);
          r += p.r;
          g += p.g;
          b += p.b;
          ++n;
        }
      }
      out.at(x, y) = {static_cast<std::uint8_t>((r + n / 2) / n),
                      static_cast<std::uint8_t>((g + n / 2) / n),
                      static_cast<std::uint8_t>((b + n / 2) / n)};
    }
  }
  return out;
}

}  // namespace vegmap
