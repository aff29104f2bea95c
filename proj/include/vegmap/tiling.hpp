#pragma once

// Square tile grids (with diagonal shift multiplication), mask overlay
// fractions, and threshold-based harvesting of training tiles.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "vegmap/error.hpp"
#include "vegmap/image.hpp"

namespace vegmap {

struct TileSpec {
  std::string image_id;
  int x = 0;
  int y = 0;
  int size = 0;

  auto key() const { return std::tie(image_id, x, y, size); }
  friend bool operator==(const TileSpec& a, const TileSpec& b) { return a.key() == b.key(); }
  friend bool operator<(const TileSpec& a, const TileSpec& b) { return a.key() < b.key(); }

  std::string to_string() const { return fmt::format("{}@{},{}+{}", image_id, x, y, size); }
};

inline void require_tile_in_bounds(const TileSpec& tile, int width, int height) {
  require(tile.size >= 1 && tile.x >= 0 && tile.y >= 0 && tile.x + tile.size <= width &&
              tile.y + tile.size <= height,
          ErrorCode::out_of_bounds, "tile exceeds image bounds",
          fmt::format("{} in {}x{}", tile.to_string(), width, height));
}

enum class Provenance { direct, mask_hue, neighbor_suggested };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::direct: return "direct";
    case Provenance::mask_hue: return "mask-hue";
    case Provenance::neighbor_suggested: return "neighbor-suggested";
  }
  return "direct";
}

inline Provenance provenance_from_string(std::string_view s) {
  if (s == "direct") return Provenance::direct;
  if (s == "mask-hue") return Provenance::mask_hue;
  if (s == "neighbor-suggested") return Provenance::neighbor_suggested;
  throw Error(ErrorCode::parse_error, "unknown tile provenance", std::string(s));
}

enum class Review { pending, approved, rejected };

struct ManifestEntry {
  TileSpec tile;
  std::optional<std::string> label;
  Provenance provenance = Provenance::direct;
  Review review = Review::pending;

  friend bool operator==(const ManifestEntry& a, const ManifestEntry& b) {
    return a.tile == b.tile && a.label == b.label && a.provenance == b.provenance &&
           a.review == b.review;
  }
};

/// Tile records in a stable order with no duplicate (image_id, x, y, size).
class TileManifest {
 public:
  TileManifest() = default;

  void add(ManifestEntry entry) {
    require(keys_.insert(entry.tile).second, ErrorCode::conflict, "duplicate tile in manifest",
            entry.tile.to_string());
    entries_.push_back(std::move(entry));
  }

  bool contains(const TileSpec& tile) const { return keys_.count(tile) > 0; }
  const std::vector<ManifestEntry>& entries() const noexcept { return entries_; }
  std::vector<ManifestEntry>& mutable_entries() noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Entries usable for training: labelled and not rejected in review.
  std::vector<ManifestEntry> trainable() const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries_) {
      if (e.label && e.review != Review::rejected) out.push_back(e);
    }
    return out;
  }

  std::optional<std::string> label_of(const TileSpec& tile) const {
    for (const auto& e : entries_) {
      if (e.tile == tile) return e.label;
    }
    return std::nullopt;
  }

  friend bool operator==(const TileManifest& a, const TileManifest& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<ManifestEntry> entries_;
  std::set<TileSpec> keys_;
};

/// Union over k = 0..shifts-1 of non-overlapping grids offset diagonally by
/// floor(k*size/shifts). Order: k, then row-major. Tiles that would overflow
/// the image are dropped.
inline std::vector<TileSpec> grid_tiles(int width, int height, int size, int shifts,
                                        const std::string& image_id = {}) {
  require(size >= 1, ErrorCode::invalid_argument, "tile size must be >= 1");
  require(shifts >= 1, ErrorCode::invalid_argument, "shifts must be >= 1");
  require(size <= std::min(width, height), ErrorCode::invalid_argument,
          "tile size exceeds image dimension", fmt::format("{} > min({}, {})", size, width, height));
  std::vector<TileSpec> out;
  std::set<std::pair<int, int>> seen;
  for (int k = 0; k < shifts; ++k) {
    const int offset = static_cast<int>(static_cast<long long>(k) * size / shifts);
    for (int y = offset; y + size <= height; y += size) {
      for (int x = offset; x + size <= width; x += size) {
        if (seen.emplace(x, y).second) out.push_back({image_id, x, y, size});
      }
    }
  }
  return out;
}

inline double overlay_fraction(const TileSpec& tile, const CoverMask& mask) {
  require_tile_in_bounds(tile, mask.width(), mask.height());
  std::size_t set = 0;
  for (int y = tile.y; y < tile.y + tile.size; ++y) {
    for (int x = tile.x; x < tile.x + tile.size; ++x) set += mask.bits.at(x, y);
  }
  return static_cast<double>(set) / (static_cast<double>(tile.size) * tile.size);
}

/// Summed-area table for O(1) window counts over a mask.
class MaskIntegral {
 public:
  explicit MaskIntegral(const CoverMask& mask)
      : width_(mask.width()), height_(mask.height()),
        sums_(static_cast<std::size_t>(width_ + 1) * static_cast<std::size_t>(height_ + 1), 0) {
    for (int y = 0; y < height_; ++y) {
      std::uint64_t row = 0;
      for (int x = 0; x < width_; ++x) {
        row += mask.bits.at(x, y);
        at(x + 1, y + 1) = at(x + 1, y) + row;
      }
    }
  }

  std::uint64_t count(const TileSpec& t) const {
    return at(t.x + t.size, t.y + t.size) - at(t.x, t.y + t.size) - at(t.x + t.size, t.y) +
           at(t.x, t.y);
  }

  double fraction(const TileSpec& t) const {
    return static_cast<double>(count(t)) / (static_cast<double>(t.size) * t.size);
  }

 private:
  std::uint64_t& at(int x, int y) {
    return sums_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_ + 1) +
                 static_cast<std::size_t>(x)];
  }
  std::uint64_t at(int x, int y) const {
    return sums_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_ + 1) +
                 static_cast<std::size_t>(x)];
  }

  int width_;
  int height_;
  std::vector<std::uint64_t> sums_;
};

struct SelectionParams {
  int size = 128;
  double sth = 0.9;  ///< minimum mask overlay fraction, in (0, 1]
  int shifts = 3;
  std::string class_name;
};

/// All grid tiles (with shifts) whose refined-mask overlay reaches params.sth.
inline TileManifest select_training_tiles(const RgbImage& img, const CoverMask& refined,
                                          const SelectionParams& params,
                                          const std::string& image_id) {
  require_same_shape(img, refined);
  require(params.sth > 0.0 && params.sth <= 1.0, ErrorCode::invalid_argument,
          "sth must lie in (0, 1]", fmt::format("{}", params.sth));
  require(!params.class_name.empty(), ErrorCode::invalid_argument, "class name is required");
  const MaskIntegral integral(refined);
  TileManifest out;
  for (auto& tile : grid_tiles(img.width(), img.height(), params.size, params.shifts, image_id)) {
    if (integral.fraction(tile) >= params.sth) {
      out.add({std::move(tile), params.class_name, Provenance::mask_hue, Review::pending});
    }
  }
  return out;
}

inline RgbImage crop_tile(const RgbImage& img, const TileSpec& tile) {
  require_tile_in_bounds(tile, img.width(), img.height());
  RgbImage out(tile.size, tile.size);
  for (int y = 0; y < tile.size; ++y) {
    for (int x = 0; x < tile.size; ++x) out.at(x, y) = img.at(tile.x + x, tile.y + y);
  }
  return out;
}

/// Concatenates manifests. A tile claimed with two different labels is dropped
/// from the result (returned in `conflicts`); identical duplicates keep the first.
inline TileManifest merge_manifests(const std::vector<TileManifest>& parts,
                                    std::vector<TileSpec>* conflicts = nullptr) {
  std::map<TileSpec, std::optional<std::string>> labels;
  std::set<TileSpec> conflicted;
  for (const auto& m : parts) {
    for (const auto& e : m.entries()) {
      auto [it, inserted] = labels.emplace(e.tile, e.label);
      if (!inserted && it->second != e.label) conflicted.insert(e.tile);
    }
  }
  TileManifest out;
  for (const auto& m : parts) {
    for (const auto& e : m.entries()) {
      if (conflicted.count(e.tile) || out.contains(e.tile)) continue;
      out.add(e);
    }
  }
  if (conflicts) conflicts->assign(conflicted.begin(), conflicted.end());
  return out;
}

// JSONL ------------------------------------------------------------------------

inline nlohmann::ordered_json manifest_entry_to_json(const ManifestEntry& e) {
  nlohmann::ordered_json j;
  j["image_id"] = e.tile.image_id;
  j["x"] = e.tile.x;
  j["y"] = e.tile.y;
  j["size"] = e.tile.size;
  j["label"] = e.label ? nlohmann::ordered_json(*e.label) : nlohmann::ordered_json(nullptr);
  j["provenance"] = std::string(to_string(e.provenance));
  if (e.review == Review::approved) j["review"] = "approved";
  if (e.review == Review::rejected) j["review"] = "rejected";
  return j;
}

inline std::string manifest_to_jsonl(const TileManifest& manifest) {
  std::string out;
  for (const auto& e : manifest.entries()) {
    out += manifest_entry_to_json(e).dump();
    out += '\n';
  }
  return out;
}

inline ManifestEntry manifest_entry_from_json(const nlohmann::json& j) {
  ManifestEntry e;
  try {
    e.tile.image_id = j.at("image_id").get<std::string>();
    e.tile.x = j.at("x").get<int>();
    e.tile.y = j.at("y").get<int>();
    e.tile.size = j.at("size").get<int>();
    const auto& label = j.at("label");
    if (!label.is_null()) e.label = label.get<std::string>();
    e.provenance = provenance_from_string(j.at("provenance").get<std::string>());
    if (j.contains("review")) {
      const auto r = j.at("review").get<std::string>();
      if (r == "approved") e.review = Review::approved;
      else if (r == "rejected") e.review = Review::rejected;
      else require(r == "pending", ErrorCode::parse_error, "unknown review state", r);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::parse_error, "malformed manifest record", ex.what());
  }
  require(e.tile.size >= 1 && e.tile.x >= 0 && e.tile.y >= 0, ErrorCode::parse_error,
          "manifest record has invalid geometry", e.tile.to_string());
  return e;
}

inline TileManifest manifest_from_jsonl(const std::string& text) {
  TileManifest out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::parse_error, "invalid JSON in manifest",
                  fmt::format("line {}: {}", line_no, ex.what()));
    }
    try {
      out.add(manifest_entry_from_json(j));
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), fmt::format("line {}: {}", line_no, e.detail()));
    }
  }
  return out;
}

}  // namespace vegmap
