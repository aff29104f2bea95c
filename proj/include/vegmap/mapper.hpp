#pragma once

// Whole-image classification on a non-overlapping tile grid, colour overlays
// of the resulting class map, and per-class area statistics.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "vegmap/embed.hpp"
#include "vegmap/learners/model.hpp"
#include "vegmap/tiling.hpp"

namespace vegmap {

/// Maps a square tile to a feature vector of a fixed layout.
struct Embedder {
  std::string layout_id;
  std::size_t dim = 0;
  std::function<FeatureVector(const RgbImage&)> embed;
};

inline Embedder baseline_embedder() { return {kBaselineLayout, kBaselineDim, embed_baseline}; }

/// Looks up a built-in embedder by layout id.
inline Embedder embedder_for(const std::string& layout_id) {
  if (layout_id == kBaselineLayout || layout_id == "baseline") return baseline_embedder();
  throw Error(ErrorCode::layout_mismatch, "no built-in embedder produces this layout", layout_id);
}

struct MapCell {
  std::size_t class_index = 0;
  std::vector<double> probs;

  friend bool operator==(const MapCell&, const MapCell&) = default;
};

struct PredictionMap {
  std::string image_id;
  int size = 0;
  int rows = 0;
  int cols = 0;
  std::vector<std::string> class_list;
  std::vector<MapCell> cells;  ///< row-major

  const MapCell& at(int r, int c) const {
    return cells[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
                 static_cast<std::size_t>(c)];
  }
  TileSpec tile(int r, int c) const { return {image_id, c * size, r * size, size}; }

  friend bool operator==(const PredictionMap&, const PredictionMap&) = default;
};

inline PredictionMap predict_map(const Model& model, const Embedder& embedder, const RgbImage& img,
                                 int size, const std::string& image_id = "") {
  require(model.layout_id == embedder.layout_id && model.dim == embedder.dim,
          ErrorCode::layout_mismatch, "model layout does not match the embedder",
          model.layout_id + " vs " + embedder.layout_id);
  require(size > 0 && size <= img.width() && size <= img.height(), ErrorCode::invalid_argument,
          "tile size exceeds image dimensions",
          fmt::format("size {} on {}x{}", size, img.width(), img.height()));
  PredictionMap map{image_id, size, img.height() / size, img.width() / size, model.class_list, {}};
  map.cells.reserve(static_cast<std::size_t>(map.rows) * static_cast<std::size_t>(map.cols));
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      const auto v = embedder.embed(crop_tile(img, map.tile(r, c)));
      auto p = model.predict_proba(v);
      const auto k = argmax(p);
      map.cells.push_back({k, std::move(p)});
    }
  }
  return map;
}

inline nlohmann::ordered_json map_to_json(const PredictionMap& m) {
  auto cells = nlohmann::ordered_json::array();
  for (const auto& c : m.cells) cells.push_back({{"class_index", c.class_index}, {"probs", c.probs}});
  return {{"image_id", m.image_id}, {"size", m.size},  {"rows", m.rows},
          {"cols", m.cols},         {"class_list", m.class_list}, {"cells", std::move(cells)}};
}

inline PredictionMap map_from_json(const nlohmann::json& j) {
  try {
    PredictionMap m;
    m.image_id = j.at("image_id").get<std::string>();
    m.size = j.at("size").get<int>();
    m.rows = j.at("rows").get<int>();
    m.cols = j.at("cols").get<int>();
    m.class_list = j.at("class_list").get<std::vector<std::string>>();
    for (const auto& c : j.at("cells")) {
      m.cells.push_back({c.at("class_index").get<std::size_t>(), c.at("probs").get<std::vector<double>>()});
    }
    require(m.cells.size() == static_cast<std::size_t>(m.rows) * static_cast<std::size_t>(m.cols),
            ErrorCode::parse_error, "map cell count does not match rows x cols");
    for (const auto& c : m.cells) {
      require(c.class_index < m.class_list.size() && c.probs.size() == m.class_list.size(),
              ErrorCode::parse_error, "map cell inconsistent with class list");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, "malformed prediction map", e.what());
  }
}

/// Stable colours by class-list position; cycles past the table.
inline std::vector<Rgb> default_palette(std::size_t n) {
  static constexpr Rgb kTable[] = {{230, 25, 75},  {60, 180, 75},  {255, 225, 25}, {0, 130, 200},
                                   {245, 130, 48}, {145, 30, 180}, {70, 240, 240}, {240, 50, 230}};
  std::vector<Rgb> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(kTable[i % std::size(kTable)]);
  return out;
}

inline Rgb parse_hex_color(std::string_view s) {
  if (!s.empty() && s.front() == '#') s.remove_prefix(1);
  require(s.size() == 6 && s.find_first_not_of("0123456789abcdefABCDEF") == std::string_view::npos,
          ErrorCode::invalid_argument, "colour must be #rrggbb", std::string(s));
  const auto v = std::stoul(std::string(s), nullptr, 16);
  return {static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>((v >> 8) & 0xff),
          static_cast<std::uint8_t>(v & 0xff)};
}

inline std::string to_hex(Rgb c) { return fmt::format("#{:02x}{:02x}{:02x}", c.r, c.g, c.b); }

/// Tints the cells of the listed classes; everything else is copied unchanged.
inline RgbImage render_overlay(const PredictionMap& map, const RgbImage& img,
                               const std::vector<std::string>& classes,
                               const std::vector<Rgb>& palette, double alpha) {
  require(img.width() / map.size == map.cols && img.height() / map.size == map.rows,
          ErrorCode::dimension_mismatch, "prediction map does not match image dimensions",
          fmt::format("{}x{} grid of {} px on {}x{}", map.cols, map.rows, map.size, img.width(),
                      img.height()));
  require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::invalid_argument, "alpha must lie in [0, 1]");
  require(palette.size() >= map.class_list.size(), ErrorCode::invalid_argument,
          "palette has fewer colours than classes");
  std::vector<bool> shown(map.class_list.size(), false);
  for (const auto& name : classes) {
    const auto it = std::find(map.class_list.begin(), map.class_list.end(), name);
    require(it != map.class_list.end(), ErrorCode::invalid_argument, "unknown class in overlay subset",
            name);
    shown[static_cast<std::size_t>(it - map.class_list.begin())] = true;
  }
  auto blend = [alpha](std::uint8_t a, std::uint8_t b) {
    return static_cast<std::uint8_t>(std::lround((1.0 - alpha) * a + alpha * b));
  };
  RgbImage out = img;
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      const auto k = map.at(r, c).class_index;
      if (!shown[k]) continue;
      const Rgb col = palette[k];
      for (int y = r * map.size; y < (r + 1) * map.size; ++y) {
        for (int x = c * map.size; x < (c + 1) * map.size; ++x) {
          auto& p = out.at(x, y);
          p = {blend(p.r, col.r), blend(p.g, col.g), blend(p.b, col.b)};
        }
      }
    }
  }
  return out;
}

struct ClassArea {
  std::string name;
  std::size_t cells = 0;
  double fraction = 0.0;
};

inline std::vector<ClassArea> class_area_stats(const PredictionMap& map) {
  std::vector<ClassArea> out;
  for (const auto& n : map.class_list) out.push_back({n, 0, 0.0});
  for (const auto& c : map.cells) ++out[c.class_index].cells;
  const double total = static_cast<double>(map.cells.size());
  if (total > 0) {
    for (auto& a : out) a.fraction = static_cast<double>(a.cells) / total;
  }
  return out;
}

inline std::string class_area_csv(const std::vector<ClassArea>& stats) {
  std::string out = "class,cells,fraction\n";
  for (const auto& a : stats) out += fmt::format("{},{},{}\n", a.name, a.cells, a.fraction);
  return out;
}

}  // namespace vegmap
