#pragma once

#include <charconv>
#include <cmath>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "vegmap/error.hpp"
#include "vegmap/image_io.hpp"
#include "vegmap/tiling.hpp"

namespace vegmap {

struct FeatureVector {
  std::vector<double> values;
  std::string layout_id;

  std::size_t dim() const noexcept { return values.size(); }
};

/// Feature rows keyed by tile. All rows share one layout and dimension.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::string layout_id, std::size_t dim)
      : layout_id_(std::move(layout_id)), dim_(dim) {}

  const std::string& layout_id() const noexcept { return layout_id_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t rows() const noexcept { return keys_.size(); }

  void add_row(TileSpec key, std::span<const double> values) {
    require(values.size() == dim_, ErrorCode::dimension_mismatch,
            "feature row length differs from layout dimension",
            fmt::format("{} vs {}", values.size(), dim_));
    for (std::size_t c = 0; c < values.size(); ++c) {
      require(std::isfinite(values[c]), ErrorCode::invalid_argument, "non-finite feature value",
              fmt::format("row {} column f{}", keys_.size(), c));
    }
    keys_.push_back(std::move(key));
    data_.insert(data_.end(), values.begin(), values.end());
  }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  FeatureVector vector(std::size_t i) const {
    const auto r = row(i);
    return {std::vector<double>(r.begin(), r.end()), layout_id_};
  }
  const TileSpec& key(std::size_t i) const { return keys_[i]; }
  const std::vector<TileSpec>& keys() const noexcept { return keys_; }
  std::span<const double> data() const noexcept { return data_; }

  /// Row subset in the order given.
  FeatureMatrix select(std::span<const std::size_t> indices) const {
    FeatureMatrix out(layout_id_, dim_);
    for (auto i : indices) out.add_row(keys_[i], row(i));
    return out;
  }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::string layout_id_;
  std::size_t dim_ = 0;
  std::vector<TileSpec> keys_;
  std::vector<double> data_;
};

inline void require_same_layout(const FeatureMatrix& a, const FeatureMatrix& b) {
  require(a.layout_id() == b.layout_id() && a.dim() == b.dim(), ErrorCode::layout_mismatch,
          "feature layouts differ", a.layout_id() + " vs " + b.layout_id());
}

// CSV: optional "# layout_id=<id>" line, header image_id,x,y,size,f0..f{D-1},
// then one row per tile.

inline std::string feature_matrix_to_csv(const FeatureMatrix& m) {
  std::string out = fmt::format("# layout_id={}\nimage_id,x,y,size", m.layout_id());
  for (std::size_t c = 0; c < m.dim(); ++c) out += fmt::format(",f{}", c);
  out += '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto& k = m.key(r);
    out += fmt::format("{},{},{},{}", k.image_id, k.x, k.y, k.size);
    for (double v : m.row(r)) out += fmt::format(",{}", v);
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

inline std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Reads a feature CSV. Without a layout comment the layout is "external:D".
inline FeatureMatrix feature_matrix_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::string layout;
  int line_no = 0;

  std::string header;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim_cr(raw);
    if (line.empty()) continue;
    if (line.rfind("# layout_id=", 0) == 0) {
      layout = std::string(line.substr(12));
      continue;
    }
    if (line.front() == '#') continue;
    header = std::string(line);
    break;
  }
  require(!header.empty(), ErrorCode::parse_error, "feature CSV has no header");
  const auto cols = detail::split_csv_line(header);
  require(cols.size() >= 5 && cols[0] == "image_id" && cols[1] == "x" && cols[2] == "y" &&
              cols[3] == "size",
          ErrorCode::parse_error, "feature CSV header must start with image_id,x,y,size,f0",
          header);
  const std::size_t dim = cols.size() - 4;
  for (std::size_t c = 0; c < dim; ++c) {
    require(cols[4 + c] == fmt::format("f{}", c), ErrorCode::parse_error,
            "feature columns must be named f0..f{D-1}", fmt::format("column {}", 4 + c));
  }
  if (layout.empty()) layout = fmt::format("external:{}", dim);

  FeatureMatrix out(layout, dim);
  std::set<TileSpec> seen;
  std::vector<double> values(dim);
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim_cr(raw);
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    require(cells.size() == cols.size(), ErrorCode::parse_error, "ragged feature row",
            fmt::format("line {}: {} cells, expected {}", line_no, cells.size(), cols.size()));
    TileSpec key;
    key.image_id = std::string(cells[0]);
    auto parse_int = [&](std::string_view s, int column) {
      int v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      require(ec == std::errc{} && ptr == s.data() + s.size(), ErrorCode::parse_error,
              "non-integer tile key cell", fmt::format("line {} column {}", line_no, column));
      return v;
    };
    key.x = parse_int(cells[1], 1);
    key.y = parse_int(cells[2], 2);
    key.size = parse_int(cells[3], 3);
    for (std::size_t c = 0; c < dim; ++c) {
      const auto cell = cells[4 + c];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      require(ec == std::errc{} && ptr == cell.data() + cell.size() && !cell.empty(),
              ErrorCode::parse_error, "non-numeric feature cell",
              fmt::format("line {} column f{}: '{}'", line_no, c, cell));
      require(std::isfinite(v), ErrorCode::parse_error, "non-finite feature cell",
              fmt::format("line {} column f{}: '{}'", line_no, c, cell));
      values[c] = v;
    }
    require(seen.insert(key).second, ErrorCode::parse_error, "duplicate tile key",
            fmt::format("line {}: {}", line_no, key.to_string()));
    out.add_row(std::move(key), values);
  }
  return out;
}

/// Loads externally produced embeddings (e.g. CNN features) keyed by tile.
inline FeatureMatrix import_embeddings(const std::filesystem::path& path) {
  const auto bytes = read_text_file(path);
  try {
    return feature_matrix_from_csv(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), path.string() + ": " + e.detail());
  }
}

}  // namespace vegmap
