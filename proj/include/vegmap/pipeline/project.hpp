#pragma once

// On-disk project store: a plain directory tree with JSON indices.
//
//   project.json              configuration and class list
//   images/index.json         registered images
//   images/<id>.<ext>         uploaded bytes, verbatim
//   masks/<image>/<class>.png painted masks, verbatim
//   hue_ranges/<class>.json   adopted hue ranges
//   manifests/ features/ models/ reports/ maps/   content-addressed artifacts
//   provenance.jsonl          one record per artifact: command, inputs, params
//   jobs.jsonl                job status journal

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "vegmap/error.hpp"
#include "vegmap/hue.hpp"
#include "vegmap/image_io.hpp"
#include "vegmap/pipeline/config.hpp"
#include "vegmap/pipeline/hash.hpp"

namespace vegmap {

enum class ArtifactKind { manifest, features, model, report, map };

struct ArtifactInfo {
  std::string prefix;
  std::string dir;
  std::string ext;
};

inline ArtifactInfo artifact_info(ArtifactKind k) {
  switch (k) {
    case ArtifactKind::manifest: return {"man", "manifests", ".jsonl"};
    case ArtifactKind::features: return {"feat", "features", ".csv"};
    case ArtifactKind::model: return {"model", "models", ".json"};
    case ArtifactKind::report: return {"cv", "reports", ".json"};
    case ArtifactKind::map: return {"map", "maps", ".json"};
  }
  return {};
}

inline std::string_view to_string(ArtifactKind k) {
  switch (k) {
    case ArtifactKind::manifest: return "manifest";
    case ArtifactKind::features: return "features";
    case ArtifactKind::model: return "model";
    case ArtifactKind::report: return "report";
    case ArtifactKind::map: return "map";
  }
  return "?";
}

struct ImageRecord {
  std::string id;
  std::string file;
  std::string source;
  int width = 0;
  int height = 0;
};

/// Record of how an artifact was produced.
struct ArtifactOrigin {
  std::string command;
  std::vector<std::string> inputs;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
};

inline std::string image_id_for(const Bytes& data) {
  return content_id("img", std::string_view(reinterpret_cast<const char*>(data.data()), data.size()));
}

class Project {
 public:
  /// Classes without a colour get the default palette entry for their position.
  static Project init(const std::filesystem::path& root, ProjectConfig config) {
    const auto palette = default_palette(config.classes.size());
    for (std::size_t i = 0; i < config.classes.size(); ++i) {
      if (config.classes[i].color.empty()) config.classes[i].color = to_hex(palette[i]);
    }
    validate_config(config);
    require(!std::filesystem::exists(root / "project.json"), ErrorCode::conflict,
            "project already exists", root.string());
    std::filesystem::create_directories(root);
    write_text_file(root / "project.json", config_to_json(config).dump(2) + "\n");
    write_text_file(root / "images" / "index.json", "{}\n");
    for (auto k : {ArtifactKind::manifest, ArtifactKind::features, ArtifactKind::model,
                   ArtifactKind::report, ArtifactKind::map}) {
      std::filesystem::create_directories(root / artifact_info(k).dir);
    }
    std::filesystem::create_directories(root / "masks");
    std::filesystem::create_directories(root / "hue_ranges");
    write_text_file(root / "provenance.jsonl", "");
    write_text_file(root / "jobs.jsonl", "");
    return open(root);
  }

  /// Loads and checks the store; refuses corrupt projects with diagnostics.
  static Project open(const std::filesystem::path& root) {
    require(std::filesystem::is_regular_file(root / "project.json"), ErrorCode::not_found,
            "not a project directory", root.string());
    Project p(root);
    try {
      p.config_ = config_from_json(nlohmann::json::parse(read_text_file(root / "project.json")));
      const auto index = nlohmann::json::parse(read_text_file(root / "images" / "index.json"));
      for (const auto& [id, rec] : index.items()) {
        ImageRecord r{id, rec.at("file").get<std::string>(), rec.value("source", ""),
                      rec.at("width").get<int>(), rec.at("height").get<int>()};
        require(std::filesystem::is_regular_file(root / "images" / r.file), ErrorCode::io_error,
                "image file listed in index is missing", r.file);
        p.images_.emplace(id, std::move(r));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse_error, "corrupt project store", e.what());
    }
    for (auto k : {ArtifactKind::manifest, ArtifactKind::features, ArtifactKind::model,
                   ArtifactKind::report, ArtifactKind::map}) {
      require(std::filesystem::is_directory(root / artifact_info(k).dir), ErrorCode::io_error,
              "project directory missing", artifact_info(k).dir);
    }
    return p;
  }

  Project(Project&& other) noexcept
      : root_(std::move(other.root_)), config_(std::move(other.config_)), images_(std::move(other.images_)) {}

  const std::filesystem::path& root() const noexcept { return root_; }

  ProjectConfig config() const {
    std::lock_guard lock(mutex_);
    return config_;
  }

  /// Appends a class; the class list never shrinks or reorders.
  void add_class(const CoverClass& c) {
    std::lock_guard lock(mutex_);
    auto next = config_;
    require(!next.has_class(c.name), ErrorCode::conflict, "class already exists", c.name);
    next.classes.push_back(c);
    if (next.classes.back().color.empty()) {
      next.classes.back().color = to_hex(default_palette(next.classes.size()).back());
    }
    validate_config(next);
    config_ = std::move(next);
    write_text_file(root_ / "project.json", config_to_json(config_).dump(2) + "\n");
    journal_locked("add_class", {{"name", c.name}});
  }

  void require_class(const std::string& name) const {
    std::lock_guard lock(mutex_);
    require(config_.has_class(name), ErrorCode::not_found, "unknown class", name);
  }

  // Images ---------------------------------------------------------------------

  ImageRecord add_image(const Bytes& data, const std::string& source = "") {
    const auto img = decode_image(data);
    const auto id = image_id_for(data);
    std::lock_guard lock(mutex_);
    if (auto it = images_.find(id); it != images_.end()) return it->second;
    const std::string ext = detail::is_png(data) ? ".png" : ".jpg";
    ImageRecord rec{id, id + ext, source, img.width(), img.height()};
    write_file_bytes(root_ / "images" / rec.file, data);
    images_.emplace(id, rec);
    save_index_locked();
    journal_locked("add_image", {{"id", id}, {"source", source}});
    return rec;
  }

  std::vector<ImageRecord> images() const {
    std::lock_guard lock(mutex_);
    std::vector<ImageRecord> out;
    for (const auto& [id, r] : images_) out.push_back(r);
    return out;
  }

  ImageRecord image_record(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = images_.find(id);
    require(it != images_.end(), ErrorCode::not_found, "unknown image", id);
    return it->second;
  }

  Bytes image_bytes(const std::string& id) const {
    return read_file_bytes(root_ / "images" / image_record(id).file);
  }

  RgbImage image(const std::string& id) const { return decode_image(image_bytes(id)); }

  // Masks ----------------------------------------------------------------------

  /// Stores the uploaded PNG verbatim after checking it decodes to the image size.
  void put_mask(const std::string& image_id, const std::string& class_name, const Bytes& png) {
    const auto rec = image_record(image_id);
    require_class(class_name);
    const auto mask = decode_mask(png, class_name);
    require(mask.bits.width() == rec.width && mask.bits.height() == rec.height,
            ErrorCode::dimension_mismatch, "mask size differs from image",
            fmt::format("{}x{} vs {}x{}", mask.bits.width(), mask.bits.height(), rec.width, rec.height));
    std::lock_guard lock(mutex_);
    write_file_bytes(mask_path(image_id, class_name), png);
    journal_locked("put_mask", {{"image_id", image_id}, {"class", class_name},
                                {"sha256", sha256_hex(std::string_view(
                                               reinterpret_cast<const char*>(png.data()), png.size()))}});
  }

  bool has_mask(const std::string& image_id, const std::string& class_name) const {
    return std::filesystem::is_regular_file(mask_path(image_id, class_name));
  }

  Bytes mask_bytes(const std::string& image_id, const std::string& class_name) const {
    image_record(image_id);
    require_class(class_name);
    require(has_mask(image_id, class_name), ErrorCode::not_found, "no mask painted for class",
            image_id + "/" + class_name);
    return read_file_bytes(mask_path(image_id, class_name));
  }

  CoverMask mask(const std::string& image_id, const std::string& class_name) const {
    return decode_mask(mask_bytes(image_id, class_name), class_name);
  }

  // Hue ranges -----------------------------------------------------------------

  void put_hue_ranges(const std::string& class_name, const HueRangeSet& ranges) {
    require_class(class_name);
    std::lock_guard lock(mutex_);
    write_text_file(root_ / "hue_ranges" / (class_name + ".json"), ranges_to_json(ranges).dump() + "\n");
    journal_locked("put_hue_ranges", {{"class", class_name}, {"ranges", ranges.to_string()}});
  }

  std::optional<HueRangeSet> hue_ranges(const std::string& class_name) const {
    require_class(class_name);
    const auto path = root_ / "hue_ranges" / (class_name + ".json");
    if (!std::filesystem::is_regular_file(path)) return std::nullopt;
    return ranges_from_json(nlohmann::json::parse(read_text_file(path)));
  }

  // Artifacts ------------------------------------------------------------------

  /// Writes content under its content id; storing identical content again is a
  /// no-op returning the same id.
  std::string store(ArtifactKind kind, const std::string& content, const ArtifactOrigin& prov) {
    const auto info = artifact_info(kind);
    const auto id = content_id(info.prefix, content);
    std::lock_guard lock(mutex_);
    const auto path = root_ / info.dir / (id + info.ext);
    if (!std::filesystem::exists(path)) {
      write_text_file(path, content);
      nlohmann::ordered_json rec{{"id", id},
                                 {"kind", std::string(to_string(kind))},
                                 {"command", prov.command},
                                 {"inputs", prov.inputs},
                                 {"params", prov.params}};
      append_line(root_ / "provenance.jsonl", rec.dump());
    }
    return id;
  }

  /// Extra file stored next to an artifact (e.g. a report's CSV rendering).
  void store_sidecar(ArtifactKind kind, const std::string& id, const std::string& ext,
                     const std::string& content) {
    std::lock_guard lock(mutex_);
    write_text_file(root_ / artifact_info(kind).dir / (id + ext), content);
  }

  bool has(ArtifactKind kind, const std::string& id) const {
    return valid_id(id) && std::filesystem::is_regular_file(artifact_path(kind, id));
  }

  std::string load(ArtifactKind kind, const std::string& id, const std::string& ext = "") const {
    require(has(kind, id), ErrorCode::not_found, fmt::format("unknown {} id", to_string(kind)), id);
    const auto info = artifact_info(kind);
    const auto path = root_ / info.dir / (id + (ext.empty() ? info.ext : ext));
    require(std::filesystem::is_regular_file(path), ErrorCode::not_found, "artifact rendering missing",
            path.filename().string());
    return read_text_file(path);
  }

  std::vector<std::string> list(ArtifactKind kind) const {
    const auto info = artifact_info(kind);
    std::set<std::string> ids;
    for (const auto& e : std::filesystem::directory_iterator(root_ / info.dir)) {
      if (e.path().extension() == info.ext) ids.insert(e.path().stem().string());
    }
    return {ids.begin(), ids.end()};
  }

  std::vector<nlohmann::json> provenance_records() const {
    std::lock_guard lock(mutex_);
    std::vector<nlohmann::json> out;
    std::istringstream in(read_text_file(root_ / "provenance.jsonl"));
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    }
    return out;
  }

  void append_job_record(const nlohmann::ordered_json& rec) {
    std::lock_guard lock(mutex_);
    append_line(root_ / "jobs.jsonl", rec.dump());
  }

 private:
  explicit Project(std::filesystem::path root) : root_(std::move(root)) {}

  static bool valid_id(const std::string& id) {
    return !id.empty() && id.size() <= 64 &&
           id.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789-") == std::string::npos;
  }

  std::filesystem::path artifact_path(ArtifactKind kind, const std::string& id) const {
    const auto info = artifact_info(kind);
    return root_ / info.dir / (id + info.ext);
  }

  std::filesystem::path mask_path(const std::string& image_id, const std::string& class_name) const {
    return root_ / "masks" / image_id / (class_name + ".png");
  }

  static void append_line(const std::filesystem::path& path, const std::string& line) {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::io_error, "cannot append to journal", path.string());
    out << line << '\n';
  }

  void journal_locked(const std::string& action, nlohmann::ordered_json detail) {
    nlohmann::ordered_json rec{{"action", action}};
    rec.update(detail);
    append_line(root_ / "provenance.jsonl", rec.dump());
  }

  void save_index_locked() {
    nlohmann::ordered_json index = nlohmann::ordered_json::object();
    for (const auto& [id, r] : images_) {
      index[id] = {{"file", r.file}, {"source", r.source}, {"width", r.width}, {"height", r.height}};
    }
    write_text_file(root_ / "images" / "index.json", index.dump(2) + "\n");
  }

  std::filesystem::path root_;
  ProjectConfig config_;
  std::map<std::string, ImageRecord> images_;
  mutable std::mutex mutex_;
};

}  // namespace vegmap
