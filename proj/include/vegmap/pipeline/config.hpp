#pragma once

// Project configuration: class list with display colours and the defaults that
// CLI flags and request parameters fall back to.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vegmap/error.hpp"
#include "vegmap/hue.hpp"
#include "vegmap/learners/model.hpp"
#include "vegmap/mapper.hpp"

namespace vegmap {

struct CoverClass {
  std::string name;
  std::string color;  ///< #rrggbb

  friend bool operator==(const CoverClass&, const CoverClass&) = default;
};

struct ProjectConfig {
  std::vector<CoverClass> classes;
  double sat_min = kDefaultSatMin;
  int size = 128;
  double sth = 0.9;
  int shifts = 3;
  int folds = 3;
  std::uint64_t seed = 0;
  std::vector<LearnerKind> learners{std::begin(kAllLearners), std::end(kAllLearners)};

  std::vector<std::string> class_names() const {
    std::vector<std::string> out;
    for (const auto& c : classes) out.push_back(c.name);
    return out;
  }
  bool has_class(const std::string& name) const {
    for (const auto& c : classes) {
      if (c.name == name) return true;
    }
    return false;
  }
  std::vector<Rgb> palette() const {
    std::vector<Rgb> out;
    for (const auto& c : classes) out.push_back(parse_hex_color(c.color));
    return out;
  }

  friend bool operator==(const ProjectConfig&, const ProjectConfig&) = default;
};

inline void validate_class_name(const std::string& name) {
  require(!name.empty() && name.size() <= 64 &&
              name.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-.") ==
                  std::string::npos &&
              name != "." && name != "..",
          ErrorCode::invalid_argument, "class names use letters, digits, '_', '-', '.'", name);
}

inline void validate_config(const ProjectConfig& c) {
  for (std::size_t i = 0; i < c.classes.size(); ++i) {
    validate_class_name(c.classes[i].name);
    parse_hex_color(c.classes[i].color);
    for (std::size_t j = 0; j < i; ++j) {
      require(c.classes[j].name != c.classes[i].name, ErrorCode::invalid_argument,
              "duplicate class name", c.classes[i].name);
    }
  }
  validate_sat_min(c.sat_min);
  require(c.size >= kMinTileSide, ErrorCode::invalid_argument, "default tile size too small");
  require(c.sth > 0.0 && c.sth <= 1.0, ErrorCode::invalid_argument, "default sth must lie in (0, 1]");
  require(c.shifts >= 1, ErrorCode::invalid_argument, "default shifts must be at least 1");
  require(c.folds >= 2, ErrorCode::invalid_argument, "default folds must be at least 2");
}

inline nlohmann::ordered_json config_to_json(const ProjectConfig& c) {
  auto classes = nlohmann::ordered_json::array();
  for (const auto& k : c.classes) classes.push_back({{"name", k.name}, {"color", k.color}});
  std::vector<std::string> learners;
  for (auto k : c.learners) learners.emplace_back(short_name(k));
  return {{"classes", std::move(classes)},
          {"sat_min", c.sat_min},
          {"size", c.size},
          {"sth", c.sth},
          {"shifts", c.shifts},
          {"folds", c.folds},
          {"seed", c.seed},
          {"learners", learners}};
}

inline ProjectConfig config_from_json(const nlohmann::json& j) {
  try {
    ProjectConfig c;
    if (j.contains("classes")) {
      const auto palette = default_palette(j.at("classes").size());
      std::size_t i = 0;
      for (const auto& k : j.at("classes")) {
        if (k.is_string()) {
          c.classes.push_back({k.get<std::string>(), to_hex(palette[i])});
        } else {
          c.classes.push_back({k.at("name").get<std::string>(),
                               k.value("color", to_hex(palette[i]))});
        }
        ++i;
      }
    }
    c.sat_min = j.value("sat_min", c.sat_min);
    c.size = j.value("size", c.size);
    c.sth = j.value("sth", c.sth);
    c.shifts = j.value("shifts", c.shifts);
    c.folds = j.value("folds", c.folds);
    c.seed = j.value("seed", c.seed);
    if (j.contains("learners")) {
      c.learners.clear();
      for (const auto& l : j.at("learners")) c.learners.push_back(learner_from_string(l.get<std::string>()));
    }
    validate_config(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, "malformed project config", e.what());
  }
}

}  // namespace vegmap
