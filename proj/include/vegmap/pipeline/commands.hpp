#pragma once

// Operations shared by the CLI and the HTTP service. Each takes decoded
// inputs plus a request and returns the artifact in its canonical byte form,
// so both front ends write identical files for identical parameters.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vegmap/cluster.hpp"
#include "vegmap/embed.hpp"
#include "vegmap/hue.hpp"
#include "vegmap/learners/model.hpp"
#include "vegmap/learners/validation.hpp"
#include "vegmap/mapper.hpp"
#include "vegmap/pipeline/config.hpp"
#include "vegmap/ranking.hpp"
#include "vegmap/tiling.hpp"

namespace vegmap {

namespace detail {

template <typename T>
T field_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, fmt::format("bad value for '{}'", key), e.what());
  }
}

inline std::string required_string(const nlohmann::json& j, const char* key) {
  require(j.contains(key) && j.at(key).is_string(), ErrorCode::invalid_argument,
          fmt::format("'{}' is required", key));
  return j.at(key).get<std::string>();
}

inline std::optional<HueRangeSet> optional_ranges(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (j.at(key).is_string()) return HueRangeSet::parse(j.at(key).get<std::string>());
  return ranges_from_json(j.at(key));
}

}  // namespace detail

// select -------------------------------------------------------------------------

struct SelectRequest {
  std::string image_id;
  std::string class_name;
  std::optional<HueRangeSet> hue;  ///< refine the painted mask first when set
  int size = 128;
  double sth = 0.9;
  int shifts = 3;
  double sat_min = kDefaultSatMin;
  bool accept_achromatic = false;
};

inline SelectRequest select_request_from_json(const nlohmann::json& j, const ProjectConfig& cfg) {
  SelectRequest r;
  r.image_id = detail::required_string(j, "image_id");
  r.class_name = detail::required_string(j, "class");
  r.hue = detail::optional_ranges(j, "hue");
  r.size = detail::field_or(j, "size", cfg.size);
  r.sth = detail::field_or(j, "sth", cfg.sth);
  r.shifts = detail::field_or(j, "shifts", cfg.shifts);
  r.sat_min = detail::field_or(j, "sat_min", cfg.sat_min);
  r.accept_achromatic = detail::field_or(j, "accept_achromatic", false);
  return r;
}

inline nlohmann::ordered_json to_json(const SelectRequest& r) {
  return {{"image_id", r.image_id},
          {"class", r.class_name},
          {"hue", r.hue ? nlohmann::ordered_json(r.hue->to_string()) : nlohmann::ordered_json()},
          {"size", r.size},
          {"sth", r.sth},
          {"shifts", r.shifts},
          {"sat_min", r.sat_min},
          {"accept_achromatic", r.accept_achromatic}};
}

inline TileManifest run_select(const RgbImage& img, const CoverMask& painted, const SelectRequest& r) {
  const CoverMask mask =
      r.hue ? refine_mask(painted, img, *r.hue, r.sat_min, r.accept_achromatic) : painted;
  return select_training_tiles(img, mask, {r.size, r.sth, r.shifts, r.class_name}, r.image_id);
}

// embed --------------------------------------------------------------------------

using ImageLookup = std::function<const RgbImage&(const std::string& image_id)>;

/// Baseline features for every tile of the manifest, in manifest order.
inline FeatureMatrix run_embed(const TileManifest& manifest, const ImageLookup& image_of) {
  FeatureMatrix out(kBaselineLayout, kBaselineDim);
  for (const auto& e : manifest.entries()) {
    out.add_row(e.tile, embed_baseline(crop_tile(image_of(e.tile.image_id), e.tile)).values);
  }
  return out;
}

// train / cv / loo ---------------------------------------------------------------

struct TrainRequest {
  LearnerKind learner = LearnerKind::neural_network;
  std::uint64_t seed = 0;
  std::vector<std::string> classes;  ///< empty = sorted distinct labels
};

inline TrainRequest train_request_from_json(const nlohmann::json& j, const ProjectConfig& cfg) {
  TrainRequest r;
  r.learner = learner_from_string(detail::field_or<std::string>(j, "learner", "nn"));
  r.seed = detail::field_or(j, "seed", cfg.seed);
  r.classes = detail::field_or(j, "classes", std::vector<std::string>{});
  return r;
}

inline Model run_train(const FeatureMatrix& features, const TileManifest& manifest,
                       const TrainRequest& r) {
  const auto data = dataset_from_manifest(features, manifest, r.classes);
  return fit(LearnerConfig::defaults(r.learner, r.seed), data);
}

inline std::string model_artifact(const Model& m) { return model_to_json(m).dump(2) + "\n"; }

struct CvRequest {
  std::vector<LearnerKind> learners{std::begin(kAllLearners), std::end(kAllLearners)};
  int folds = 3;
  std::uint64_t seed = 0;
  std::string dataset;
  bool timing = false;
  std::vector<std::string> classes;
};

inline CvRequest cv_request_from_json(const nlohmann::json& j, const ProjectConfig& cfg) {
  CvRequest r;
  r.learners = cfg.learners;
  if (j.contains("learners")) {
    const auto& l = j.at("learners");
    r.learners = l.is_string() ? parse_learner_list(l.get<std::string>()) : std::vector<LearnerKind>{};
    if (l.is_array()) {
      for (const auto& s : l) r.learners.push_back(learner_from_string(s.get<std::string>()));
    }
  }
  r.folds = detail::field_or(j, "folds", cfg.folds);
  r.seed = detail::field_or(j, "seed", cfg.seed);
  r.dataset = detail::field_or<std::string>(j, "dataset", "");
  r.timing = detail::field_or(j, "timing", false);
  r.classes = detail::field_or(j, "classes", std::vector<std::string>{});
  return r;
}

struct CvArtifacts {
  CvReport report;
  std::string csv;
  std::string json;
};

inline CvArtifacts run_cv(const FeatureMatrix& features, const TileManifest& manifest,
                          const CvRequest& r) {
  require(!r.learners.empty(), ErrorCode::invalid_argument, "at least one learner is required");
  const auto data = dataset_from_manifest(features, manifest, r.classes);
  std::vector<LearnerConfig> cfgs;
  for (auto k : r.learners) cfgs.push_back(LearnerConfig::defaults(k, r.seed));
  CvArtifacts out;
  out.report = cross_validate(cfgs, data, r.folds, r.seed, r.dataset);
  out.csv = cv_report_to_csv(out.report, r.timing);
  auto j = cv_report_to_json(out.report, r.timing);
  j["folds"] = r.folds;
  j["seed"] = r.seed;
  j["class_list"] = data.class_list;
  out.json = j.dump(2) + "\n";
  return out;
}

// predict --------------------------------------------------------------------------

inline PredictionMap run_predict(const Model& model, const RgbImage& img, int size,
                                 const std::string& image_id) {
  return predict_map(model, embedder_for(model.layout_id), img, size, image_id);
}

inline std::string map_artifact(const PredictionMap& m) { return map_to_json(m).dump() + "\n"; }

// neighbors ------------------------------------------------------------------------

/// Turns neighbour hits into pending suggestions carrying `label`.
inline TileManifest suggestions_from_neighbors(const std::vector<Neighbor>& hits,
                                               const std::optional<std::string>& label) {
  TileManifest out;
  for (const auto& h : hits) {
    if (!out.contains(h.tile)) out.add({h.tile, label, Provenance::neighbor_suggested, Review::pending});
  }
  return out;
}

// review ---------------------------------------------------------------------------

/// Applies review decisions {image_id, x, y, size, review[, label]} to a copy.
inline TileManifest apply_review(const TileManifest& manifest, const nlohmann::json& decisions) {
  TileManifest out = manifest;
  require(decisions.is_array(), ErrorCode::invalid_argument, "review decisions must be an array");
  for (const auto& d : decisions) {
    TileSpec key;
    try {
      key = {d.at("image_id").get<std::string>(), d.at("x").get<int>(), d.at("y").get<int>(),
             d.at("size").get<int>()};
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::invalid_argument, "malformed review decision", e.what());
    }
    const auto review = detail::required_string(d, "review");
    auto& entries = out.mutable_entries();
    auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.tile == key; });
    require(it != entries.end(), ErrorCode::not_found, "tile not in manifest", key.to_string());
    if (review == "approved") {
      it->review = Review::approved;
    } else if (review == "rejected") {
      it->review = Review::rejected;
    } else if (review == "pending") {
      it->review = Review::pending;
    } else {
      throw Error(ErrorCode::invalid_argument, "review must be approved, rejected or pending", review);
    }
    if (d.contains("label")) {
      it->label = d.at("label").is_null() ? std::nullopt
                                          : std::optional<std::string>(d.at("label").get<std::string>());
    }
  }
  return out;
}

}  // namespace vegmap
