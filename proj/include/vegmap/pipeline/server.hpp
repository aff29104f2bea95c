#pragma once

// HTTP API over a project store (cpp-httplib). Mutations and jobs are
// journaled by the project; long operations run on the serial job queue.

#include <httplib.h>

#include <memory>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "vegmap/pipeline/service.hpp"

namespace vegmap {

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::degenerate_data: return 422;
    case ErrorCode::io_error: return 500;
    default: return 400;
  }
}

struct ServerOptions {
  std::string static_dir;  ///< optional annotator assets mounted at /
};

class Server {
 public:
  Server(Project& project, ServerOptions options = {})
      : project_(project), service_(project), jobs_(project), options_(std::move(options)) {
    routes();
  }

  /// Binds and serves until stop(); returns false when the address is unusable.
  bool listen(const std::string& host, int port) { return http_.listen(host, port); }

  /// Binds to an ephemeral port; serve with listen_after_bind().
  int bind_any(const std::string& host) { return http_.bind_to_any_port(host); }
  bool listen_after_bind() { return http_.listen_after_bind(); }
  void wait_until_ready() const { http_.wait_until_ready(); }
  void stop() { http_.stop(); }

  JobQueue& jobs() noexcept { return jobs_; }

 private:
  using Req = httplib::Request;
  using Res = httplib::Response;

  static void send_json(Res& res, const nlohmann::ordered_json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  static void send_error(Res& res, const Error& e) { send_json(res, error_body(e), http_status(e.code())); }

  template <typename F>
  static auto guarded(F f) {
    return [f](const Req& req, Res& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const nlohmann::json::exception& e) {
        send_error(res, Error(ErrorCode::parse_error, "malformed JSON body", e.what()));
      } catch (const std::exception& e) {
        send_json(res, {{"code", "internal"}, {"message", e.what()}, {"detail", ""}}, 500);
      }
    };
  }

  static nlohmann::json body_json(const Req& req) {
    if (req.body.empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(req.body);
    require(j.is_object(), ErrorCode::invalid_argument, "request body must be a JSON object");
    return j;
  }

  static Bytes body_bytes(const Req& req) {
    if (req.is_multipart_form_data()) {
      require(!req.files.empty(), ErrorCode::invalid_argument, "multipart upload without a file");
      const auto& content = req.files.begin()->second.content;
      return Bytes(content.begin(), content.end());
    }
    return Bytes(req.body.begin(), req.body.end());
  }

  static std::string bytes_string(const Bytes& b) { return std::string(b.begin(), b.end()); }

  nlohmann::ordered_json project_json() const {
    const auto cfg = project_.config();
    auto images = nlohmann::ordered_json::array();
    for (const auto& r : project_.images()) images.push_back(image_json(r));
    nlohmann::ordered_json j{{"config", config_to_json(cfg)}, {"images", images}};
    for (auto k : {ArtifactKind::manifest, ArtifactKind::features, ArtifactKind::model,
                   ArtifactKind::report, ArtifactKind::map}) {
      j[artifact_info(k).dir] = project_.list(k);
    }
    return j;
  }

  static nlohmann::ordered_json image_json(const ImageRecord& r) {
    return {{"id", r.id}, {"width", r.width}, {"height", r.height}, {"source", r.source}};
  }

  void submit(Res& res, std::string kind, nlohmann::ordered_json params, JobQueue::Task task) {
    const auto id = jobs_.submit(std::move(kind), std::move(params), std::move(task));
    send_json(res, {{"job_id", id}}, 202);
  }

  void require_artifact(ArtifactKind kind, const std::string& id) const {
    require(project_.has(kind, id), ErrorCode::not_found, fmt::format("unknown {} id", to_string(kind)), id);
  }

  void routes() {
    http_.Get("/api/project", guarded([this](const Req&, Res& res) { send_json(res, project_json()); }));

    http_.Post("/api/classes", guarded([this](const Req& req, Res& res) {
      const auto j = body_json(req);
      project_.add_class({detail::required_string(j, "name"), detail::field_or<std::string>(j, "color", "")});
      send_json(res, config_to_json(project_.config()), 201);
    }));

    http_.Get("/api/images", guarded([this](const Req&, Res& res) {
      auto out = nlohmann::ordered_json::array();
      for (const auto& r : project_.images()) out.push_back(image_json(r));
      send_json(res, out);
    }));

    http_.Post("/api/images", guarded([this](const Req& req, Res& res) {
      const auto source = req.has_param("name") ? req.get_param_value("name") : std::string{};
      send_json(res, image_json(project_.add_image(body_bytes(req), source)), 201);
    }));

    http_.Get(R"(/api/images/([^/]+)/full\.png)", guarded([this](const Req& req, Res& res) {
      auto img = project_.image(req.matches[1]);
      if (req.has_param("maxdim")) {
        int maxdim = 0;
        try {
          maxdim = std::stoi(req.get_param_value("maxdim"));
        } catch (const std::exception&) {
          throw Error(ErrorCode::invalid_argument, "maxdim must be an integer");
        }
        img = downscale(img, maxdim);
      }
      res.set_content(bytes_string(encode_png(img)), "image/png");
    }));

    http_.Get(R"(/api/images/([^/]+)/masks/([^/]+))", guarded([this](const Req& req, Res& res) {
      res.set_content(bytes_string(project_.mask_bytes(req.matches[1], req.matches[2])), "image/png");
    }));

    http_.Put(R"(/api/images/([^/]+)/masks/([^/]+))", guarded([this](const Req& req, Res& res) {
      project_.put_mask(req.matches[1], req.matches[2], body_bytes(req));
      send_json(res, {{"image_id", req.matches[1]}, {"class", req.matches[2]}});
    }));

    http_.Get(R"(/api/images/([^/]+)/spectrum)", guarded([this](const Req& req, Res& res) {
      require(req.has_param("class"), ErrorCode::invalid_argument, "'class' query parameter is required");
      const std::string image_id = req.matches[1];
      const auto cls = req.get_param_value("class");
      double sat_min = project_.config().sat_min;
      if (req.has_param("satmin")) {
        try {
          sat_min = std::stod(req.get_param_value("satmin"));
        } catch (const std::exception&) {
          throw Error(ErrorCode::invalid_argument, "satmin must be a number");
        }
      }
      const auto spectrum = compute_hue_spectrum(project_.image(image_id), project_.mask(image_id, cls), sat_min);
      send_json(res, {{"image_id", image_id},
                      {"class", cls},
                      {"sat_min", sat_min},
                      {"pixel_count", spectrum.pixel_count},
                      {"bins", spectrum.bins}});
    }));

    http_.Get(R"(/api/classes/([^/]+)/hue-ranges)", guarded([this](const Req& req, Res& res) {
      const auto ranges = project_.hue_ranges(req.matches[1]);
      require(ranges.has_value(), ErrorCode::not_found, "no hue ranges adopted for class", req.matches[1]);
      send_json(res, {{"class", req.matches[1]}, {"ranges", ranges_to_json(*ranges)},
                      {"text", ranges->to_string()}});
    }));

    http_.Put(R"(/api/classes/([^/]+)/hue-ranges)", guarded([this](const Req& req, Res& res) {
      const auto j = nlohmann::json::parse(req.body);
      const auto ranges = j.is_object() ? detail::optional_ranges(j, "ranges") : ranges_from_json(j);
      require(ranges.has_value(), ErrorCode::invalid_argument, "'ranges' is required");
      project_.put_hue_ranges(req.matches[1], *ranges);
      send_json(res, {{"class", req.matches[1]}, {"ranges", ranges_to_json(*ranges)},
                      {"text", ranges->to_string()}});
    }));

    http_.Post("/api/select", guarded([this](const Req& req, Res& res) {
      auto r = service_.with_stored_ranges(select_request_from_json(body_json(req), project_.config()));
      project_.mask_bytes(r.image_id, r.class_name);  // 404 now rather than a failed job
      submit(res, "select", to_json(r), [this, r] { return service_.select(r); });
    }));

    http_.Post("/api/embed", guarded([this](const Req& req, Res& res) {
      const auto manifest_id = detail::required_string(body_json(req), "manifest_id");
      require_artifact(ArtifactKind::manifest, manifest_id);
      submit(res, "embed", {{"manifest_id", manifest_id}},
             [this, manifest_id] { return service_.embed(manifest_id); });
    }));

    http_.Post("/api/train", guarded([this](const Req& req, Res& res) {
      const auto j = body_json(req);
      const auto manifest_id = detail::required_string(j, "manifest_id");
      const auto features_id = detail::required_string(j, "features_id");
      require_artifact(ArtifactKind::manifest, manifest_id);
      require_artifact(ArtifactKind::features, features_id);
      const auto r = train_request_from_json(j, project_.config());
      submit(res, "train",
             {{"manifest_id", manifest_id}, {"features_id", features_id},
              {"learner", std::string(short_name(r.learner))}, {"seed", r.seed}},
             [this, features_id, manifest_id, r] { return service_.train(features_id, manifest_id, r); });
    }));

    http_.Post("/api/cv", guarded([this](const Req& req, Res& res) {
      const auto j = body_json(req);
      const auto manifest_id = detail::required_string(j, "manifest_id");
      const auto features_id = detail::required_string(j, "features_id");
      require_artifact(ArtifactKind::manifest, manifest_id);
      require_artifact(ArtifactKind::features, features_id);
      const auto r = cv_request_from_json(j, project_.config());
      std::vector<std::string> learners;
      for (auto k : r.learners) learners.emplace_back(short_name(k));
      submit(res, "cv",
             {{"manifest_id", manifest_id}, {"features_id", features_id}, {"learners", learners},
              {"folds", r.folds}, {"seed", r.seed}},
             [this, features_id, manifest_id, r] { return service_.cv(features_id, manifest_id, r); });
    }));

    http_.Post("/api/predict", guarded([this](const Req& req, Res& res) {
      const auto j = body_json(req);
      const auto model_id = detail::required_string(j, "model_id");
      const auto image_id = detail::required_string(j, "image_id");
      require_artifact(ArtifactKind::model, model_id);
      project_.image_record(image_id);
      const int size = detail::field_or(j, "size", project_.config().size);
      submit(res, "predict", {{"model_id", model_id}, {"image_id", image_id}, {"size", size}},
             [this, model_id, image_id, size] { return service_.predict(model_id, image_id, size); });
    }));

    http_.Get(R"(/api/jobs/([^/]+))", guarded([this](const Req& req, Res& res) {
      send_json(res, job_to_json(jobs_.get(req.matches[1])));
    }));

    http_.Get(R"(/api/manifests/([^/]+))", guarded([this](const Req& req, Res& res) {
      res.set_content(project_.load(ArtifactKind::manifest, req.matches[1]), "application/x-ndjson");
    }));

    http_.Post(R"(/api/manifests/([^/]+)/review)", guarded([this](const Req& req, Res& res) {
      const std::string id = req.matches[1];
      require_artifact(ArtifactKind::manifest, id);
      const auto j = nlohmann::json::parse(req.body);
      send_json(res, {{"manifest_id", service_.review(id, j.is_object() ? j.at("decisions") : j)}}, 201);
    }));

    http_.Get(R"(/api/features/([^/]+))", guarded([this](const Req& req, Res& res) {
      res.set_content(project_.load(ArtifactKind::features, req.matches[1]), "text/csv");
    }));

    http_.Get(R"(/api/models/([^/]+))", guarded([this](const Req& req, Res& res) {
      res.set_content(project_.load(ArtifactKind::model, req.matches[1]), "application/json");
    }));

    http_.Get(R"(/api/reports/([^/]+))", guarded([this](const Req& req, Res& res) {
      const std::string id = req.matches[1];
      const bool csv = req.has_param("format") && req.get_param_value("format") == "csv";
      res.set_content(project_.load(ArtifactKind::report, id, csv ? ".csv" : ""),
                      csv ? "text/csv" : "application/json");
    }));

    http_.Get(R"(/api/maps/([^/]+)/overlay\.png)", guarded([this](const Req& req, Res& res) {
      const auto map = service_.load_map(req.matches[1]);
      std::vector<std::string> classes = map.class_list;
      if (req.has_param("classes")) {
        classes.clear();
        const auto list = req.get_param_value("classes");
        std::size_t start = 0;
        while (start <= list.size()) {
          const auto end = std::min(list.find(',', start), list.size());
          if (end > start) classes.push_back(list.substr(start, end - start));
          start = end + 1;
        }
      }
      double alpha = 0.5;
      if (req.has_param("alpha")) {
        try {
          alpha = std::stod(req.get_param_value("alpha"));
        } catch (const std::exception&) {
          throw Error(ErrorCode::invalid_argument, "alpha must be a number");
        }
      }
      const auto overlay = render_overlay(map, project_.image(map.image_id), classes, palette_for(map), alpha);
      res.set_content(bytes_string(encode_png(overlay)), "image/png");
    }));

    http_.Get(R"(/api/maps/([^/]+)/stats)", guarded([this](const Req& req, Res& res) {
      res.set_content(class_area_csv(class_area_stats(service_.load_map(req.matches[1]))), "text/csv");
    }));

    http_.Get(R"(/api/maps/([^/]+))", guarded([this](const Req& req, Res& res) {
      res.set_content(project_.load(ArtifactKind::map, req.matches[1]), "application/json");
    }));

    http_.set_error_handler([](const Req& req, Res& res) {
      if (res.status == 404 && res.body.empty()) {
        send_json(res, {{"code", "not_found"}, {"message", "no such endpoint"}, {"detail", req.path}}, 404);
      }
    });

    if (!options_.static_dir.empty()) {
      require(http_.set_mount_point("/", options_.static_dir), ErrorCode::not_found,
              "static asset directory not found", options_.static_dir);
    }
  }

  /// Project colours for classes the project knows; defaults for the rest.
  std::vector<Rgb> palette_for(const PredictionMap& map) const {
    const auto cfg = project_.config();
    auto out = default_palette(map.class_list.size());
    for (std::size_t i = 0; i < map.class_list.size(); ++i) {
      for (const auto& c : cfg.classes) {
        if (c.name == map.class_list[i]) out[i] = parse_hex_color(c.color);
      }
    }
    return out;
  }

  Project& project_;
  Service service_;
  JobQueue jobs_;
  ServerOptions options_;
  httplib::Server http_;
};

}  // namespace vegmap
