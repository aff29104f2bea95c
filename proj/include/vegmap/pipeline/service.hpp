#pragma once

// Project-level operations and the serial job worker behind the HTTP API.

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "vegmap/pipeline/commands.hpp"
#include "vegmap/pipeline/project.hpp"

namespace vegmap {

enum class JobStatus { queued, running, done, failed };

inline std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
  }
  return "?";
}

struct Job {
  std::string id;
  std::string kind;
  nlohmann::ordered_json params;
  JobStatus status = JobStatus::queued;
  std::string result;  ///< artifact id when done
  nlohmann::ordered_json diagnostics;  ///< {code, message, detail} when failed
};

inline nlohmann::ordered_json job_to_json(const Job& j) {
  nlohmann::ordered_json out{{"id", j.id}, {"kind", j.kind}, {"status", std::string(to_string(j.status))},
                             {"params", j.params}};
  if (!j.result.empty()) out["result"] = j.result;
  if (!j.diagnostics.is_null()) out["diagnostics"] = j.diagnostics;
  return out;
}

inline nlohmann::ordered_json error_body(const Error& e) {
  return {{"code", std::string(to_string(e.code()))}, {"message", e.what()}, {"detail", e.detail()}};
}

/// Runs jobs one at a time, in submission order, on a single worker thread.
class JobQueue {
 public:
  using Task = std::function<std::string()>;

  explicit JobQueue(Project& project) : project_(project), worker_([this] { run(); }) {}
  JobQueue(const JobQueue&) = delete;
  JobQueue& operator=(const JobQueue&) = delete;
  ~JobQueue() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    cv_.notify_all();
    worker_.join();
  }

  std::string submit(std::string kind, nlohmann::ordered_json params, Task task) {
    std::lock_guard lock(mutex_);
    Job job{fmt::format("job-{:06d}", ++counter_), std::move(kind), std::move(params), JobStatus::queued, {}, {}};
    record_locked(job);
    jobs_.emplace(job.id, job);
    pending_.emplace_back(job.id, std::move(task));
    cv_.notify_all();
    return job.id;
  }

  Job get(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    require(it != jobs_.end(), ErrorCode::not_found, "unknown job id", id);
    return it->second;
  }

  /// Blocks until the job is terminal.
  Job wait(const std::string& id) const {
    std::unique_lock lock(mutex_);
    require(jobs_.count(id) > 0, ErrorCode::not_found, "unknown job id", id);
    cv_.wait(lock, [&] {
      const auto s = jobs_.at(id).status;
      return s == JobStatus::done || s == JobStatus::failed;
    });
    return jobs_.at(id);
  }

 private:
  void record_locked(const Job& job) { project_.append_job_record(job_to_json(job)); }

  void run() {
    for (;;) {
      std::pair<std::string, Task> next;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return stopping_ || !pending_.empty(); });
        if (pending_.empty()) return;
        next = std::move(pending_.front());
        pending_.pop_front();
        auto& job = jobs_.at(next.first);
        job.status = JobStatus::running;
        record_locked(job);
      }
      std::string result;
      nlohmann::ordered_json diag;
      try {
        result = next.second();
      } catch (const Error& e) {
        diag = error_body(e);
      } catch (const std::exception& e) {
        diag = {{"code", "internal"}, {"message", e.what()}, {"detail", ""}};
      }
      {
        std::lock_guard lock(mutex_);
        auto& job = jobs_.at(next.first);
        job.status = diag.is_null() ? JobStatus::done : JobStatus::failed;
        job.result = result;
        job.diagnostics = diag;
        record_locked(job);
      }
      cv_.notify_all();
    }
  }

  Project& project_;
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::map<std::string, Job> jobs_;
  std::deque<std::pair<std::string, Task>> pending_;
  std::uint64_t counter_ = 0;
  bool stopping_ = false;
  std::thread worker_;
};

/// Operations on a project store. Each stores its output artifact and returns
/// the content id.
class Service {
 public:
  explicit Service(Project& project) : project_(project) {}

  Project& project() noexcept { return project_; }

  std::string select(const SelectRequest& r) {
    const auto img = project_.image(r.image_id);
    const auto painted = project_.mask(r.image_id, r.class_name);
    const auto manifest = run_select(img, painted, r);
    return project_.store(ArtifactKind::manifest, manifest_to_jsonl(manifest),
                          {"select", {r.image_id}, to_json(r)});
  }

  /// Fills in stored hue ranges when the request names none.
  SelectRequest with_stored_ranges(SelectRequest r) const {
    if (!r.hue) r.hue = project_.hue_ranges(r.class_name);
    return r;
  }

  std::string embed(const std::string& manifest_id) {
    const auto manifest = load_manifest(manifest_id);
    std::map<std::string, RgbImage> cache;
    const auto features = run_embed(manifest, [&](const std::string& id) -> const RgbImage& {
      auto it = cache.find(id);
      if (it == cache.end()) it = cache.emplace(id, project_.image(id)).first;
      return it->second;
    });
    return project_.store(ArtifactKind::features, feature_matrix_to_csv(features),
                          {"embed", {manifest_id}, {{"layout_id", features.layout_id()}}});
  }

  std::string train(const std::string& features_id, const std::string& manifest_id,
                    const TrainRequest& r) {
    const auto model = run_train(load_features(features_id), load_manifest(manifest_id), r);
    return project_.store(ArtifactKind::model, model_artifact(model),
                          {"train", {features_id, manifest_id},
                           {{"learner", std::string(short_name(r.learner))}, {"seed", r.seed}}});
  }

  std::string cv(const std::string& features_id, const std::string& manifest_id, const CvRequest& r) {
    const auto out = run_cv(load_features(features_id), load_manifest(manifest_id), r);
    std::vector<std::string> learners;
    for (auto k : r.learners) learners.emplace_back(short_name(k));
    const auto id = project_.store(ArtifactKind::report, out.json,
                                   {"cv", {features_id, manifest_id},
                                    {{"learners", learners}, {"folds", r.folds}, {"seed", r.seed}}});
    project_.store_sidecar(ArtifactKind::report, id, ".csv", out.csv);
    return id;
  }

  std::string predict(const std::string& model_id, const std::string& image_id, int size) {
    const auto model = load_model(model_id);
    const auto map = run_predict(model, project_.image(image_id), size, image_id);
    return project_.store(ArtifactKind::map, map_artifact(map),
                          {"predict", {model_id, image_id}, {{"size", size}}});
  }

  std::string review(const std::string& manifest_id, const nlohmann::json& decisions) {
    const auto out = apply_review(load_manifest(manifest_id), decisions);
    return project_.store(ArtifactKind::manifest, manifest_to_jsonl(out),
                          {"review", {manifest_id}, decisions});
  }

  TileManifest load_manifest(const std::string& id) const {
    return manifest_from_jsonl(project_.load(ArtifactKind::manifest, id));
  }
  FeatureMatrix load_features(const std::string& id) const {
    return feature_matrix_from_csv(project_.load(ArtifactKind::features, id));
  }
  Model load_model(const std::string& id) const {
    return model_from_json(nlohmann::json::parse(project_.load(ArtifactKind::model, id)));
  }
  PredictionMap load_map(const std::string& id) const {
    return map_from_json(nlohmann::json::parse(project_.load(ArtifactKind::map, id)));
  }

 private:
  Project& project_;
};

}  // namespace vegmap
