#pragma once

// Stratified k-fold cross-validation, leave-one-out style spot validation, and
// multi-model focus-class coverage.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "vegmap/learners/metrics.hpp"
#include "vegmap/learners/model.hpp"
#include "vegmap/rng.hpp"

namespace vegmap {

/// Fold index per row: rows of each class are shuffled with `seed` and dealt
/// round-robin, continuing the deal where the previous class stopped.
inline std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed) {
  require(k >= 2, ErrorCode::invalid_argument, "cross-validation needs k >= 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [label, rows] : by_class) {
    require(rows.size() >= static_cast<std::size_t>(k), ErrorCode::degenerate_data,
            "class has fewer rows than folds",
            fmt::format("class {} has {} rows, k = {}", label, rows.size(), k));
  }
  Rng rng(seed);
  std::vector<int> fold(labels.size(), -1);
  int next = 0;
  for (auto& [label, rows] : by_class) {
    rng.shuffle(std::span<std::size_t>(rows));
    for (auto r : rows) {
      fold[r] = next;
      next = (next + 1) % k;
    }
  }
  return fold;
}

struct CvRow {
  std::string dataset;
  std::size_t images = 0;
  LearnerKind learner = LearnerKind::knn;
  double train_time = 0.0;  ///< seconds, summed over folds
  double test_time = 0.0;
  std::optional<MetricSet> metrics;  ///< empty when fitting failed
  std::optional<ConfusionMatrix> confusion;
  std::string error;
  std::string diagnostics;
};

struct CvReport {
  std::vector<CvRow> rows;
};

/// For each config: fit on k-1 folds, predict the held-out fold, pool every
/// held-out prediction, then score the pool once. A failing learner yields a
/// row with `error` set; the others still run.
inline CvReport cross_validate(const std::vector<LearnerConfig>& cfgs, const LabeledDataset& data,
                               int k, std::uint64_t seed, const std::string& dataset_name = "") {
  data.validate();
  const auto folds = stratified_folds(data.labels, k, seed);
  CvReport report;
  for (const auto& cfg : cfgs) {
    CvRow row;
    row.dataset = dataset_name;
    row.images = data.rows();
    row.learner = cfg.kind;
    try {
      Predictions pooled{data.labels, Matrix(data.rows(), data.classes())};
      for (int f = 0; f < k; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < data.rows(); ++i) (folds[i] == f ? test : train).push_back(i);
        LearnerConfig fold_cfg = cfg;
        fold_cfg.seed = Rng::derive(cfg.seed, static_cast<std::uint64_t>(f));
        const auto t0 = std::chrono::steady_clock::now();
        const auto model = fit(fold_cfg, data.subset(train));
        const auto t1 = std::chrono::steady_clock::now();
        for (auto i : test) {
          const auto p = model.predict_proba(data.matrix.row(i));
          std::copy(p.begin(), p.end(), pooled.proba.row(i).begin());
        }
        const auto t2 = std::chrono::steady_clock::now();
        row.train_time += std::chrono::duration<double>(t1 - t0).count();
        row.test_time += std::chrono::duration<double>(t2 - t1).count();
        const auto diag = model.diagnostics();
        if (!diag.empty() && row.diagnostics.empty()) row.diagnostics = diag;
      }
      row.metrics = evaluate(pooled);
      row.confusion = confusion(pooled.actual, pooled.predicted(), data.class_list);
    } catch (const Error& e) {
      row.error = e.detail().empty() ? e.what() : std::string(e.what()) + ": " + e.detail();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

inline constexpr const char* kCvCsvHeader =
    "dataset,images,model,train_time,test_time,AUC,CA,F1,Precision,Recall,LogLoss,Specificity";

/// Appendix-style CSV. Timing cells are left empty unless `include_times`,
/// keeping the artifact byte-stable across runs.
inline std::string cv_report_to_csv(const CvReport& r, bool include_times = false) {
  std::string out = std::string(kCvCsvHeader) + "\n";
  for (const auto& row : r.rows) {
    out += fmt::format("{},{},{},", row.dataset, row.images, display_name(row.learner));
    if (include_times) {
      out += fmt::format("{:.3f},{:.3f}", row.train_time, row.test_time);
    } else {
      out += ",";
    }
    if (row.metrics) {
      const auto& m = *row.metrics;
      out += fmt::format(",{},{},{},{},{},{},{}\n", m.auc, m.ca, m.f1, m.precision, m.recall,
                         m.log_loss, m.specificity);
    } else {
      out += ",,,,,,,\n";
    }
  }
  return out;
}

inline nlohmann::ordered_json cv_report_to_json(const CvReport& r, bool include_times = false) {
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json j;
    j["dataset"] = row.dataset;
    j["images"] = row.images;
    j["model"] = std::string(display_name(row.learner));
    if (include_times) {
      j["train_time"] = row.train_time;
      j["test_time"] = row.test_time;
    }
    if (row.metrics) {
      const auto& m = *row.metrics;
      j["metrics"] = {{"AUC", m.auc},       {"CA", m.ca},         {"F1", m.f1},
                      {"Precision", m.precision}, {"Recall", m.recall}, {"LogLoss", m.log_loss},
                      {"Specificity", m.specificity}};
    }
    if (row.confusion) j["confusion"] = row.confusion->to_json();
    if (!row.error.empty()) j["error"] = row.error;
    if (!row.diagnostics.empty()) j["diagnostics"] = row.diagnostics;
    rows.push_back(std::move(j));
  }
  return {{"rows", std::move(rows)}};
}

struct LooRecord {
  std::size_t row = 0;
  TileSpec tile;
  int actual = 0;
  int predicted = 0;
  std::vector<double> proba;
  std::size_t train_rows = 0;
};

/// ceil(fraction * n), robust to representation error in the product.
inline std::size_t sample_count(double fraction, std::size_t n) {
  return std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));
}

/// Seeded stratified sample of `m` rows; per-class quotas by largest remainder
/// (ties to the earlier class). Returned in ascending row order.
inline std::vector<std::size_t> stratified_sample(std::span<const int> labels, std::size_t m,
                                                  std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  const double n = static_cast<double>(labels.size());
  std::vector<std::pair<int, std::size_t>> quota;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  std::size_t idx = 0;
  for (const auto& [label, rows] : by_class) {
    const double exact = static_cast<double>(m) * static_cast<double>(rows.size()) / n;
    const auto base = static_cast<std::size_t>(std::floor(exact + 1e-9));
    quota.emplace_back(label, base);
    remainders.emplace_back(exact - static_cast<double>(base), idx++);
    assigned += base;
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < m && i < remainders.size(); ++i, ++assigned) {
    ++quota[remainders[i].second].second;
  }
  Rng rng(seed);
  std::vector<std::size_t> out;
  for (const auto& [label, count] : quota) {
    auto rows = by_class[label];
    rng.shuffle(std::span<std::size_t>(rows));
    out.insert(out.end(), rows.begin(),
               rows.begin() + static_cast<std::ptrdiff_t>(std::min(count, rows.size())));
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Samples ceil(fraction * N) rows (seeded, stratified); each is predicted by a
/// model trained on the other N - 1 rows.
inline std::vector<LooRecord> loo_validate(const LearnerConfig& cfg, const LabeledDataset& data,
                                           double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction <= 1.0, ErrorCode::invalid_argument,
          "fraction must lie in (0, 1]");
  require(data.rows() >= 2, ErrorCode::degenerate_data, "validation needs at least two rows");
  data.validate();
  const auto sample = stratified_sample(data.labels, sample_count(fraction, data.rows()), seed);
  std::vector<LooRecord> out;
  for (auto held : sample) {
    std::vector<std::size_t> train;
    train.reserve(data.rows() - 1);
    for (std::size_t i = 0; i < data.rows(); ++i) {
      if (i != held) train.push_back(i);
    }
    const auto model = fit(cfg, data.subset(train));
    LooRecord rec;
    rec.row = held;
    rec.tile = data.matrix.key(held);
    rec.actual = data.labels[held];
    rec.proba = model.predict_proba(data.matrix.row(held));
    rec.predicted = static_cast<int>(argmax(rec.proba));
    rec.train_rows = model.training_rows;
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::string loo_records_to_jsonl(const std::vector<LooRecord>& records,
                                        const std::vector<std::string>& classes) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["image_id"] = r.tile.image_id;
    j["x"] = r.tile.x;
    j["y"] = r.tile.y;
    j["size"] = r.tile.size;
    j["actual"] = classes[static_cast<std::size_t>(r.actual)];
    j["predicted"] = classes[static_cast<std::size_t>(r.predicted)];
    j["probability_actual"] = r.proba[static_cast<std::size_t>(r.actual)];
    j["probability_predicted"] = r.proba[static_cast<std::size_t>(r.predicted)];
    j["proba"] = r.proba;
    j["train_rows"] = r.train_rows;
    out += j.dump();
    out += '\n';
  }
  return out;
}

struct FocusCoverage {
  std::string focus;
  std::vector<std::vector<std::size_t>> accepted;  ///< per model, ascending row indices
  std::vector<std::size_t> union_rows;
  std::size_t total = 0;
  double fraction = 0.0;
};

/// Tiles each model assigns to `focus` with probability strictly above its
/// threshold, and the union across models.
inline FocusCoverage focus_coverage(const std::vector<Model>& models, const FeatureMatrix& tiles,
                                    const std::string& focus, std::span<const double> thresholds) {
  require(!models.empty(), ErrorCode::invalid_argument, "at least one model is required");
  require(thresholds.size() == models.size(), ErrorCode::invalid_argument,
          "one threshold per model is required");
  FocusCoverage out;
  out.focus = focus;
  out.total = tiles.rows();
  std::set<std::size_t> all;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& model = models[m];
    require(model.layout_id == tiles.layout_id() && model.dim == tiles.dim(),
            ErrorCode::layout_mismatch, "tile features do not match model layout",
            model.layout_id + " vs " + tiles.layout_id());
    require(thresholds[m] >= 0.0 && thresholds[m] < 1.0, ErrorCode::invalid_argument,
            "thresholds must lie in [0, 1)");
    const auto it = std::find(model.class_list.begin(), model.class_list.end(), focus);
    require(it != model.class_list.end(), ErrorCode::invalid_argument,
            "focus class unknown to model", focus);
    const auto c = static_cast<std::size_t>(it - model.class_list.begin());
    std::vector<std::size_t> acc;
    for (std::size_t r = 0; r < tiles.rows(); ++r) {
      if (model.predict_proba(tiles.row(r))[c] > thresholds[m]) acc.push_back(r);
    }
    all.insert(acc.begin(), acc.end());
    out.accepted.push_back(std::move(acc));
  }
  out.union_rows.assign(all.begin(), all.end());
  out.fraction = out.total ? static_cast<double>(out.union_rows.size()) / static_cast<double>(out.total)
                           : 0.0;
  return out;
}

inline nlohmann::ordered_json focus_coverage_to_json(const FocusCoverage& f,
                                                     const std::vector<Model>& models,
                                                     std::span<const double> thresholds,
                                                     const FeatureMatrix& tiles) {
  auto per = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < f.accepted.size(); ++m) {
    per.push_back({{"model", std::string(short_name(models[m].kind))},
                   {"threshold", thresholds[m]},
                   {"count", f.accepted[m].size()}});
  }
  auto keys = nlohmann::ordered_json::array();
  for (auto r : f.union_rows) {
    const auto& k = tiles.key(r);
    keys.push_back({{"image_id", k.image_id}, {"x", k.x}, {"y", k.y}, {"size", k.size}});
  }
  return {{"focus", f.focus},  {"total", f.total},  {"union_count", f.union_rows.size()},
          {"fraction", f.fraction}, {"per_model", per}, {"union", keys}};
}

}  // namespace vegmap
