#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "vegmap/error.hpp"
#include "vegmap/learners/matrix.hpp"

namespace vegmap {

struct KnnOptions {
  int k = 5;
};

/// Euclidean k-nearest neighbours with a uniform vote. Stores its training set.
struct KnnModel {
  int k = 5;
  Matrix points;
  std::vector<int> labels;
  std::size_t classes = 0;

  static KnnModel fit(const KnnOptions& opt, Matrix x, std::vector<int> y, std::size_t classes) {
    require(opt.k >= 1, ErrorCode::invalid_argument, "kNN requires k >= 1");
    return {opt.k, std::move(x), std::move(y), classes};
  }

  std::vector<double> predict_proba(std::span<const double> x) const {
    std::vector<std::pair<double, std::size_t>> d(points.rows);
    for (std::size_t i = 0; i < points.rows; ++i) d[i] = {squared_distance(points.row(i), x), i};
    const std::size_t k_eff = std::min<std::size_t>(static_cast<std::size_t>(k), d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k_eff), d.end());
    std::vector<double> p(classes, 0.0);
    for (std::size_t i = 0; i < k_eff; ++i) p[static_cast<std::size_t>(labels[d[i].second])] += 1.0;
    for (auto& v : p) v /= static_cast<double>(k_eff);
    return p;
  }

  nlohmann::ordered_json to_json() const {
    return {{"k", k}, {"dim", points.cols}, {"points", points.data}, {"labels", labels}};
  }

  static KnnModel from_json(const nlohmann::json& j, std::size_t classes) {
    KnnModel m;
    m.k = j.at("k").get<int>();
    m.labels = j.at("labels").get<std::vector<int>>();
    m.points.cols = j.at("dim").get<std::size_t>();
    m.points.data = j.at("points").get<std::vector<double>>();
    m.points.rows = m.labels.size();
    m.classes = classes;
    require(m.points.data.size() == m.points.rows * m.points.cols, ErrorCode::parse_error,
            "kNN point matrix size mismatch");
    return m;
  }
};

}  // namespace vegmap
