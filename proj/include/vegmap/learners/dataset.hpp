#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "vegmap/feature_matrix.hpp"
#include "vegmap/learners/matrix.hpp"
#include "vegmap/tiling.hpp"

namespace vegmap {

/// Feature matrix plus one class index per row into `class_list`.
struct LabeledDataset {
  FeatureMatrix matrix;
  std::vector<int> labels;
  std::vector<std::string> class_list;

  std::size_t rows() const noexcept { return matrix.rows(); }
  std::size_t classes() const noexcept { return class_list.size(); }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(class_list.size(), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    return counts;
  }

  LabeledDataset subset(std::span<const std::size_t> rows_) const {
    LabeledDataset out{matrix.select(rows_), {}, class_list};
    out.labels.reserve(rows_.size());
    for (auto r : rows_) out.labels.push_back(labels[r]);
    return out;
  }

  void validate() const {
    require(labels.size() == matrix.rows(), ErrorCode::dimension_mismatch,
            "label count differs from row count");
    for (int l : labels) {
      require(l >= 0 && static_cast<std::size_t>(l) < class_list.size(),
              ErrorCode::invalid_argument, "label outside class list");
    }
  }
};

/// Labels each feature row from the manifest entry with the same tile key.
/// Rows without a trainable entry (unlabelled or rejected) are dropped. The
/// class list is `classes` when given, else the sorted distinct labels.
inline LabeledDataset dataset_from_manifest(const FeatureMatrix& features,
                                            const TileManifest& manifest,
                                            std::vector<std::string> classes = {}) {
  std::map<TileSpec, std::string> label_of;
  for (const auto& e : manifest.trainable()) label_of.emplace(e.tile, *e.label);
  if (classes.empty()) {
    for (const auto& [tile, label] : label_of) {
      if (std::find(classes.begin(), classes.end(), label) == classes.end()) classes.push_back(label);
    }
    std::sort(classes.begin(), classes.end());
  }
  LabeledDataset out{FeatureMatrix(features.layout_id(), features.dim()), {}, classes};
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto it = label_of.find(features.key(r));
    if (it == label_of.end()) continue;
    auto cls = std::find(classes.begin(), classes.end(), it->second);
    require(cls != classes.end(), ErrorCode::invalid_argument, "label not in class list",
            it->second);
    out.matrix.add_row(features.key(r), features.row(r));
    out.labels.push_back(static_cast<int>(cls - classes.begin()));
  }
  return out;
}

/// Per-feature z-scoring fitted on training rows. Constant features keep scale 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const FeatureMatrix& m) {
    Standardizer s;
    const std::size_t d = m.dim();
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 1.0);
    const double n = static_cast<double>(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto row = m.row(r);
      for (std::size_t c = 0; c < d; ++c) s.mean[c] += row[c];
    }
    for (auto& v : s.mean) v /= n;
    std::vector<double> var(d, 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto row = m.row(r);
      for (std::size_t c = 0; c < d; ++c) var[c] += (row[c] - s.mean[c]) * (row[c] - s.mean[c]);
    }
    for (std::size_t c = 0; c < d; ++c) {
      const double sd = std::sqrt(var[c] / n);
      s.scale[c] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
  }

  static Standardizer identity(std::size_t d) {
    return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  }

  void apply(std::span<const double> in, std::span<double> out) const {
    for (std::size_t c = 0; c < in.size(); ++c) out[c] = (in[c] - mean[c]) / scale[c];
  }

  std::vector<double> apply(std::span<const double> in) const {
    std::vector<double> out(in.size());
    apply(in, out);
    return out;
  }

  Matrix transform(const FeatureMatrix& m) const {
    Matrix out(m.rows(), m.dim());
    for (std::size_t r = 0; r < m.rows(); ++r) apply(m.row(r), out.row(r));
    return out;
  }
};

inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

inline void softmax_inplace(std::span<double> z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : z) v /= sum;
}

}  // namespace vegmap
