#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "vegmap/feature_matrix.hpp"

namespace vegmap {

struct RankedFeatures {
  std::vector<double> scores;     ///< one-way ANOVA F per feature; +inf for perfect separation
  std::vector<std::size_t> order; ///< feature indices by descending score, index tie-break

  std::vector<std::size_t> top(std::size_t k) const {
    return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(k, order.size()))};
  }
};

/// Scores every feature by its one-way ANOVA F statistic across the classes in
/// `labels` (arbitrary integer class ids, one per row).
inline RankedFeatures rank_features(const FeatureMatrix& m, std::span<const int> labels) {
  require(labels.size() == m.rows(), ErrorCode::dimension_mismatch,
          "label count differs from row count");
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  require(groups.size() >= 2, ErrorCode::degenerate_data, "ranking needs at least two classes");
  for (const auto& [label, rows] : groups) {
    require(rows.size() >= 2, ErrorCode::degenerate_data, "each class needs at least two rows",
            fmt::format("class {} has {}", label, rows.size()));
  }

  const double n = static_cast<double>(m.rows());
  const double k = static_cast<double>(groups.size());
  RankedFeatures out;
  out.scores.resize(m.dim(), 0.0);
  for (std::size_t f = 0; f < m.dim(); ++f) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, total = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const double v = m.row(i)[f];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      total += v;
    }
    if (lo == hi) continue;
    const double grand = total / n;
    double between = 0.0, within = 0.0;
    for (const auto& [label, rows] : groups) {
      double sum = 0.0;
      for (auto r : rows) sum += m.row(r)[f];
      const double mean = sum / static_cast<double>(rows.size());
      between += static_cast<double>(rows.size()) * (mean - grand) * (mean - grand);
      for (auto r : rows) {
        const double d = m.row(r)[f] - mean;
        within += d * d;
      }
    }
    if (within <= 0.0) {
      out.scores[f] = std::numeric_limits<double>::infinity();
    } else {
      out.scores[f] = (between / (k - 1.0)) / (within / (n - k));
    }
  }
  out.order.resize(m.dim());
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
    return out.scores[a] > out.scores[b];
  });
  return out;
}

}  // namespace vegmap
