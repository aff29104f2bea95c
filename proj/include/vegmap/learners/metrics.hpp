#pragma once

// Classification metrics over pooled predictions. Per-class quantities are
// averaged with weights equal to class prevalence among the actual labels.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vegmap/error.hpp"
#include "vegmap/learners/matrix.hpp"

namespace vegmap {

/// Rows = predictions, columns = class probabilities.
struct Predictions {
  std::vector<int> actual;
  Matrix proba;

  std::size_t size() const noexcept { return actual.size(); }
  std::size_t classes() const noexcept { return proba.cols; }

  std::vector<int> predicted() const {
    std::vector<int> out(actual.size());
    for (std::size_t i = 0; i < actual.size(); ++i) {
      const auto row = proba.row(i);
      std::size_t best = 0;
      for (std::size_t c = 1; c < row.size(); ++c) {
        if (row[c] > row[best]) best = c;
      }
      out[i] = static_cast<int>(best);
    }
    return out;
  }
};

/// Binary AUC by the Mann-Whitney statistic with average ranks for ties.
inline double binary_auc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  require(n_pos > 0 && n_neg > 0, ErrorCode::degenerate_data,
          "AUC needs both positive and negative examples");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

inline std::vector<double> class_weights(const Predictions& p) {
  std::vector<double> w(p.classes(), 0.0);
  for (int a : p.actual) w[static_cast<std::size_t>(a)] += 1.0;
  for (auto& v : w) v /= static_cast<double>(p.size());
  return w;
}

/// Prevalence-weighted one-vs-rest AUC. Classes absent from `actual` get weight 0.
inline double auc(const Predictions& p) {
  require(p.size() >= 1, ErrorCode::invalid_argument, "no predictions");
  const auto w = class_weights(p);
  std::size_t present = 0;
  for (double v : w) present += v > 0.0 ? 1 : 0;
  require(present >= 2, ErrorCode::degenerate_data, "AUC needs at least two classes present");
  std::vector<double> scores(p.size());
  std::vector<std::uint8_t> pos(p.size());
  double total = 0.0;
  for (std::size_t c = 0; c < p.classes(); ++c) {
    if (w[c] <= 0.0) continue;
    for (std::size_t i = 0; i < p.size(); ++i) {
      scores[i] = p.proba(i, c);
      pos[i] = p.actual[i] == static_cast<int>(c) ? 1 : 0;
    }
    total += w[c] * binary_auc(scores, pos);
  }
  return total;
}

inline double classification_accuracy(const Predictions& p) {
  require(p.size() >= 1, ErrorCode::invalid_argument, "no predictions");
  const auto pred = p.predicted();
  std::size_t hit = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hit += pred[i] == p.actual[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(p.size());
}

struct ClassCounts {
  std::vector<double> tp, fp, fn, tn;
};

inline ClassCounts class_counts(const Predictions& p) {
  const auto pred = p.predicted();
  const std::size_t k = p.classes();
  ClassCounts c{std::vector<double>(k), std::vector<double>(k), std::vector<double>(k),
                std::vector<double>(k)};
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t cls = 0; cls < k; ++cls) {
      const bool is_actual = p.actual[i] == static_cast<int>(cls);
      const bool is_pred = pred[i] == static_cast<int>(cls);
      if (is_actual && is_pred) c.tp[cls] += 1;
      else if (!is_actual && is_pred) c.fp[cls] += 1;
      else if (is_actual && !is_pred) c.fn[cls] += 1;
      else c.tn[cls] += 1;
    }
  }
  return c;
}

namespace detail {
inline double safe_div(double a, double b) { return b > 0.0 ? a / b : 0.0; }
}  // namespace detail

inline double precision(const Predictions& p) {
  const auto c = class_counts(p);
  const auto w = class_weights(p);
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * detail::safe_div(c.tp[k], c.tp[k] + c.fp[k]);
  return s;
}

inline double recall(const Predictions& p) {
  const auto c = class_counts(p);
  const auto w = class_weights(p);
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * detail::safe_div(c.tp[k], c.tp[k] + c.fn[k]);
  return s;
}

inline double f1(const Predictions& p) {
  const auto c = class_counts(p);
  const auto w = class_weights(p);
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double pr = detail::safe_div(c.tp[k], c.tp[k] + c.fp[k]);
    const double re = detail::safe_div(c.tp[k], c.tp[k] + c.fn[k]);
    s += w[k] * detail::safe_div(2.0 * pr * re, pr + re);
  }
  return s;
}

inline double specificity(const Predictions& p) {
  const auto c = class_counts(p);
  const auto w = class_weights(p);
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * detail::safe_div(c.tn[k], c.tn[k] + c.fp[k]);
  return s;
}

inline constexpr double kLogLossClip = 1e-15;

inline double log_loss(const Predictions& p) {
  require(p.size() >= 1, ErrorCode::invalid_argument, "no predictions");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p.proba(i, static_cast<std::size_t>(p.actual[i])), kLogLossClip,
                                1.0 - kLogLossClip);
    s -= std::log(q);
  }
  return s / static_cast<double>(p.size());
}

struct MetricSet {
  double auc = 0.0;
  double ca = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double log_loss = 0.0;
  double specificity = 0.0;
};

inline MetricSet evaluate(const Predictions& p) {
  return {auc(p), classification_accuracy(p), f1(p), precision(p),
          recall(p), log_loss(p), specificity(p)};
}

/// counts[predicted][actual]; percent is normalized per actual class (column).
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::vector<double>> percent;

  double accuracy() const {
    std::size_t diag = 0, total = 0;
    for (std::size_t p = 0; p < counts.size(); ++p) {
      for (std::size_t a = 0; a < counts.size(); ++a) {
        total += counts[p][a];
        if (p == a) diag += counts[p][a];
      }
    }
    return total ? static_cast<double>(diag) / static_cast<double>(total) : 0.0;
  }

  nlohmann::ordered_json to_json() const {
    return {{"classes", classes},
            {"orientation", "counts[predicted][actual], percent per actual class"},
            {"counts", counts},
            {"percent", percent}};
  }
};

inline ConfusionMatrix confusion(std::span<const int> actual, std::span<const int> predicted,
                                 std::vector<std::string> classes) {
  require(actual.size() == predicted.size(), ErrorCode::dimension_mismatch,
          "actual and predicted label sequences differ in length");
  const std::size_t k = classes.size();
  ConfusionMatrix cm{std::move(classes), std::vector<std::vector<std::size_t>>(k, std::vector<std::size_t>(k, 0)),
                     std::vector<std::vector<double>>(k, std::vector<double>(k, 0.0))};
  for (std::size_t i = 0; i < actual.size(); ++i) {
    require(actual[i] >= 0 && static_cast<std::size_t>(actual[i]) < k && predicted[i] >= 0 &&
                static_cast<std::size_t>(predicted[i]) < k,
            ErrorCode::invalid_argument, "label outside class list");
    ++cm.counts[static_cast<std::size_t>(predicted[i])][static_cast<std::size_t>(actual[i])];
  }
  for (std::size_t a = 0; a < k; ++a) {
    std::size_t col = 0;
    for (std::size_t p = 0; p < k; ++p) col += cm.counts[p][a];
    if (col == 0) continue;
    for (std::size_t p = 0; p < k; ++p) {
      cm.percent[p][a] = 100.0 * static_cast<double>(cm.counts[p][a]) / static_cast<double>(col);
    }
  }
  return cm;
}

}  // namespace vegmap
