#pragma once

// CART-style classification tree (Gini gain) and a bagged random forest built
// from the same tree learner.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "vegmap/learners/dataset.hpp"
#include "vegmap/rng.hpp"

namespace vegmap {

struct TreeOptions {
  int max_depth = 100;
  int min_samples_split = 5;
  int min_samples_leaf = 2;
  int max_features = 0;  ///< features tried per split; 0 or >= D means all, in index order
};

struct TreeNode {
  int feature = -1;  ///< -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> proba;  ///< leaves only: Laplace-smoothed class frequencies
};

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

inline double gini(std::span<const double> counts, double total) {
  if (total <= 0.0) return 0.0;
  double s = 0.0;
  for (double c : counts) s += (c / total) * (c / total);
  return 1.0 - s;
}

/// Best Gini-gain split of `rows` over `features`. Candidate thresholds are
/// midpoints between consecutive distinct values; both sides must keep at
/// least `min_leaf` rows. Ties keep the earlier feature / lower threshold.
inline std::optional<SplitCandidate> best_split(const Matrix& x, std::span<const int> y,
                                                std::size_t classes,
                                                std::span<const std::size_t> rows,
                                                std::span<const int> features, int min_leaf) {
  const std::size_t n = rows.size();
  std::vector<double> parent(classes, 0.0);
  for (auto r : rows) parent[static_cast<std::size_t>(y[r])] += 1.0;
  const double g_parent = gini(parent, static_cast<double>(n));

  std::optional<SplitCandidate> best;
  std::vector<std::size_t> order(rows.begin(), rows.end());
  std::vector<double> left(classes), right(classes);
  for (int f : features) {
    const auto fu = static_cast<std::size_t>(f);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x(a, fu) < x(b, fu); });
    std::fill(left.begin(), left.end(), 0.0);
    right = parent;
    for (std::size_t i = 1; i < n; ++i) {
      const auto moved = static_cast<std::size_t>(y[order[i - 1]]);
      left[moved] += 1.0;
      right[moved] -= 1.0;
      const double a = x(order[i - 1], fu), b = x(order[i], fu);
      if (!(a < b)) continue;
      if (static_cast<int>(i) < min_leaf || static_cast<int>(n - i) < min_leaf) continue;
      const double nl = static_cast<double>(i), nr = static_cast<double>(n - i);
      const double gain = g_parent - (nl / n) * gini(left, nl) - (nr / n) * gini(right, nr);
      if (!best || gain > best->gain + 1e-12) {
        double thr = a + (b - a) / 2.0;
        if (!(thr < b)) thr = a;
        best = SplitCandidate{f, thr, gain};
      }
    }
  }
  if (!best || best->gain <= 1e-12) return std::nullopt;
  return best;
}

struct TreeModel {
  std::size_t classes = 0;
  std::vector<TreeNode> nodes;

  static TreeModel fit(const TreeOptions& opt, const Matrix& x, std::span<const int> y,
                       std::size_t classes, std::span<const std::size_t> rows, Rng* rng) {
    require(opt.max_depth >= 1, ErrorCode::invalid_argument, "max_depth must be >= 1");
    require(opt.min_samples_split >= 2, ErrorCode::invalid_argument,
            "min_samples_split must be >= 2");
    require(opt.min_samples_leaf >= 1, ErrorCode::invalid_argument, "min_samples_leaf must be >= 1");
    require(opt.max_features >= 0, ErrorCode::invalid_argument, "max_features must be >= 0");
    TreeModel m;
    m.classes = classes;
    std::vector<std::size_t> r(rows.begin(), rows.end());
    m.build(opt, x, y, r, 0, rng);
    return m;
  }

  static TreeModel fit(const TreeOptions& opt, const Matrix& x, std::span<const int> y,
                       std::size_t classes) {
    std::vector<std::size_t> rows(x.rows);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return fit(opt, x, y, classes, rows, nullptr);
  }

  const std::vector<double>& leaf_for(std::span<const double> x) const {
    int idx = 0;
    while (nodes[static_cast<std::size_t>(idx)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(idx)];
      idx = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(idx)].proba;
  }

  std::vector<double> predict_proba(std::span<const double> x) const { return leaf_for(x); }

  int depth() const { return depth_of(0); }

  nlohmann::ordered_json to_json() const {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& n : nodes) {
      if (n.feature < 0) {
        arr.push_back({{"proba", n.proba}});
      } else {
        arr.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left},
                       {"right", n.right}});
      }
    }
    return {{"nodes", std::move(arr)}};
  }

  static TreeModel from_json(const nlohmann::json& j, std::size_t classes) {
    TreeModel m;
    m.classes = classes;
    for (const auto& item : j.at("nodes")) {
      TreeNode n;
      if (item.contains("proba")) {
        n.proba = item.at("proba").get<std::vector<double>>();
        require(n.proba.size() == classes, ErrorCode::parse_error, "leaf distribution size");
      } else {
        n.feature = item.at("feature").get<int>();
        n.threshold = item.at("threshold").get<double>();
        n.left = item.at("left").get<int>();
        n.right = item.at("right").get<int>();
      }
      m.nodes.push_back(std::move(n));
    }
    require(!m.nodes.empty(), ErrorCode::parse_error, "tree has no nodes");
    return m;
  }

 private:
  int depth_of(int idx) const {
    const auto& n = nodes[static_cast<std::size_t>(idx)];
    if (n.feature < 0) return 0;
    return 1 + std::max(depth_of(n.left), depth_of(n.right));
  }

  int make_leaf(std::span<const int> y, std::span<const std::size_t> rows) {
    TreeNode leaf;
    leaf.proba.assign(classes, 1.0);
    for (auto r : rows) leaf.proba[static_cast<std::size_t>(y[r])] += 1.0;
    const double total = static_cast<double>(rows.size() + classes);
    for (auto& p : leaf.proba) p /= total;
    nodes.push_back(std::move(leaf));
    return static_cast<int>(nodes.size() - 1);
  }

  int build(const TreeOptions& opt, const Matrix& x, std::span<const int> y,
            std::vector<std::size_t>& rows, int depth, Rng* rng) {
    bool pure = true;
    for (auto r : rows) pure = pure && y[r] == y[rows.front()];
    if (pure || static_cast<int>(rows.size()) < opt.min_samples_split || depth >= opt.max_depth) {
      return make_leaf(y, rows);
    }
    const int d = static_cast<int>(x.cols);
    std::vector<int> features(static_cast<std::size_t>(d));
    std::iota(features.begin(), features.end(), 0);
    if (opt.max_features > 0 && opt.max_features < d && rng) {
      for (int i = 0; i < opt.max_features; ++i) {
        const auto j = static_cast<std::size_t>(i) +
                       static_cast<std::size_t>(rng->below(static_cast<std::uint64_t>(d - i)));
        std::swap(features[static_cast<std::size_t>(i)], features[j]);
      }
      features.resize(static_cast<std::size_t>(opt.max_features));
      std::sort(features.begin(), features.end());
    }
    const auto split = best_split(x, y, classes, rows, features, opt.min_samples_leaf);
    if (!split) return make_leaf(y, rows);

    std::vector<std::size_t> left_rows, right_rows;
    const auto fu = static_cast<std::size_t>(split->feature);
    for (auto r : rows) (x(r, fu) <= split->threshold ? left_rows : right_rows).push_back(r);

    const int self = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{split->feature, split->threshold, -1, -1, {}});
    const int l = build(opt, x, y, left_rows, depth + 1, rng);
    const int r = build(opt, x, y, right_rows, depth + 1, rng);
    nodes[static_cast<std::size_t>(self)].left = l;
    nodes[static_cast<std::size_t>(self)].right = r;
    return self;
  }
};

struct ForestOptions {
  int trees = 10;
  bool bootstrap = true;
  int max_features = 0;  ///< 0 means ceil(sqrt(D))
  TreeOptions tree{};
};

struct ForestModel {
  std::size_t classes = 0;
  std::vector<TreeModel> trees;

  static ForestModel fit(const ForestOptions& opt, const Matrix& x, std::span<const int> y,
                         std::size_t classes, std::uint64_t seed) {
    require(opt.trees >= 1, ErrorCode::invalid_argument, "forest needs at least one tree");
    ForestModel m;
    m.classes = classes;
    TreeOptions topt = opt.tree;
    topt.max_features = opt.max_features > 0
                            ? opt.max_features
                            : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(x.cols))));
    for (int t = 0; t < opt.trees; ++t) {
      Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(t)));
      std::vector<std::size_t> rows(x.rows);
      if (opt.bootstrap) {
        for (auto& r : rows) r = static_cast<std::size_t>(rng.below(x.rows));
        std::sort(rows.begin(), rows.end());
      } else {
        std::iota(rows.begin(), rows.end(), std::size_t{0});
      }
      m.trees.push_back(TreeModel::fit(topt, x, y, classes, rows, &rng));
    }
    return m;
  }

  std::vector<double> predict_proba(std::span<const double> x) const {
    std::vector<double> p(classes, 0.0);
    for (const auto& t : trees) {
      const auto& leaf = t.leaf_for(x);
      for (std::size_t c = 0; c < classes; ++c) p[c] += leaf[c];
    }
    for (auto& v : p) v /= static_cast<double>(trees.size());
    return p;
  }

  nlohmann::ordered_json to_json() const {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& t : trees) arr.push_back(t.to_json());
    return {{"trees", std::move(arr)}};
  }

  static ForestModel from_json(const nlohmann::json& j, std::size_t classes) {
    ForestModel m;
    m.classes = classes;
    for (const auto& t : j.at("trees")) m.trees.push_back(TreeModel::from_json(t, classes));
    require(!m.trees.empty(), ErrorCode::parse_error, "forest has no trees");
    return m;
  }
};

}  // namespace vegmap
