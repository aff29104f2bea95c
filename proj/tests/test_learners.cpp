#include <gtest/gtest.h>

#include <cmath>

#include "vegmap/learners/model.hpp"
#include "vegmap/rng.hpp"

using namespace vegmap;

namespace {

LabeledDataset blobs(std::size_t per_class, std::uint64_t seed, double spread = 0.6) {
  Rng rng(seed);
  const std::vector<std::vector<double>> centers{{0, 0, 0, 0}, {2, 2, 0, 1}, {-2, 1, 2, 0}};
  LabeledDataset d{FeatureMatrix("blob", 4), {}, {"a", "b", "c"}};
  int row = 0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      std::vector<double> v(4);
      for (std::size_t j = 0; j < 4; ++j) v[j] = centers[c][j] + rng.normal(0.0, spread);
      d.matrix.add_row({"img", row++, 0, 1}, v);
      d.labels.push_back(static_cast<int>(c));
    }
  }
  return d;
}

Matrix to_matrix(const FeatureMatrix& m) { return Standardizer::identity(m.dim()).transform(m); }

double accuracy(const Model& m, const LabeledDataset& d) {
  std::size_t hit = 0;
  for (std::size_t r = 0; r < d.rows(); ++r) hit += m.predict(d.matrix.row(r)) == static_cast<std::size_t>(d.labels[r]);
  return static_cast<double>(hit) / static_cast<double>(d.rows());
}

}  // namespace

TEST(Gini, Values) {
  const std::vector<double> pure{4, 0}, even{2, 2}, three{1, 1, 1};
  EXPECT_EQ(gini(pure, 4), 0.0);
  EXPECT_NEAR(gini(even, 4), 0.5, 1e-15);
  EXPECT_NEAR(gini(three, 3), 2.0 / 3, 1e-15);
}

TEST(Gini, BestSplitMatchesExhaustiveSearch) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 6 + rng.below(20), d = 3, k = 3;
    Matrix x(n, d);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x(i, j) = static_cast<double>(rng.below(6));
      y[i] = static_cast<int>(rng.below(k));
    }
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const std::vector<int> features{0, 1, 2};
    const int min_leaf = 2;

    auto g = [&](const std::vector<std::size_t>& rs) {
      std::vector<double> c(k, 0.0);
      for (auto r : rs) c[static_cast<std::size_t>(y[r])] += 1;
      return gini(c, static_cast<double>(rs.size()));
    };
    const double parent = g(rows);
    double best_gain = 1e-12;
    int best_f = -1;
    double best_t = 0;
    for (int f : features) {
      std::vector<double> vals;
      for (auto r : rows) vals.push_back(x(r, static_cast<std::size_t>(f)));
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      for (std::size_t v = 0; v + 1 < vals.size(); ++v) {
        const double t = (vals[v] + vals[v + 1]) / 2;
        std::vector<std::size_t> l, r;
        for (auto i : rows) (x(i, static_cast<std::size_t>(f)) <= t ? l : r).push_back(i);
        if (static_cast<int>(l.size()) < min_leaf || static_cast<int>(r.size()) < min_leaf) continue;
        const double gain = parent - (static_cast<double>(l.size()) / n) * g(l) -
                            (static_cast<double>(r.size()) / n) * g(r);
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_f = f;
          best_t = t;
        }
      }
    }
    const auto split = best_split(x, y, k, rows, features, min_leaf);
    if (best_f < 0) {
      EXPECT_FALSE(split.has_value());
      continue;
    }
    ASSERT_TRUE(split.has_value());
    EXPECT_EQ(split->feature, best_f);
    EXPECT_EQ(split->threshold, best_t);
    EXPECT_NEAR(split->gain, best_gain, 1e-12);
  }
}

TEST(Tree, LeavesAreLaplaceSmoothed) {
  Matrix x(4, 1);
  x(0, 0) = 0;
  x(1, 0) = 1;
  x(2, 0) = 10;
  x(3, 0) = 11;
  const std::vector<int> y{0, 0, 1, 1};
  TreeOptions opt;
  opt.min_samples_split = 2;
  opt.min_samples_leaf = 1;
  const auto t = TreeModel::fit(opt, x, y, 2);
  EXPECT_EQ(t.depth(), 1);
  EXPECT_EQ(t.nodes[0].threshold, 5.5);
  const std::vector<double> probe{0.5};
  EXPECT_NEAR(t.predict_proba(probe)[0], 3.0 / 4, 1e-15);
}

TEST(Tree, RespectsDepthLimit) {
  const auto d = blobs(30, 1, 2.0);
  TreeOptions opt;
  opt.max_depth = 2;
  EXPECT_LE(TreeModel::fit(opt, to_matrix(d.matrix), d.labels, 3).depth(), 2);
}

TEST(Forest, SingleFullTreeEqualsTree) {
  const auto d = blobs(25, 2, 1.5);
  const auto x = to_matrix(d.matrix);
  ForestOptions fo;
  fo.trees = 1;
  fo.bootstrap = false;
  fo.max_features = 4;
  const auto forest = ForestModel::fit(fo, x, d.labels, 3, 99);
  const auto tree = TreeModel::fit(fo.tree, x, d.labels, 3);
  EXPECT_EQ(forest.trees[0].to_json(), tree.to_json());
}

TEST(Knn, TiesResolveToLowerIndex) {
  Matrix x(3, 1);
  x(0, 0) = -1;
  x(1, 0) = 1;
  x(2, 0) = 5;
  const auto m = KnnModel::fit({1}, x, {1, 0, 0}, 2);
  const std::vector<double> probe{0.0};
  EXPECT_EQ(m.predict_proba(probe), (std::vector<double>{0.0, 1.0}));
  const auto m3 = KnnModel::fit({3}, x, {1, 0, 0}, 2);
  EXPECT_NEAR(m3.predict_proba(probe)[0], 2.0 / 3, 1e-15);
  EXPECT_THROW(KnnModel::fit({0}, x, {1, 0, 0}, 2), Error);
}

TEST(Logistic, LossDecreasesAndGradientMatches) {
  const auto d = blobs(20, 3, 1.2);
  const auto x = to_matrix(d.matrix);
  const auto m = LogisticModel::fit({}, x, d.labels, 3);
  ASSERT_GE(m.loss_history.size(), 2u);
  for (std::size_t i = 1; i < m.loss_history.size(); ++i) {
    EXPECT_LT(m.loss_history[i], m.loss_history[i - 1]);
  }
  Rng rng(4);
  std::vector<double> theta(15), grad(15), scratch(15);
  for (auto& t : theta) t = rng.normal(0.0, 0.5);
  LogisticModel::objective(theta, grad, x, d.labels, 3, 1.0);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    auto plus = theta, minus = theta;
    plus[i] += 1e-6;
    minus[i] -= 1e-6;
    const double fd = (LogisticModel::objective(plus, scratch, x, d.labels, 3, 1.0) -
                       LogisticModel::objective(minus, scratch, x, d.labels, 3, 1.0)) / 2e-6;
    EXPECT_NEAR(grad[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Mlp, GradientMatchesFiniteDifference) {
  const MlpShape s{5, 7, 3};
  Rng rng(5);
  auto params = mlp_init(s, rng);
  for (std::size_t i = s.b1(); i < s.w2(); ++i) params[i] = rng.normal(0.0, 0.1);
  Matrix x(9, 5);
  std::vector<int> y(9);
  for (std::size_t r = 0; r < 9; ++r) {
    for (std::size_t c = 0; c < 5; ++c) x(r, c) = rng.normal();
    y[r] = static_cast<int>(r % 3);
  }
  const std::vector<std::size_t> rows{0, 2, 3, 5, 7, 8};
  std::vector<double> grad(s.total()), scratch(s.total());
  mlp_loss_and_gradient(s, params, x, y, rows, 0.3, 9, grad);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto plus = params, minus = params;
    plus[i] += 1e-6;
    minus[i] -= 1e-6;
    const double fd = (mlp_loss_and_gradient(s, plus, x, y, rows, 0.3, 9, scratch) -
                       mlp_loss_and_gradient(s, minus, x, y, rows, 0.3, 9, scratch)) / 2e-6;
    EXPECT_NEAR(grad[i], fd, 1e-6) << "parameter " << i;
  }
}

TEST(Svm, TwoPointDualSolution) {
  Matrix k(2, 2, 1.0);
  const double off = std::exp(-0.5);
  k(0, 1) = k(1, 0) = off;
  const std::vector<std::size_t> subset{0, 1};
  const std::vector<double> y{1.0, -1.0};
  const auto r = solve_smo(k, subset, y, 100.0, 1e-9, 100000);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.alpha[0], 1.0 / (1.0 - off), 1e-6);
  EXPECT_NEAR(r.alpha[1], 1.0 / (1.0 - off), 1e-6);
  EXPECT_NEAR(r.rho, 0.0, 1e-6);
  const auto capped = solve_smo(k, subset, y, 0.5, 1e-9, 100000);
  EXPECT_NEAR(capped.alpha[0], 0.5, 1e-12);
}

TEST(Svm, PlattIsIncreasingInDecisionValue) {
  const std::vector<double> dec{-2, -1.5, -1, -0.2, 0.3, 0.1, 1, 1.4, 2};
  const std::vector<double> lab{-1, -1, -1, 1, -1, 1, 1, 1, 1};
  const auto p = fit_platt(dec, lab);
  EXPECT_LT(p.probability(-1.0), p.probability(1.0));
  EXPECT_GT(p.probability(3.0), 0.5);
  EXPECT_LT(p.probability(-3.0), 0.5);
}

class EveryLearner : public ::testing::TestWithParam<LearnerKind> {};

TEST_P(EveryLearner, FitsSeparableBlobs) {
  const auto d = blobs(30, 6);
  const auto m = fit(LearnerConfig::defaults(GetParam(), 3), d);
  EXPECT_GE(accuracy(m, d), 0.95);
  EXPECT_EQ(m.diagnostics(), "");
  const auto held_out = blobs(20, 7);
  EXPECT_GE(accuracy(m, held_out), 0.9);
  for (std::size_t r = 0; r < held_out.rows(); ++r) {
    const auto p = m.predict_proba(held_out.matrix.row(r));
    double sum = 0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST_P(EveryLearner, JsonRoundTripPreservesPredictions) {
  const auto d = blobs(15, 8, 1.0);
  const auto m = fit(LearnerConfig::defaults(GetParam(), 4), d);
  const auto text = model_to_json(m).dump();
  const auto back = model_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(model_to_json(back).dump(), text);
  const auto probe = blobs(5, 9, 2.0);
  for (std::size_t r = 0; r < probe.rows(); ++r) {
    EXPECT_EQ(m.predict_proba(probe.matrix.row(r)), back.predict_proba(probe.matrix.row(r)));
  }
}

TEST_P(EveryLearner, SameSeedSameModel) {
  const auto d = blobs(15, 10, 1.0);
  const auto cfg = LearnerConfig::defaults(GetParam(), 5);
  EXPECT_EQ(model_to_json(fit(cfg, d)).dump(), model_to_json(fit(cfg, d)).dump());
}

INSTANTIATE_TEST_SUITE_P(Learners, EveryLearner, ::testing::ValuesIn(kAllLearners),
                         [](const auto& info) { return std::string(short_name(info.param)); });

TEST(Model, RejectsDegenerateData) {
  auto d = blobs(5, 11);
  for (auto& l : d.labels) l = 1;
  EXPECT_THROW(fit(LearnerConfig::defaults(LearnerKind::knn), d), Error);
  auto bad = blobs(5, 11);
  bad.labels[0] = 7;
  EXPECT_THROW(fit(LearnerConfig::defaults(LearnerKind::knn), bad), Error);
  LearnerConfig mismatched{LearnerKind::svm, KnnOptions{}, 0};
  EXPECT_THROW(fit(mismatched, blobs(5, 11)), Error);
}

TEST(Model, RejectsWrongLayoutAndDimension) {
  const auto m = fit(LearnerConfig::defaults(LearnerKind::knn), blobs(5, 12));
  const std::vector<double> short_row{1.0, 2.0};
  EXPECT_THROW(m.predict_proba(short_row), Error);
  EXPECT_THROW(m.predict_proba(FeatureVector{{1, 2, 3, 4}, "other"}), Error);
}

TEST(Model, MalformedFilesAreParseErrors) {
  auto j = nlohmann::json::parse(model_to_json(fit(LearnerConfig::defaults(LearnerKind::tree), blobs(5, 13))).dump());
  j["format_version"] = 99;
  try {
    model_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse_error);
  }
  j["format_version"] = kModelFormatVersion;
  j.erase("parameters");
  EXPECT_THROW(model_from_json(j), Error);
}

TEST(Learners, ParseList) {
  EXPECT_EQ(parse_learner_list("nn,Random Forest").size(), 2u);
  EXPECT_THROW(parse_learner_list("nn,boost"), Error);
  EXPECT_THROW(parse_learner_list(""), Error);
}
