#include <gtest/gtest.h>

#include <set>

#include "vegmap/learners/validation.hpp"

using namespace vegmap;

namespace {

LabeledDataset blobs(std::vector<std::size_t> per_class, std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset d{FeatureMatrix("blob", 2), {}, {}};
  int row = 0;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    d.class_list.push_back("c" + std::to_string(c));
    for (std::size_t i = 0; i < per_class[c]; ++i) {
      const std::vector<double> v{3.0 * static_cast<double>(c) + rng.normal(0, 0.5), rng.normal(0, 0.5)};
      d.matrix.add_row({"img", row++, 0, 1}, v);
      d.labels.push_back(static_cast<int>(c));
    }
  }
  return d;
}

// Leaf-only tree gives the same distribution for every input; a stump splits on x0.
Model stump_model(double lo, double hi, std::vector<double> inside, std::vector<double> outside) {
  Model m;
  m.kind = LearnerKind::tree;
  m.class_list = {"focus", "other"};
  m.layout_id = "line";
  m.dim = 1;
  m.standardizer = Standardizer::identity(1);
  TreeModel t;
  t.classes = 2;
  t.nodes = {TreeNode{0, lo, 1, 2, {}}, TreeNode{-1, 0, -1, -1, outside},
             TreeNode{0, hi, 3, 4, {}}, TreeNode{-1, 0, -1, -1, inside},
             TreeNode{-1, 0, -1, -1, outside}};
  m.parameters = t;
  return m;
}

}  // namespace

TEST(Folds, StratifiedAndBalanced) {
  const auto d = blobs({17, 9, 30}, 1);
  const auto folds = stratified_folds(d.labels, 4, 7);
  std::vector<std::size_t> size(4);
  std::vector<std::vector<std::size_t>> per(3, std::vector<std::size_t>(4));
  for (std::size_t i = 0; i < folds.size(); ++i) {
    ASSERT_GE(folds[i], 0);
    ASSERT_LT(folds[i], 4);
    ++size[static_cast<std::size_t>(folds[i])];
    ++per[static_cast<std::size_t>(d.labels[i])][static_cast<std::size_t>(folds[i])];
  }
  for (std::size_t c = 0; c < 3; ++c) {
    const auto [lo, hi] = std::minmax_element(per[c].begin(), per[c].end());
    EXPECT_LE(*hi - *lo, 1u);
  }
  const auto [lo, hi] = std::minmax_element(size.begin(), size.end());
  EXPECT_LE(*hi - *lo, 1u);
  EXPECT_EQ(folds, stratified_folds(d.labels, 4, 7));
  EXPECT_NE(folds, stratified_folds(d.labels, 4, 8));
}

TEST(Folds, RejectsSmallClasses) {
  const auto d = blobs({10, 2}, 1);
  EXPECT_THROW(stratified_folds(d.labels, 3, 0), Error);
  EXPECT_THROW(stratified_folds(d.labels, 1, 0), Error);
}

TEST(CrossValidate, EachRowPredictedOnceByModelThatDidNotSeeIt) {
  const auto d = blobs({12, 12}, 2);
  const int k = 3;
  const auto folds = stratified_folds(d.labels, k, 5);
  // 1-NN: a row's own point is never its neighbour when it is held out.
  LearnerConfig cfg{LearnerKind::knn, KnnOptions{1}, 0};
  const auto report = cross_validate({cfg}, d, k, 5, "blobs");
  ASSERT_EQ(report.rows.size(), 1u);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < d.rows(); ++i) {
    std::vector<std::size_t> train;
    for (std::size_t j = 0; j < d.rows(); ++j) {
      if (folds[j] != folds[i]) train.push_back(j);
    }
    const auto m = fit(cfg, d.subset(train));
    hit += static_cast<int>(m.predict(d.matrix.row(i))) == d.labels[i];
  }
  EXPECT_NEAR(report.rows[0].metrics->ca, static_cast<double>(hit) / d.rows(), 1e-12);
  EXPECT_EQ(report.rows[0].images, 24u);
  EXPECT_EQ(report.rows[0].dataset, "blobs");
}

TEST(CrossValidate, FailingLearnerDoesNotStopOthers) {
  const auto d = blobs({6, 6}, 3);
  LearnerConfig bad{LearnerKind::knn, KnnOptions{0}, 0};
  const auto report = cross_validate({bad, LearnerConfig::defaults(LearnerKind::tree)}, d, 3, 0);
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_FALSE(report.rows[0].metrics.has_value());
  EXPECT_NE(report.rows[0].error, "");
  EXPECT_TRUE(report.rows[1].metrics.has_value());
  const auto csv = cv_report_to_csv(report);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kCvCsvHeader);
}

TEST(CrossValidate, ReproducibleWithoutTiming) {
  const auto d = blobs({10, 10, 10}, 4);
  std::vector<LearnerConfig> cfgs;
  for (auto k : kAllLearners) cfgs.push_back(LearnerConfig::defaults(k, 1));
  const auto a = cv_report_to_csv(cross_validate(cfgs, d, 3, 9, "x"));
  const auto b = cv_report_to_csv(cross_validate(cfgs, d, 3, 9, "x"));
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 7);
}

TEST(Loo, SampleSizeAndHeldOutRow) {
  EXPECT_EQ(sample_count(0.10, 140), 14u);
  EXPECT_EQ(sample_count(0.10, 141), 15u);
  EXPECT_EQ(sample_count(1.0, 5), 5u);
  const auto d = blobs({70, 70}, 5);
  const auto recs = loo_validate(LearnerConfig::defaults(LearnerKind::knn), d, 0.10, 3);
  ASSERT_EQ(recs.size(), 14u);
  std::set<std::size_t> rows;
  std::size_t per_class[2] = {0, 0};
  for (const auto& r : recs) {
    EXPECT_EQ(r.train_rows, 139u);
    EXPECT_EQ(r.actual, d.labels[r.row]);
    EXPECT_EQ(r.tile, d.matrix.key(r.row));
    rows.insert(r.row);
    ++per_class[r.actual];
  }
  EXPECT_EQ(rows.size(), 14u);
  EXPECT_EQ(per_class[0], 7u);
  EXPECT_EQ(per_class[1], 7u);
  const auto jsonl = loo_records_to_jsonl(recs, d.class_list);
  EXPECT_EQ(std::count(jsonl.begin(), jsonl.end(), '\n'), 14);
  EXPECT_THROW(loo_validate(LearnerConfig::defaults(LearnerKind::knn), d, 0.0, 3), Error);
}

TEST(Loo, StratifiedSampleUsesLargestRemainder) {
  std::vector<int> labels;
  for (int i = 0; i < 7; ++i) labels.push_back(0);
  for (int i = 0; i < 3; ++i) labels.push_back(1);
  // 5 of 10: exact quotas 3.5 and 1.5, ties go to the earlier class.
  const auto s = stratified_sample(labels, 5, 1);
  std::size_t zeros = 0;
  for (auto r : s) zeros += labels[r] == 0;
  EXPECT_EQ(s.size(), 5u);
  EXPECT_EQ(zeros, 4u);
}

TEST(Focus, UnionOfAcceptedTiles) {
  FeatureMatrix tiles("line", 1);
  for (int i = 0; i < 128; ++i) {
    const std::vector<double> v{static_cast<double>(i)};
    tiles.add_row({"img", i, 0, 1}, v);
  }
  // Each stump favours focus on lo < x <= hi. Accepted: [0, 39], [31, 46], [101, 110].
  std::vector<Model> models{stump_model(-1, 39, {0.9, 0.1}, {0.2, 0.8}),
                            stump_model(30, 46, {0.7, 0.3}, {0.4, 0.6}),
                            stump_model(100, 110, {0.96, 0.04}, {0.5, 0.5})};
  const std::vector<double> thresholds{0.5, 0.5, 0.95};
  const auto f = focus_coverage(models, tiles, "focus", thresholds);
  EXPECT_EQ(f.accepted[0].size(), 40u);
  EXPECT_EQ(f.accepted[1].size(), 16u);
  EXPECT_EQ(f.accepted[2].size(), 10u);
  EXPECT_EQ(f.union_rows.size(), 57u);
  EXPECT_EQ(f.total, 128u);
  EXPECT_NEAR(f.fraction, 57.0 / 128, 1e-15);
  const auto j = focus_coverage_to_json(f, models, thresholds, tiles);
  EXPECT_EQ(j["union_count"], 57);
  const std::vector<double> bad{0.5, 0.5, 1.0};
  EXPECT_THROW(focus_coverage(models, tiles, "focus", bad), Error);
  EXPECT_THROW(focus_coverage(models, tiles, "nope", thresholds), Error);
}
