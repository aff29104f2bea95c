#include <gtest/gtest.h>

#include <cmath>

#include "vegmap/learners/metrics.hpp"
#include "vegmap/rng.hpp"

using namespace vegmap;

namespace {

Predictions make(std::vector<int> actual, std::vector<std::vector<double>> rows) {
  Predictions p;
  p.actual = std::move(actual);
  p.proba = Matrix(rows.size(), rows.at(0).size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) p.proba(i, c) = rows[i][c];
  }
  return p;
}

// Counts positive-over-negative pairs, ties worth one half.
double pair_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& pos) {
  double win = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!pos[i] || pos[j]) continue;
      pairs += 1;
      win += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return win / pairs;
}

}  // namespace

TEST(Metrics, ThreeClassFixture) {
  const auto p = make({0, 0, 1, 1, 2, 2}, {{0.7, 0.2, 0.1},
                                           {0.3, 0.4, 0.3},
                                           {0.1, 0.8, 0.1},
                                           {0.2, 0.2, 0.6},
                                           {0.25, 0.25, 0.5},
                                           {0.6, 0.3, 0.1}});
  const auto m = evaluate(p);
  EXPECT_NEAR(m.ca, 0.5, 1e-12);
  EXPECT_NEAR(m.precision, 0.5, 1e-12);
  EXPECT_NEAR(m.recall, 0.5, 1e-12);
  EXPECT_NEAR(m.f1, 0.5, 1e-12);
  EXPECT_NEAR(m.specificity, 0.75, 1e-12);
  EXPECT_NEAR(m.auc, (7.0 / 8 + 4.5 / 8 + 4.0 / 8) / 3, 1e-12);
  const double ll = -(std::log(0.7) + std::log(0.3) + std::log(0.8) + std::log(0.2) +
                      std::log(0.5) + std::log(0.1)) / 6;
  EXPECT_NEAR(m.log_loss, ll, 1e-12);
}

TEST(Metrics, ImbalancedBinaryFixture) {
  const auto p = make({0, 0, 0, 1}, {{0.9, 0.1}, {0.4, 0.6}, {0.65, 0.35}, {0.2, 0.8}});
  const auto m = evaluate(p);
  EXPECT_NEAR(m.ca, 0.75, 1e-12);
  EXPECT_NEAR(m.precision, 0.75 * 1.0 + 0.25 * 0.5, 1e-12);
  EXPECT_NEAR(m.recall, 0.75 * (2.0 / 3) + 0.25 * 1.0, 1e-12);
  EXPECT_NEAR(m.f1, 0.75 * 0.8 + 0.25 * (2.0 / 3), 1e-12);
  EXPECT_NEAR(m.specificity, 0.75 * 1.0 + 0.25 * (2.0 / 3), 1e-12);
  EXPECT_NEAR(m.auc, 1.0, 1e-12);
}

TEST(Metrics, LogLossClipsZeroProbability) {
  const auto p = make({0, 1}, {{1.0, 0.0}, {1.0, 0.0}});
  EXPECT_NEAR(log_loss(p), -std::log(kLogLossClip) / 2 - std::log(1 - kLogLossClip) / 2, 1e-9);
}

TEST(Metrics, AucEqualsPairCounting) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> s(n);
    std::vector<std::uint8_t> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse scores so ties are common.
      s[i] = static_cast<double>(rng.below(8)) / 8.0;
      pos[i] = rng.uniform() < 0.4 ? 1 : 0;
    }
    pos[0] = 1;
    pos[1] = 0;
    EXPECT_NEAR(binary_auc(s, pos), pair_auc(s, pos), 1e-9);
  }
}

TEST(Metrics, AucInvariantUnderMonotoneTransform) {
  Rng rng(12);
  std::vector<double> s(50), t(50);
  std::vector<std::uint8_t> pos(50);
  for (std::size_t i = 0; i < 50; ++i) {
    s[i] = rng.uniform(-2, 2);
    t[i] = std::exp(3 * s[i]) + 7;
    pos[i] = i % 3 == 0;
  }
  EXPECT_NEAR(binary_auc(s, pos), binary_auc(t, pos), 1e-12);
}

TEST(Metrics, DegenerateAucThrows) {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<std::uint8_t> pos{1, 1};
  EXPECT_THROW(binary_auc(s, pos), Error);
  const auto p = make({0, 0}, {{0.9, 0.1}, {0.4, 0.6}});
  EXPECT_THROW(auc(p), Error);
}

TEST(Confusion, OrientationAndPercent) {
  const std::vector<int> actual{0, 0, 0, 1, 1, 2};
  const std::vector<int> pred{0, 1, 1, 1, 2, 2};
  const auto cm = confusion(actual, pred, {"a", "b", "c"});
  EXPECT_EQ(cm.counts[0][0], 1u);
  EXPECT_EQ(cm.counts[1][0], 2u);
  EXPECT_EQ(cm.counts[0][1], 0u);
  EXPECT_EQ(cm.counts[2][1], 1u);
  EXPECT_NEAR(cm.percent[1][0], 200.0 / 3, 1e-12);
  EXPECT_NEAR(cm.percent[2][2], 100.0, 1e-12);
  for (std::size_t a = 0; a < 3; ++a) {
    double col = 0;
    for (std::size_t p = 0; p < 3; ++p) col += cm.percent[p][a];
    EXPECT_NEAR(col, 100.0, 1e-12);
  }
  EXPECT_NEAR(cm.accuracy(), 3.0 / 6, 1e-12);
  EXPECT_THROW(confusion(actual, std::vector<int>{0}, {"a", "b", "c"}), Error);
  EXPECT_THROW(confusion(std::vector<int>{3}, std::vector<int>{0}, {"a", "b", "c"}), Error);
}
