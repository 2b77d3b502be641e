#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dvclip/eval.hpp"

using namespace dvclip;
namespace fs = std::filesystem;

namespace {

// Rank of video i: one plus the number of videos placed before it, where j
// precedes i if it scores higher or ties and comes earlier.
double oracle_ap(const std::vector<double>& s, const std::vector<int>& y) {
  double sum = 0.0;
  int positives = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    ++positives;
    int rank = 1, hits_above = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j == i) continue;
      const bool before = s[j] > s[i] || (s[j] == s[i] && j < i);
      if (before) {
        ++rank;
        hits_above += y[j] != 0;
      }
    }
    sum += static_cast<double>(hits_above + 1) / rank;
  }
  return sum / positives;
}

std::vector<ActionClass> toy_classes() {
  return {{"c0", "hold cup", "hold", "cup"},
          {"c1", "hold box", "hold", "box"},
          {"c2", "drop cup", "drop", "cup"},
          {"c3", "wave", "wave", std::nullopt}};
}

}  // namespace

TEST(AveragePrecision, MatchesBruteForceOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    std::vector<double> s(n);
    std::vector<int> y(n);
    // Few distinct values so ties show up often.
    for (auto& v : s) v = std::uniform_int_distribution<int>(0, 4)(rng) * 0.25;
    for (auto& v : y) v = std::bernoulli_distribution(0.4)(rng);
    y[std::uniform_int_distribution<int>(0, n - 1)(rng)] = 1;
    const auto ap = average_precision(s, y);
    ASSERT_TRUE(ap.has_value());
    EXPECT_NEAR(*ap, oracle_ap(s, y), 1e-9) << "trial " << trial;
    EXPECT_GE(*ap, 0.0);
    EXPECT_LE(*ap, 1.0);
  }
}

TEST(AveragePrecision, PerfectRankingIsOne) {
  std::vector<double> s{0.9, 0.8, 0.7, 0.1, 0.0};
  std::vector<int> y{1, 1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(*average_precision(s, y), 1.0);
}

TEST(AveragePrecision, SinglePositiveLastIsOneOverN) {
  for (int n = 1; n <= 9; ++n) {
    std::vector<double> s(n);
    std::vector<int> y(n, 0);
    for (int i = 0; i < n; ++i) s[i] = n - i;
    y[n - 1] = 1;
    EXPECT_DOUBLE_EQ(*average_precision(s, y), 1.0 / n);
  }
}

TEST(AveragePrecision, NoPositivesIsUndefined) {
  std::vector<double> s{0.1, 0.2};
  std::vector<int> y{0, 0};
  EXPECT_FALSE(average_precision(s, y).has_value());
  std::vector<int> short_labels{1};
  EXPECT_THROW(average_precision(s, short_labels), ShapeError);
}

TEST(AveragePrecision, InvariantUnderIncreasingTransform) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(10), t(10);
    std::vector<int> y(10);
    for (int i = 0; i < 10; ++i) {
      s[i] = g(rng);
      t[i] = std::exp(3.0 * s[i]) + 2.0;
      y[i] = i % 3 == 0;
    }
    EXPECT_DOUBLE_EQ(*average_precision(s, y), *average_precision(t, y));
  }
}

TEST(AveragePrecision, SwappingPositiveUpNeverHurts) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> y(8);
    for (auto& v : y) v = std::bernoulli_distribution(0.5)(rng);
    y[0] = 1;
    std::shuffle(y.begin(), y.end(), rng);
    std::vector<double> s(8);
    for (int i = 0; i < 8; ++i) s[i] = 8 - i;  // already sorted: position = rank
    const double before = *average_precision(s, y);
    for (int i = 0; i + 1 < 8; ++i) {
      if (y[i] == 0 && y[i + 1] == 1) {
        auto z = y;
        std::swap(z[i], z[i + 1]);
        EXPECT_GE(*average_precision(s, z), before);
      }
    }
  }
}

TEST(MeanAp, SingleClassAndPerfect) {
  ScoreMatrix m(3, 4);
  std::mt19937_64 rng(3);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t v = 0; v < 4; ++v) {
      m.score(c, v) = std::uniform_real_distribution<double>()(rng);
      m.label(c, v) = (c + v) % 2;
    }
  const std::vector<std::size_t> one{1};
  EXPECT_DOUBLE_EQ(mean_ap(m, one).value, *average_precision(m.class_scores(1), m.class_labels(1)));

  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t v = 0; v < 4; ++v) m.score(c, v) = m.label(c, v);
  EXPECT_DOUBLE_EQ(mean_ap(m).value, 1.0);
}

TEST(MeanAp, DisjointUnionIsWeightedMean) {
  std::mt19937_64 rng(9);
  ScoreMatrix m(7, 15);
  for (std::size_t c = 0; c < 7; ++c)
    for (std::size_t v = 0; v < 15; ++v) {
      m.score(c, v) = std::uniform_real_distribution<double>()(rng);
      m.label(c, v) = std::bernoulli_distribution(0.3)(rng);
    }
  for (std::size_t c = 0; c < 7; ++c) m.label(c, c) = 1;
  const std::vector<std::size_t> a{0, 2, 5}, b{1, 3, 4, 6}, all{0, 1, 2, 3, 4, 5, 6};
  const double expect = (3 * mean_ap(m, a).value + 4 * mean_ap(m, b).value) / 7.0;
  EXPECT_NEAR(mean_ap(m, all).value, expect, 1e-12);
}

TEST(MeanAp, SkipsClassesWithoutPositives) {
  ScoreMatrix m(3, 3);
  m.label(0, 0) = 1;
  m.score(0, 0) = 1.0;
  m.label(2, 1) = 1;
  m.score(2, 2) = 1.0;
  m.score(2, 1) = 0.5;  // positive ranked second of three
  const auto r = mean_ap(m);
  EXPECT_EQ(r.classes_used, 2u);
  EXPECT_EQ(r.classes_skipped, 1u);
  EXPECT_DOUBLE_EQ(r.value, (1.0 + 0.5) / 2.0);
  const std::vector<std::size_t> empty_side{1};
  EXPECT_THROW(mean_ap(m, empty_side), std::invalid_argument);
  const std::vector<std::size_t> out_of_range{5};
  EXPECT_THROW(mean_ap(m, out_of_range), ShapeError);
}

TEST(Confusion, PerfectPredictionsAreDiagonal) {
  ScoreMatrix p(3, 6);
  for (std::size_t v = 0; v < 6; ++v) {
    p.label(v % 3, v) = 1;
    p.score(v % 3, v) = 0.9;
  }
  const std::vector<std::size_t> cluster{0, 1, 2};
  const auto cm = binarize_and_confuse(p, 0.5, cluster);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(cm.at(a, b), a == b ? 2u : 0u);
}

TEST(Confusion, ThresholdOneGivesNoPredictions) {
  ScoreMatrix p(2, 3);
  for (auto& s : p.scores) s = 0.999;
  for (auto& l : p.labels) l = 1;
  const std::vector<std::size_t> cluster{0, 1};
  const auto cm = binarize_and_confuse(p, 1.0, cluster);
  for (auto c : cm.counts) EXPECT_EQ(c, 0u);
  EXPECT_THROW(binarize_and_confuse(p, 0.5, std::vector<std::size_t>{}), std::invalid_argument);
}

TEST(Confusion, HandBuiltCase) {
  // 3 classes, 4 videos.
  //   v0: true {0}, predicted {0, 1}
  //   v1: true {1, 2}, predicted {2}
  //   v2: true {2}, predicted {}
  //   v3: true {0, 1}, predicted {0, 1, 2}
  ScoreMatrix p(3, 4);
  auto set = [&](std::size_t v, std::vector<std::size_t> truth, std::vector<std::size_t> pred) {
    for (auto c : truth) p.label(c, v) = 1;
    for (std::size_t c = 0; c < 3; ++c) p.score(c, v) = 0.2;
    for (auto c : pred) p.score(c, v) = 0.8;
  };
  set(0, {0}, {0, 1});
  set(1, {1, 2}, {2});
  set(2, {2}, {});
  set(3, {0, 1}, {0, 1, 2});
  const std::vector<std::size_t> cluster{0, 1, 2};
  const auto cm = binarize_and_confuse(p, 0.5, cluster);
  const std::size_t expect[3][3] = {{2, 2, 1}, {1, 1, 2}, {0, 0, 1}};
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(cm.at(a, b), expect[a][b]) << a << "," << b;

  // Each row sums to the number of predicted cluster classes over that
  // class's true videos.
  for (std::size_t a = 0; a < 3; ++a) {
    std::size_t row = 0, pairs = 0;
    for (std::size_t b = 0; b < 3; ++b) row += cm.at(a, b);
    for (std::size_t v = 0; v < 4; ++v)
      if (p.label(a, v))
        for (std::size_t b = 0; b < 3; ++b) pairs += p.score(b, v) > 0.5;
    EXPECT_EQ(row, pairs);
  }
}

TEST(Baseline, StrictThreshold) {
  ScoreMatrix s(3, 2);
  // rescaled 0.5 exactly for every entry except one
  s.score(1, 1) = 0.8;  // rescaled 0.9
  const auto pred = baseline_threshold_predict(s);
  EXPECT_TRUE(pred[0].empty());
  ASSERT_EQ(pred[1].size(), 1u);
  EXPECT_EQ(pred[1][0], 1u);
  EXPECT_DOUBLE_EQ(rescale_similarity(-1.0), 0.0);
  EXPECT_DOUBLE_EQ(rescale_similarity(1.0), 1.0);
}

TEST(Scores, RoundTripIsExact) {
  ScoresFile s({"v|1", "v2", "v3"}, {"c0", "c1"});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t v = 0; v < 3; ++v) {
      s.labels_and_pos.label(c, v) = (c + v) % 2;
      s.labels_and_pos.score(c, v) = g(rng);
      s.s_neg[s.idx(c, v)] = g(rng);
      s.similarity[s.idx(c, v)] = std::tanh(g(rng));
    }
  const auto path = fs::temp_directory_path() / "dvclip_test_scores.txt";
  save_scores(s, path);
  const auto back = load_scores(path);
  EXPECT_EQ(back.videos, s.videos);
  EXPECT_EQ(back.class_ids, s.class_ids);
  EXPECT_EQ(back.labels_and_pos.labels, s.labels_and_pos.labels);
  EXPECT_EQ(back.labels_and_pos.scores, s.labels_and_pos.scores);
  EXPECT_EQ(back.s_neg, s.s_neg);
  EXPECT_EQ(back.similarity, s.similarity);
  fs::remove(path);
}

TEST(Scores, IncompleteGridRejected) {
  const auto path = fs::temp_directory_path() / "dvclip_test_scores_bad.txt";
  {
    std::ofstream out(path);
    out << "#dvclip-scores v1\nv1|c0|1|0.1|0.2|0.3\nv1|c1|0|0.1|0.2|0.3\nv2|c0|0|0.1|0.2|0.3\n";
  }
  EXPECT_THROW(load_scores(path), FormatError);
  fs::remove(path);
}

namespace {

ScoresFile toy_scores() {
  // Dual margins rank c0 correctly; similarities rank it backwards.
  ScoresFile s({"a", "b", "c", "d"}, {"c0", "c1", "c2", "c3"});
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t v = 0; v < 4; ++v) {
      const int y = c == v || (c == 3 && v == 0);
      s.labels_and_pos.label(c, v) = y;
      s.labels_and_pos.score(c, v) = y ? 2.0 : -1.0 + 0.1 * v;
      s.s_neg[s.idx(c, v)] = 0.0;
      s.similarity[s.idx(c, v)] = y ? -0.2 : 0.3 - 0.01 * v;
    }
  return s;
}

}  // namespace

TEST(Report, BothMethodsDifferAndTableListsThem) {
  const auto s = toy_scores();
  SplitSpec split;
  split.seen = {"c0", "c1"};
  split.unseen = {"c2", "c3"};
  const auto classes = toy_classes();
  const auto dual = build_report(s, Method::dual_prompt, classes, &split);
  const auto base = build_report(s, Method::threshold_baseline, classes, &split);
  EXPECT_DOUBLE_EQ(dual.map_all, 1.0);
  EXPECT_LT(base.map_all, 1.0);
  ASSERT_TRUE(dual.map_seen && dual.map_unseen);
  // GZSL equals the class-count weighted mean of both sides.
  EXPECT_NEAR(base.map_all, (2 * *base.map_seen + 2 * *base.map_unseen) / 4.0, 1e-12);
  // Buckets: c2 "drop cup" has an unseen verb and seen object, c3 has no object.
  EXPECT_EQ(dual.bucket_size.at("VU-OS"), 1u);
  EXPECT_EQ(dual.bucket_size.at("VU-NO"), 1u);
  EXPECT_EQ(dual.verb_confusion.size(), 3u);
  EXPECT_EQ(dual.object_confusion.size(), 2u);

  const auto table = format_method_table({dual, base});
  EXPECT_NE(table.find("dual-prompt|"), std::string::npos);
  EXPECT_NE(table.find("threshold-baseline|"), std::string::npos);
  const auto text = format_report(dual);
  EXPECT_NE(text.find("summary|dual-prompt|map_zsl|"), std::string::npos);
  EXPECT_NE(text.find("#confusion verb hold"), std::string::npos);
}

TEST(Report, ProbabilityIsLogisticOfMargin) {
  auto s = toy_scores();
  s.labels_and_pos.score(0, 0) = 1.5;
  s.s_neg[s.idx(0, 0)] = -0.5;
  const auto ms = method_scores(s, Method::dual_prompt);
  const double p = std::exp(1.5) / (std::exp(1.5) + std::exp(-0.5));
  EXPECT_NEAR(ms.probability.score(0, 0), p, 1e-15);
  const auto mb = method_scores(s, Method::threshold_baseline);
  EXPECT_DOUBLE_EQ(mb.probability.score(0, 1), 0.5 * (s.similarity[s.idx(0, 1)] + 1.0));
}
