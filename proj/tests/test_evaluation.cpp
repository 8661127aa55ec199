#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "outfitrec/error.hpp"
#include "outfitrec/evaluation.hpp"

using namespace outfitrec;

namespace {

// A ten-long list whose target (label 0) sits at the 1-based rank, or nowhere.
std::vector<int> list_with_target_at(std::optional<int> rank) {
  std::vector<int> l(10);
  for (int i = 0; i < 10; ++i) l[std::size_t(i)] = 1 + i;
  if (rank) l[std::size_t(*rank - 1)] = 0;
  return l;
}

}  // namespace

TEST(AccuracyAtK, HandCase) {
  const std::vector<std::vector<int>> recs{list_with_target_at(1), list_with_target_at(3),
                                           list_with_target_at(7), list_with_target_at({})};
  const std::vector<int> targets(4, 0);
  EXPECT_EQ(accuracy_at_k(recs, targets, 5), 0.5);
  EXPECT_EQ(accuracy_at_k(recs, targets, 1), 0.25);
  EXPECT_EQ(accuracy_at_k(recs, targets, 7), 0.75);
  EXPECT_EQ(accuracy_at_k(recs, targets, 100), 0.75);
}

TEST(AccuracyAtK, InvalidInputsThrow) {
  const std::vector<std::vector<int>> recs{{1, 2}};
  const std::vector<int> targets{1};
  EXPECT_THROW(accuracy_at_k(recs, targets, 0), ConfigError);
  const std::vector<int> two{1, 2};
  EXPECT_THROW(accuracy_at_k(recs, two, 1), ConfigError);
  const std::vector<std::vector<int>> empty_list{{}};
  EXPECT_THROW(accuracy_at_k(empty_list, targets, 1), ConfigError);
}

TEST(AccuracyAtK, MonotoneInKAndMatchesOracle) {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> label(0, 13), len(1, 60);
  for (int run = 0; run < 1000; ++run) {
    std::vector<std::vector<int>> recs(20);
    std::vector<int> targets(20);
    for (std::size_t q = 0; q < recs.size(); ++q) {
      recs[q].resize(std::size_t(len(rng)));
      for (int& l : recs[q]) l = label(rng);
      targets[q] = label(rng);
    }
    double prev = 0.0;
    for (int k : {1, 5, 10, 20, 30, 40, 50, 60}) {
      const double acc = accuracy_at_k(recs, targets, k);
      ASSERT_GE(acc, prev);
      prev = acc;
      int hits = 0;
      for (std::size_t q = 0; q < recs.size(); ++q) {
        bool hit = false;
        for (int i = 0; i < k && i < int(recs[q].size()); ++i) hit = hit || recs[q][std::size_t(i)] == targets[q];
        hits += hit;
      }
      ASSERT_EQ(acc, hits / 20.0);
    }
  }
}

TEST(AveragePrecision, GoldenCases) {
  EXPECT_EQ(average_precision({false, true, false, true, false}, 5), 0.5);
  EXPECT_EQ(average_precision({true, false, false}, 5), 1.0);
  EXPECT_EQ(average_precision({false, false, false}, 5), 0.0);
  EXPECT_EQ(average_precision({}, 5), 0.0);
  // Ranks 1 and 3: (1/1 + 2/3) / 2.
  EXPECT_DOUBLE_EQ(average_precision({true, false, true}, 5), 5.0 / 6.0);
  // Only the first k flags count.
  EXPECT_EQ(average_precision({false, true, false, true}, 2), 0.5);
}

TEST(AveragePrecision, MatchesOracleAndStaysInUnitInterval) {
  std::mt19937_64 rng(52);
  std::bernoulli_distribution hit(0.2);
  std::vector<std::vector<bool>> all;
  for (int run = 0; run < 1000; ++run) {
    std::vector<bool> rel(30);
    for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = hit(rng);
    for (int k : {5, 10, 20, 30}) {
      const double ap = average_precision(rel, k);
      ASSERT_NEAR(ap, oracle::average_precision(rel, k), 1e-12);
      ASSERT_GE(ap, 0.0);
      ASSERT_LE(ap, 1.0);
    }
    all.push_back(rel);
  }
  double sum = 0.0;
  for (const auto& r : all) sum += average_precision(r, 10);
  EXPECT_DOUBLE_EQ(mean_average_precision(all, 10), sum / double(all.size()));
  EXPECT_EQ(mean_average_precision({}, 10), 0.0);
}

TEST(Entropy, GoldenCases) {
  const std::vector<double> one_hot{0, 0, 1, 0};
  EXPECT_EQ(shannon_entropy(one_hot), 0.0);
  const std::vector<double> uniform4(4, 0.25);
  EXPECT_NEAR(shannon_entropy(uniform4), std::log(4.0), 1e-12);
  const std::vector<double> skewed{0.5, 0.25, 0.25};
  EXPECT_NEAR(shannon_entropy(skewed), 1.5 * std::numbers::ln2, 1e-12);
  EXPECT_NEAR(shannon_entropy(skewed), 1.039721, 1e-6);
  const std::vector<double> uniform14(14, 1.0 / 14.0);
  EXPECT_NEAR(shannon_entropy(uniform14), std::log(14.0), 1e-9);
}

TEST(Entropy, InvalidDistributionsThrow) {
  const std::vector<double> negative{1.5, -0.5};
  EXPECT_THROW(shannon_entropy(negative), ConfigError);
  const std::vector<double> short_sum{0.5, 0.4};
  EXPECT_THROW(shannon_entropy(short_sum), ConfigError);
}

TEST(Entropy, PooledRecommendationLabels) {
  const std::vector<std::vector<int>> same{{3, 3, 3}, {3, 3}};
  EXPECT_EQ(recommendation_entropy(same, 14), 0.0);
  const std::vector<std::vector<int>> mixed{{0, 1, -1}, {0, 2}};
  // Pooled labels 0,1,0,2 with the unlabeled entry ignored.
  EXPECT_NEAR(recommendation_entropy(mixed, 14), 1.5 * std::numbers::ln2, 1e-12);
  EXPECT_EQ(recommendation_entropy(mixed, 14, 1), 0.0);
  const auto dist = label_distribution(mixed, 4);
  EXPECT_EQ(dist, (std::vector<double>{0.5, 0.25, 0.25, 0.0}));
  const std::vector<std::vector<int>> unlabeled{{-1, -1}};
  EXPECT_EQ(recommendation_entropy(unlabeled, 14), 0.0);
}

TEST(Entropy, NeverExceedsLogN) {
  std::mt19937_64 rng(53);
  std::uniform_int_distribution<int> label(-1, 13);
  for (int run = 0; run < 500; ++run) {
    std::vector<std::vector<int>> recs(10, std::vector<int>(12));
    for (auto& l : recs) {
      for (int& x : l) x = label(rng);
    }
    const double h = recommendation_entropy(recs, 14);
    ASSERT_GE(h, 0.0);
    ASSERT_LE(h, std::log(14.0) + 1e-9);
    ASSERT_NEAR(h, oracle::entropy(label_distribution(recs, 14)), 1e-12);
  }
}

TEST(RandomBaseline, MatchesClosedFormAndIsDeterministic) {
  for (int k : {1, 5, 10, 20}) {
    const auto r = random_baseline(14, k, 20000, 7);
    EXPECT_NEAR(r.accuracy, uniform_random_accuracy(14, k), 0.015) << "k=" << k;
    EXPECT_LE(r.entropy, std::log(14.0) + 1e-9);
    EXPECT_GT(r.entropy, std::log(14.0) - 0.01);
    const auto again = random_baseline(14, k, 20000, 7);
    EXPECT_EQ(r.accuracy, again.accuracy);
    EXPECT_EQ(r.map, again.map);
    EXPECT_EQ(r.entropy, again.entropy);
  }
  for (int k : {5, 10, 20, 60}) {
    double miss = 1.0;
    for (int i = 0; i < k; ++i) miss *= 13.0 / 14.0;
    EXPECT_NEAR(uniform_random_accuracy(14, k), 1.0 - miss, 1e-12);
  }
  EXPECT_NEAR(uniform_random_accuracy(14, 5), 0.30964, 1e-5);
  EXPECT_GT(uniform_random_accuracy(14, 60), 0.988);
}

TEST(RandomBaseline, PriorConcentratesLabels) {
  std::vector<double> prior(5, 0.0);
  prior[2] = 1.0;
  const auto r = random_baseline(5, 3, 100, 1, prior);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.map, 1.0);
  EXPECT_EQ(r.entropy, 0.0);
  EXPECT_THROW(random_baseline(1, 3, 10, 1), ConfigError);
  EXPECT_THROW(random_baseline(5, 0, 10, 1), ConfigError);
  EXPECT_THROW(random_baseline(5, 3, 0, 1), ConfigError);
  const std::vector<double> bad_prior{0.5, 0.5};
  EXPECT_THROW(random_baseline(5, 3, 10, 1, bad_prior), ConfigError);
}

TEST(CategoryColorAccuracy, HandCases) {
  using A = GarmentAnnotation;
  const std::vector<std::vector<A>> proposals{
      {{"jeans", 3}, {"skirt", 1}},  // joint hit at rank 1
      {{"jeans", 1}, {"skirt", 3}},  // category and color, never together
      {{"shorts", 2}},               // miss
      {{"jeans", 3}},                // skipped: no ground-truth color
      {{std::nullopt, 3}},           // color only
  };
  const std::vector<A> truth{{"jeans", 3}, {"jeans", 3}, {"jeans", 3}, {"jeans", std::nullopt},
                             {"jeans", 3}};
  const auto acc = category_color_accuracy(proposals, truth, 5);
  EXPECT_EQ(acc.evaluated, 4u);
  EXPECT_EQ(acc.skipped, 1u);
  EXPECT_EQ(acc.category, 0.5);
  EXPECT_EQ(acc.color, 0.75);
  EXPECT_EQ(acc.joint, 0.25);
  const auto top1 = category_color_accuracy(proposals, truth, 1);
  EXPECT_EQ(top1.category, 0.5);
  EXPECT_EQ(top1.color, 0.5);
  EXPECT_THROW(category_color_accuracy(proposals, truth, 0), ConfigError);
}

TEST(CategoryColorAccuracy, JointNeverExceedsEitherMarginal) {
  std::mt19937_64 rng(54);
  const std::vector<std::string> cats{"jeans", "skirt", "shorts", "trousers"};
  std::uniform_int_distribution<int> c(0, 3), col(0, 9), len(0, 8);
  for (int run = 0; run < 1000; ++run) {
    std::vector<std::vector<GarmentAnnotation>> proposals(15);
    std::vector<GarmentAnnotation> truth(15);
    for (std::size_t q = 0; q < 15; ++q) {
      truth[q] = {cats[std::size_t(c(rng))], col(rng)};
      proposals[q].resize(std::size_t(len(rng)));
      for (auto& p : proposals[q]) p = {cats[std::size_t(c(rng))], col(rng)};
    }
    for (int k : {1, 3, 5}) {
      const auto acc = category_color_accuracy(proposals, truth, k);
      ASSERT_LE(acc.joint, std::min(acc.category, acc.color));
    }
  }
}
