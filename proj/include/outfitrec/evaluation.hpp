#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace outfitrec {

// Fraction of queries whose first k labels contain the query's target.
// Throws ConfigError for k < 1 or a query without recommendations.
double accuracy_at_k(std::span<const std::vector<int>> recommendations,
                     std::span<const int> targets, int k);

// Average precision over the first k flags: mean of precision@rank at each
// relevant rank, 0 when nothing relevant appears.
double average_precision(const std::vector<bool>& relevance, int k);

double mean_average_precision(std::span<const std::vector<bool>> relevance, int k);

// Natural-log entropy with 0 log 0 = 0. Throws ConfigError on negative
// entries or a total that is not 1 within 1e-9.
double shannon_entropy(std::span<const double> distribution);

// Pools the first k labels of every list (labels in [0, N); others such as
// -1 for "no label" are ignored) and returns the entropy of the pooled
// empirical distribution. k <= 0 pools whole lists.
double recommendation_entropy(std::span<const std::vector<int>> recommendations,
                              int num_categories, int k = 0);

std::vector<double> label_distribution(std::span<const std::vector<int>> recommendations,
                                       int num_categories, int k = 0);

struct RandomBaseline {
  double accuracy = 0.0;
  double map = 0.0;
  double entropy = 0.0;
};

// Draws a target and k recommendation labels per query i.i.d. from the prior
// (uniform when empty) and scores them like a real run.
RandomBaseline random_baseline(int num_categories, int k, std::size_t num_queries,
                               std::uint64_t seed,
                               std::span<const double> label_prior = {});

// Closed-form accuracy@k of uniform random labels.
double uniform_random_accuracy(int num_categories, int k);

struct GarmentAnnotation {
  std::optional<std::string> category;
  std::optional<int> color;
};

struct CategoryColorAccuracy {
  double category = 0.0;
  double color = 0.0;
  double joint = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

// A query counts for category (color) when some proposal among the first k
// matches the ground truth's category (dominant color); joint requires one
// proposal matching both. Queries whose ground truth lacks an annotation are
// skipped; proposals lacking one never match.
CategoryColorAccuracy category_color_accuracy(
    std::span<const std::vector<GarmentAnnotation>> proposals,
    std::span<const GarmentAnnotation> ground_truth, int k);

}  // namespace outfitrec
