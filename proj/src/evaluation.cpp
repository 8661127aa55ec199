#include "outfitrec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "outfitrec/error.hpp"

namespace outfitrec {

double accuracy_at_k(std::span<const std::vector<int>> recommendations,
                     std::span<const int> targets, int k) {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (recommendations.size() != targets.size()) {
    throw ConfigError("recommendation and target counts differ");
  }
  if (recommendations.empty()) throw ConfigError("no queries to evaluate");
  std::size_t hits = 0;
  for (std::size_t q = 0; q < recommendations.size(); ++q) {
    const auto& list = recommendations[q];
    if (list.empty()) {
      throw ConfigError("query " + std::to_string(q) + " has no recommendations");
    }
    const auto end = list.begin() + std::min<std::ptrdiff_t>(k, std::ptrdiff_t(list.size()));
    if (std::find(list.begin(), end, targets[q]) != end) ++hits;
  }
  return double(hits) / double(recommendations.size());
}

double average_precision(const std::vector<bool>& relevance, int k) {
  const std::size_t n = std::min<std::size_t>(std::size_t(std::max(k, 0)), relevance.size());
  double sum = 0.0;
  int hits = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (relevance[r]) {
      ++hits;
      sum += double(hits) / double(r + 1);
    }
  }
  return hits == 0 ? 0.0 : sum / double(hits);
}

double mean_average_precision(std::span<const std::vector<bool>> relevance, int k) {
  if (relevance.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& flags : relevance) sum += average_precision(flags, k);
  return sum / double(relevance.size());
}

double shannon_entropy(std::span<const double> distribution) {
  double total = 0.0;
  for (double x : distribution) {
    if (!(x >= 0.0)) throw ConfigError("distribution has a negative entry");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("distribution does not sum to 1");
  double h = 0.0;
  for (double x : distribution) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return std::max(h, 0.0);
}

std::vector<double> label_distribution(std::span<const std::vector<int>> recommendations,
                                       int num_categories, int k) {
  std::vector<double> counts(std::size_t(std::max(num_categories, 0)), 0.0);
  double total = 0.0;
  for (const auto& list : recommendations) {
    const std::size_t n = k > 0 ? std::min<std::size_t>(std::size_t(k), list.size())
                                : list.size();
    for (std::size_t i = 0; i < n; ++i) {
      const int label = list[i];
      if (label < 0 || label >= num_categories) continue;
      counts[std::size_t(label)] += 1.0;
      total += 1.0;
    }
  }
  if (total > 0.0) {
    for (double& c : counts) c /= total;
  }
  return counts;
}

double recommendation_entropy(std::span<const std::vector<int>> recommendations,
                              int num_categories, int k) {
  const auto dist = label_distribution(recommendations, num_categories, k);
  const bool any = std::any_of(dist.begin(), dist.end(), [](double x) { return x > 0.0; });
  return any ? shannon_entropy(dist) : 0.0;
}

double uniform_random_accuracy(int num_categories, int k) {
  return 1.0 - std::pow(1.0 - 1.0 / double(num_categories), double(k));
}

RandomBaseline random_baseline(int num_categories, int k, std::size_t num_queries,
                               std::uint64_t seed, std::span<const double> label_prior) {
  if (num_categories < 2) throw ConfigError("random baseline needs N >= 2");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (num_queries == 0) throw ConfigError("random baseline needs queries");
  if (!label_prior.empty() && label_prior.size() != std::size_t(num_categories)) {
    throw ConfigError("label prior size differs from N");
  }

  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> prior_dist(label_prior.begin(), label_prior.end());
  std::uniform_int_distribution<int> uniform_dist(0, num_categories - 1);
  auto draw = [&] { return label_prior.empty() ? uniform_dist(rng) : prior_dist(rng); };

  std::vector<std::vector<int>> recs(num_queries, std::vector<int>(std::size_t(k)));
  std::vector<int> targets(num_queries);
  std::vector<std::vector<bool>> relevance(num_queries);
  for (std::size_t q = 0; q < num_queries; ++q) {
    targets[q] = draw();
    for (auto& label : recs[q]) label = draw();
    relevance[q].reserve(std::size_t(k));
    for (int label : recs[q]) relevance[q].push_back(label == targets[q]);
  }

  RandomBaseline out;
  out.accuracy = accuracy_at_k(recs, targets, k);
  out.map = mean_average_precision(relevance, k);
  out.entropy = recommendation_entropy(recs, num_categories, k);
  return out;
}

CategoryColorAccuracy category_color_accuracy(
    std::span<const std::vector<GarmentAnnotation>> proposals,
    std::span<const GarmentAnnotation> ground_truth, int k) {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (proposals.size() != ground_truth.size()) {
    throw ConfigError("proposal and ground-truth counts differ");
  }
  CategoryColorAccuracy acc;
  std::size_t cat_hits = 0, color_hits = 0, joint_hits = 0;
  for (std::size_t q = 0; q < proposals.size(); ++q) {
    const auto& gt = ground_truth[q];
    if (!gt.category || !gt.color) {
      ++acc.skipped;
      continue;
    }
    ++acc.evaluated;
    bool cat = false, color = false, joint = false;
    const std::size_t n = std::min<std::size_t>(std::size_t(k), proposals[q].size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = proposals[q][i];
      const bool c1 = p.category && *p.category == *gt.category;
      const bool c2 = p.color && *p.color == *gt.color;
      cat = cat || c1;
      color = color || c2;
      joint = joint || (c1 && c2);
    }
    cat_hits += cat;
    color_hits += color;
    joint_hits += joint;
  }
  if (acc.evaluated > 0) {
    const double n = double(acc.evaluated);
    acc.category = double(cat_hits) / n;
    acc.color = double(color_hits) / n;
    acc.joint = double(joint_hits) / n;
  }
  return acc;
}

}  // namespace outfitrec
