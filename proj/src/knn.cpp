#include "outfitrec/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "outfitrec/error.hpp"

namespace outfitrec {

void LabeledFeatureSet::add(std::vector<double> feature, int label,
                            std::string id) {
  if (labels_.empty()) {
    dim_ = feature.size();
  } else if (feature.size() != dim_) {
    throw DimensionError("feature of dimension " + std::to_string(feature.size()) +
                         " added to a set of dimension " + std::to_string(dim_));
  }
  features_.push_back(std::move(feature));
  labels_.push_back(label);
  ids_.push_back(id.empty() ? std::to_string(labels_.size() - 1) : std::move(id));
}

void LabeledFeatureSet::validate() const {
  if (labels_.empty()) throw ConfigError("feature set is empty");
  if (k_ < 1 || std::size_t(k_) > labels_.size()) {
    throw ConfigError("k = " + std::to_string(k_) + " outside [1, " +
                      std::to_string(labels_.size()) + "]");
  }
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

KnnResult knn_classify(const LabeledFeatureSet& features,
                       std::span<const double> query) {
  features.validate();
  if (query.size() != features.dimension()) {
    throw DimensionError("query of dimension " + std::to_string(query.size()) +
                         " against features of dimension " +
                         std::to_string(features.dimension()));
  }

  std::vector<double> dist(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    dist[i] = euclidean_distance(features.feature(i), query);
  }
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t k = std::size_t(features.k());
  std::partial_sort(order.begin(), order.begin() + std::ptrdiff_t(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (dist[a] != dist[b]) return dist[a] < dist[b];
                      return a < b;
                    });

  KnnResult result;
  std::map<int, double> summed;
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t i = order[r];
    result.neighbors.push_back(i);
    result.distances.push_back(dist[i]);
    result.votes[features.label(i)] += 1;
    summed[features.label(i)] += dist[i];
  }

  int best_votes = -1;
  double best_sum = 0.0;
  for (const auto& [label, votes] : result.votes) {
    // votes is ordered by label, so strict comparisons keep the lower id
    if (votes > best_votes || (votes == best_votes && summed[label] < best_sum)) {
      result.label = label;
      best_votes = votes;
      best_sum = summed[label];
    }
  }
  return result;
}

}  // namespace outfitrec
