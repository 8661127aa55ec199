#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace outfitrec {

// Training set for the nearest-neighbour classifiers: one feature vector
// (normalized color histogram) and one category id per entry.
class LabeledFeatureSet {
 public:
  LabeledFeatureSet() = default;
  explicit LabeledFeatureSet(int k) : k_(k) {}

  void add(std::vector<double> feature, int label, std::string id = {});

  // Checks k against the entry count; throws ConfigError.
  void validate() const;

  int k() const { return k_; }
  void set_k(int k) { k_ = k; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t dimension() const { return dim_; }

  const std::vector<double>& feature(std::size_t i) const { return features_[i]; }
  int label(std::size_t i) const { return labels_[i]; }
  const std::string& id(std::size_t i) const { return ids_[i]; }

 private:
  int k_ = 1;
  std::size_t dim_ = 0;
  std::vector<std::vector<double>> features_;
  std::vector<int> labels_;
  std::vector<std::string> ids_;
};

struct KnnResult {
  int label = -1;
  // Entry indices of the k nearest neighbours, nearest first.
  std::vector<std::size_t> neighbors;
  std::vector<double> distances;
  std::map<int, int> votes;
};

double euclidean_distance(std::span<const double> a, std::span<const double> b);

// Majority vote among the k nearest entries. Neighbour ordering ties go to the
// lower entry index; vote ties to the smaller summed distance, then the lower
// label id. Throws DimensionError on a dimension mismatch.
KnnResult knn_classify(const LabeledFeatureSet& features,
                       std::span<const double> query);

}  // namespace outfitrec
