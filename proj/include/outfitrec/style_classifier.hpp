#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "outfitrec/cis_data.hpp"
#include "outfitrec/knn.hpp"
#include "outfitrec/manifest.hpp"
#include "outfitrec/preprocess.hpp"

namespace outfitrec {

enum class DistanceVariant {
  l2,       // plain Euclidean distance between 9-d color vectors
  sqrt_l2,  // square root of that distance (literal printed form)
};

DistanceVariant distance_variant_from_string(std::string_view name);
std::string_view to_string(DistanceVariant variant);

struct StyleClassifierConfig {
  double theta = 0.0;
  DistanceVariant distance_variant = DistanceVariant::l2;
  PreprocessConfig preprocess;

  // Throws ConfigError unless theta > 0.
  void validate() const;
};

// The 6 orderings of a triple, lexicographic: index 0 is the identity and
// index 5 the reversal.
inline constexpr std::array<std::array<int, 3>, 6> kPermutations{{
    {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0},
}};

struct StyleMatch {
  double d_star = 0.0;
  int matched_triplet = -1;
  int permutation = 0;
  int pattern = -1;
  bool accepted = false;

  friend bool operator==(const StyleMatch&, const StyleMatch&) = default;
};

// Minimum over lexicon triplets and permutations of the outfit triple of the
// distance between the two stacked 9-d color vectors. Ties: lowest triplet
// id, then lowest permutation index. accepted <=> d_star < theta.
StyleMatch style_distance(const OutfitTriple& outfit, const CisLexicon& lexicon,
                          const StyleClassifierConfig& cfg);

StyleMatch classify_style(const ColorHistogram& outfit_histogram,
                          const CisLexicon& lexicon,
                          const StyleClassifierConfig& cfg);

StyleMatch classify_style(const GarmentImage& top, const GarmentImage& bottom,
                          const CisLexicon& lexicon,
                          const StyleClassifierConfig& cfg);

// Per-outfit outcome of the labeling pass.
struct StyleLabel {
  std::string source_id;
  std::optional<StyleMatch> match;
  // Set when the record failed (e.g. empty foreground).
  std::string error;
  bool excluded = false;

  bool retained() const { return match && match->accepted && !excluded; }
};

struct LabelDatasetResult {
  // Every record, sorted by source_id.
  std::vector<StyleLabel> labels;
  std::size_t retained = 0;
  std::size_t rejected = 0;
  std::size_t failed = 0;
  // Exclusions by pattern name.
  std::map<std::string, std::size_t> excluded;
  // Retained outfits per pattern name.
  std::map<std::string, std::size_t> distribution;
};

struct LabelDatasetOptions {
  std::set<std::string> exclude_patterns;
  unsigned workers = 1;
};

LabelDatasetResult build_label_dataset(std::span<const OutfitSample> outfits,
                                       const CisLexicon& lexicon,
                                       const StyleClassifierConfig& cfg,
                                       const LabelDatasetOptions& options = {});

// Manifest form: image loading failures are recorded per record.
LabelDatasetResult build_label_dataset(std::span<const OutfitRecord> records,
                                       const CisLexicon& lexicon,
                                       const StyleClassifierConfig& cfg,
                                       const LabelDatasetOptions& options = {});

// Smallest threshold that accepts the given quantile (nearest rank) of the
// d_star values of a validation batch; outfits that fail preprocessing are
// ignored. Throws
// ConfigError when nothing could be classified.
double calibrate_theta(std::span<const OutfitSample> validation, const CisLexicon& lexicon,
                       DistanceVariant variant = DistanceVariant::l2,
                       double quantile = 0.9, const PreprocessConfig& cfg = {});

// Nearest-neighbour style baseline over outfit histogram features; labels are
// pattern ids.
LabeledFeatureSet build_style_feature_set(std::span<const OutfitSample> outfits,
                                          const CisLexicon& lexicon, int k,
                                          const PreprocessConfig& cfg = {});

}  // namespace outfitrec
