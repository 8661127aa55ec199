#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "outfitrec/cis_data.hpp"
#include "outfitrec/image.hpp"

namespace outfitrec {

struct PreprocessConfig {
  // A pixel of an unmasked image is background when every channel is <= this.
  int background_tolerance = 0;
};

// Counts of quantized foreground pixels, keyed by palette color id.
struct ColorHistogram {
  std::map<int, std::int64_t> counts;
  std::int64_t total = 0;

  void add(int color_id, std::int64_t n = 1);
  std::size_t distinct() const { return counts.size(); }

  ColorHistogram& operator+=(const ColorHistogram& other);
  friend ColorHistogram operator+(ColorHistogram a, const ColorHistogram& b) {
    a += b;
    return a;
  }
  friend bool operator==(const ColorHistogram&, const ColorHistogram&) = default;
};

// Three most frequent colors, most frequent first.
struct OutfitTriple {
  std::array<int, 3> colors{};
  // Number of distinct colors actually present (1..3); < 3 means the last
  // color was repeated to pad the triple.
  int distinct = 3;

  bool padded() const { return distinct < 3; }
  friend bool operator==(const OutfitTriple&, const OutfitTriple&) = default;
};

// Foreground pixels (as a multiset, in raster order). Throws
// EmptyForegroundError when nothing survives.
std::vector<Rgb> extract_foreground(const GarmentImage& image,
                                    const PreprocessConfig& cfg = {});

ColorHistogram quantize_histogram(const CisLexicon& lexicon,
                                  std::span<const Rgb> foreground);

OutfitTriple top3(const ColorHistogram& histogram);

// Histogram of the union of both foregrounds: the pixel-statistics form of a
// side-by-side top/bottom image.
ColorHistogram outfit_concat_features(const GarmentImage& top,
                                      const GarmentImage& bottom,
                                      const CisLexicon& lexicon,
                                      const PreprocessConfig& cfg = {});

ColorHistogram garment_histogram(const GarmentImage& image,
                                 const CisLexicon& lexicon,
                                 const PreprocessConfig& cfg = {});

// Dense vector over palette positions, L2-normalized. All-zero histograms map
// to the zero vector.
std::vector<double> histogram_feature(const ColorHistogram& histogram,
                                      const CisLexicon& lexicon);

// Color id with the highest count (lowest id on ties).
int dominant_color(const ColorHistogram& histogram);

}  // namespace outfitrec
