#include "outfitrec/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "outfitrec/error.hpp"

namespace outfitrec {

void ColorHistogram::add(int color_id, std::int64_t n) {
  counts[color_id] += n;
  total += n;
}

ColorHistogram& ColorHistogram::operator+=(const ColorHistogram& other) {
  for (const auto& [id, n] : other.counts) counts[id] += n;
  total += other.total;
  return *this;
}

std::vector<Rgb> extract_foreground(const GarmentImage& image,
                                    const PreprocessConfig& cfg) {
  if (image.empty()) {
    throw EmptyForegroundError("image '" + image.source_id + "' is empty");
  }
  image.validate();
  std::vector<Rgb> fg;
  if (image.mask) {
    const auto& mask = *image.mask;
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
      if (mask[i]) fg.push_back(image.pixels[i]);
    }
  } else {
    const int tol = cfg.background_tolerance;
    for (const Rgb& p : image.pixels) {
      if (p.r > tol || p.g > tol || p.b > tol) fg.push_back(p);
    }
  }
  if (fg.empty()) {
    throw EmptyForegroundError("image '" + image.source_id +
                               "' has no foreground pixels");
  }
  return fg;
}

ColorHistogram quantize_histogram(const CisLexicon& lexicon,
                                  std::span<const Rgb> foreground) {
  ColorHistogram hist;
  std::unordered_map<std::uint32_t, int> cache;
  for (const Rgb& p : foreground) {
    auto [it, fresh] = cache.try_emplace(pack(p), 0);
    if (fresh) it->second = nearest_palette_color(lexicon, p).id;
    hist.add(it->second);
  }
  return hist;
}

OutfitTriple top3(const ColorHistogram& histogram) {
  if (histogram.counts.empty()) {
    throw DimensionError("top3 needs at least one color");
  }
  std::vector<std::pair<int, std::int64_t>> ranked(histogram.counts.begin(),
                                                   histogram.counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  OutfitTriple triple;
  triple.distinct = int(std::min<std::size_t>(3, ranked.size()));
  for (int i = 0; i < 3; ++i) {
    triple.colors[i] = ranked[std::min<std::size_t>(i, ranked.size() - 1)].first;
  }
  return triple;
}

ColorHistogram garment_histogram(const GarmentImage& image,
                                 const CisLexicon& lexicon,
                                 const PreprocessConfig& cfg) {
  const auto fg = extract_foreground(image, cfg);
  return quantize_histogram(lexicon, fg);
}

ColorHistogram outfit_concat_features(const GarmentImage& top,
                                      const GarmentImage& bottom,
                                      const CisLexicon& lexicon,
                                      const PreprocessConfig& cfg) {
  return garment_histogram(top, lexicon, cfg) +
         garment_histogram(bottom, lexicon, cfg);
}

std::vector<double> histogram_feature(const ColorHistogram& histogram,
                                      const CisLexicon& lexicon) {
  std::vector<double> v(lexicon.palette().size(), 0.0);
  double norm2 = 0.0;
  for (const auto& [id, n] : histogram.counts) {
    const double x = double(n);
    v[lexicon.palette_position(id)] = x;
    norm2 += x * x;
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
  }
  return v;
}

int dominant_color(const ColorHistogram& histogram) {
  return top3(histogram).colors[0];
}

}  // namespace outfitrec
