#pragma once

#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "outfitrec/cis_data.hpp"
#include "outfitrec/image.hpp"

namespace fixtures {

using namespace outfitrec;

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("outfitrec-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// red=1 green=2 blue=3 white=4 yellow=5 gray=6; two patterns.
inline CisLexicon primary_lexicon() {
  std::vector<CisColor> colors{
      {1, {255, 0, 0}, "red"},     {2, {0, 255, 0}, "green"},  {3, {0, 0, 255}, "blue"},
      {4, {255, 255, 255}, "white"}, {5, {255, 255, 0}, "yellow"}, {6, {128, 128, 128}, "gray"}};
  std::vector<CisTriplet> triplets{{0, {1, 2, 3}, "vivid", 10},
                                   {1, {4, 6, 3}, "cool", 20},
                                   {2, {5, 1, 4}, "sunny", 10}};
  std::vector<StylePattern> patterns{{10, "dynamic", -1.0, 1.0}, {20, "modern", 1.0, 1.0}};
  return CisLexicon(colors, triplets, patterns);
}

// Random integer-RGB palette (distinct colors) with random triplets of
// distinct colors; pattern of triplet t is t % num_patterns.
inline CisLexicon random_lexicon(std::mt19937_64& rng, int num_colors, int num_triplets,
                                 int num_patterns) {
  std::uniform_int_distribution<int> ch(0, 255);
  std::set<std::uint32_t> seen;
  std::vector<CisColor> colors;
  while (int(colors.size()) < num_colors) {
    const Rgb c{std::uint8_t(ch(rng)), std::uint8_t(ch(rng)), std::uint8_t(ch(rng))};
    if (!seen.insert(pack(c)).second) continue;
    const int id = int(colors.size()) * 3 + 1;
    colors.push_back({id, c, "c" + std::to_string(id)});
  }
  std::uniform_int_distribution<int> pick(0, num_colors - 1);
  std::vector<CisTriplet> triplets;
  for (int t = 0; t < num_triplets; ++t) {
    int a = pick(rng), b = pick(rng), c = pick(rng);
    while (b == a) b = pick(rng);
    while (c == a || c == b) c = pick(rng);
    triplets.push_back({t, {colors[a].id, colors[b].id, colors[c].id}, "adj" + std::to_string(t),
                        t % num_patterns});
  }
  std::vector<StylePattern> patterns;
  for (int p = 0; p < num_patterns; ++p) {
    patterns.push_back({p, "pattern-" + std::to_string(p), 0.0, 0.0});
  }
  return CisLexicon(colors, triplets, patterns);
}

inline GarmentImage solid(int w, int h, Rgb c, std::string id = "img") {
  return GarmentImage(w, h, c, std::move(id));
}

// Image whose pixels are the given colors with the given counts, followed by
// black background up to width*height.
inline GarmentImage with_counts(int w, int h, const std::vector<std::pair<Rgb, int>>& fills,
                                std::string id = "img") {
  GarmentImage img(w, h, Rgb{0, 0, 0}, std::move(id));
  std::size_t i = 0;
  for (const auto& [c, n] : fills) {
    for (int k = 0; k < n; ++k) img.pixels.at(i++) = c;
  }
  return img;
}

}  // namespace fixtures
