#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "outfitrec/cis_data.hpp"
#include "outfitrec/event_pipeline.hpp"
#include "outfitrec/manifest.hpp"

namespace outfitrec::synthetic {

// Desk-scale stand-ins for the color scale and the outfit/event datasets.
// Everything is a pure function of the seed.

struct LexiconSpec {
  int num_colors = 40;
  int num_triplets = 60;
  int num_patterns = 15;
  // Minimum RGB distance between palette colors.
  double min_separation = 30.0;
  ColorSpace space = ColorSpace::rgb;
  std::uint64_t seed = 1;
};

// Fifteen lifestyle pattern names; the first num_patterns are used.
const std::vector<std::string>& pattern_names();

CisLexicon make_lexicon(const LexiconSpec& spec);

struct OutfitSpec {
  int count = 100;
  std::uint64_t seed = 2;
  int image_size = 16;
  // Patterns never used as a generating style.
  std::vector<std::string> skip_patterns{"casual"};
  // Fraction of outfits drawn from random colors instead of a triplet; these
  // carry no style label.
  double unclear_fraction = 0.0;
  // Maximum per-channel jitter applied to every pixel.
  int jitter = 2;
  EventCatalog events;
};

// Each outfit: a top with the two most frequent colors of a lexicon triplet,
// a bottom with the third, and a small event-specific accent color on both.
// The top-3 quantized colors of the pair are exactly the triplet's colors.
std::vector<OutfitSample> make_outfits(const CisLexicon& lexicon, const OutfitSpec& spec);

// Writes images under dir/images and an outfit manifest at dir/<name>.
std::vector<OutfitRecord> write_outfits(const std::vector<OutfitSample>& outfits,
                                        const std::filesystem::path& dir,
                                        const std::string& manifest_name = "outfits.jsonl");

struct SceneSpec {
  int scenes = 10;
  int garments_per_scene = 3;
  int width = 64;
  int height = 64;
  std::uint64_t seed = 3;
  EventCatalog events;
};

struct Scenes {
  std::vector<GarmentImage> images;  // source_id is the file name
  std::vector<Detection> detections;
};

// Street-photo stand-ins: noisy non-black backgrounds with polygonal garments
// and detector-style records (scores spread over [0.5, 1]).
Scenes make_scenes(const CisLexicon& lexicon, const SceneSpec& spec);

void write_scenes(const Scenes& scenes, const std::filesystem::path& image_dir,
                  const std::filesystem::path& detections_path,
                  const EventCatalog& catalog = {});

}  // namespace outfitrec::synthetic
