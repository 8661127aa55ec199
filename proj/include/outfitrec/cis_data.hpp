#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace outfitrec {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
  friend auto operator<=>(const Rgb&, const Rgb&) = default;
};

inline std::uint32_t pack(Rgb c) {
  return (std::uint32_t{c.r} << 16) | (std::uint32_t{c.g} << 8) | c.b;
}

enum class ColorSpace { rgb, lab };

std::string_view to_string(ColorSpace space);
ColorSpace color_space_from_string(std::string_view name);

// A point in the lexicon's distance space (RGB channels or CIELAB L*a*b*).
using ColorCoords = std::array<double, 3>;

ColorCoords to_coords(Rgb rgb, ColorSpace space);

struct CisColor {
  int id = 0;
  Rgb rgb;
  std::string name;

  friend bool operator==(const CisColor&, const CisColor&) = default;
};

struct CisTriplet {
  int id = 0;
  std::array<int, 3> color_ids{};
  std::string adjective;
  int pattern_id = 0;

  friend bool operator==(const CisTriplet&, const CisTriplet&) = default;
};

struct StylePattern {
  int id = 0;
  std::string name;
  double warm_cool = 0.0;
  double soft_hard = 0.0;

  friend bool operator==(const StylePattern&, const StylePattern&) = default;
};

// Immutable Color Image Scale vocabulary. All three lists are kept sorted by
// id; the palette position of a color (its index in palette()) is the
// dimension used by histogram feature vectors.
class CisLexicon {
 public:
  CisLexicon() = default;

  // Validates referential integrity and builds the id indexes. Throws
  // IntegrityError naming the offending record.
  CisLexicon(std::vector<CisColor> palette, std::vector<CisTriplet> triplets,
             std::vector<StylePattern> patterns,
             ColorSpace space = ColorSpace::rgb);

  static CisLexicon from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  const std::vector<CisColor>& palette() const { return palette_; }
  const std::vector<CisTriplet>& triplets() const { return triplets_; }
  const std::vector<StylePattern>& patterns() const { return patterns_; }
  ColorSpace color_space() const { return space_; }

  bool has_color(int id) const { return color_index_.contains(id); }
  bool has_pattern(int id) const { return pattern_index_.contains(id); }

  const CisColor& color(int id) const;
  const CisTriplet& triplet(int id) const;
  const StylePattern& pattern(int id) const;
  const StylePattern* find_pattern(std::string_view name) const;

  // Index of a color id in palette().
  std::size_t palette_position(int color_id) const;
  // Precomputed coordinates of palette colors in the configured space.
  const ColorCoords& coords(int color_id) const;
  const std::vector<ColorCoords>& palette_coords() const { return coords_; }

  friend bool operator==(const CisLexicon& a, const CisLexicon& b) {
    return a.space_ == b.space_ && a.palette_ == b.palette_ &&
           a.triplets_ == b.triplets_ && a.patterns_ == b.patterns_;
  }

 private:
  std::vector<CisColor> palette_;
  std::vector<CisTriplet> triplets_;
  std::vector<StylePattern> patterns_;
  ColorSpace space_ = ColorSpace::rgb;

  std::unordered_map<int, std::size_t> color_index_;
  std::unordered_map<int, std::size_t> triplet_index_;
  std::unordered_map<int, std::size_t> pattern_index_;
  std::vector<ColorCoords> coords_;
};

CisLexicon load_lexicon(const std::filesystem::path& path);
void save_lexicon(const CisLexicon& lexicon, const std::filesystem::path& path);

// Palette color at minimum Euclidean distance in the lexicon's color space;
// ties go to the lowest color id. Requires a non-empty palette.
const CisColor& nearest_palette_color(const CisLexicon& lexicon, Rgb rgb);

}  // namespace outfitrec
