#include "outfitrec/cis_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "outfitrec/error.hpp"

namespace outfitrec {

namespace {

constexpr int kSchemaVersion = 1;

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t)
                                   : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

template <typename T>
void sort_by_id(std::vector<T>& items) {
  std::sort(items.begin(), items.end(),
            [](const T& a, const T& b) { return a.id < b.id; });
}

const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                              const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(where + ": missing key '" + key + "'");
  }
  return obj.at(key);
}

}  // namespace

std::string_view to_string(ColorSpace space) {
  return space == ColorSpace::lab ? "lab" : "rgb";
}

ColorSpace color_space_from_string(std::string_view name) {
  if (name == "rgb") return ColorSpace::rgb;
  if (name == "lab") return ColorSpace::lab;
  throw ParseError("unknown color_space '" + std::string(name) + "'");
}

ColorCoords to_coords(Rgb rgb, ColorSpace space) {
  if (space == ColorSpace::rgb) {
    return {double(rgb.r), double(rgb.g), double(rgb.b)};
  }
  // sRGB (D65) -> XYZ -> CIELAB
  const double r = srgb_to_linear(rgb.r / 255.0);
  const double g = srgb_to_linear(rgb.g / 255.0);
  const double b = srgb_to_linear(rgb.b / 255.0);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = lab_f(x / 0.95047);
  const double fy = lab_f(y / 1.0);
  const double fz = lab_f(z / 1.08883);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

CisLexicon::CisLexicon(std::vector<CisColor> palette,
                       std::vector<CisTriplet> triplets,
                       std::vector<StylePattern> patterns, ColorSpace space)
    : palette_(std::move(palette)),
      triplets_(std::move(triplets)),
      patterns_(std::move(patterns)),
      space_(space) {
  if (palette_.empty()) throw IntegrityError("lexicon has an empty palette");
  sort_by_id(palette_);
  sort_by_id(triplets_);
  sort_by_id(patterns_);

  for (std::size_t i = 0; i < palette_.size(); ++i) {
    if (!color_index_.emplace(palette_[i].id, i).second) {
      throw IntegrityError("duplicate color id " +
                           std::to_string(palette_[i].id));
    }
  }

  std::set<std::string> pattern_names;
  for (std::size_t i = 0; i < patterns_.size(); ++i) {
    const auto& p = patterns_[i];
    if (!pattern_index_.emplace(p.id, i).second) {
      throw IntegrityError("duplicate pattern id " + std::to_string(p.id));
    }
    if (p.name.empty()) {
      throw IntegrityError("pattern " + std::to_string(p.id) + " has no name");
    }
    if (!pattern_names.insert(p.name).second) {
      throw IntegrityError("duplicate pattern name '" + p.name + "'");
    }
    if (!std::isfinite(p.warm_cool) || !std::isfinite(p.soft_hard)) {
      throw IntegrityError("pattern " + std::to_string(p.id) +
                           " has non-finite coordinates");
    }
  }

  std::set<int> used_patterns;
  for (std::size_t i = 0; i < triplets_.size(); ++i) {
    const auto& t = triplets_[i];
    const std::string label = "triplet " + std::to_string(t.id);
    if (!triplet_index_.emplace(t.id, i).second) {
      throw IntegrityError("duplicate triplet id " + std::to_string(t.id));
    }
    for (int cid : t.color_ids) {
      if (!color_index_.contains(cid)) {
        throw IntegrityError(label + " references unknown color id " +
                             std::to_string(cid));
      }
    }
    if (t.adjective.empty()) {
      throw IntegrityError(label + " has an empty adjective");
    }
    if (!pattern_index_.contains(t.pattern_id)) {
      throw IntegrityError(label + " references unknown pattern id " +
                           std::to_string(t.pattern_id));
    }
    used_patterns.insert(t.pattern_id);
  }

  for (const auto& p : patterns_) {
    if (!used_patterns.contains(p.id)) {
      throw IntegrityError("pattern " + std::to_string(p.id) + " ('" + p.name +
                           "') has no triplets");
    }
  }

  coords_.reserve(palette_.size());
  for (const auto& c : palette_) coords_.push_back(to_coords(c.rgb, space_));
}

const CisColor& CisLexicon::color(int id) const {
  auto it = color_index_.find(id);
  if (it == color_index_.end()) {
    throw IntegrityError("unknown color id " + std::to_string(id));
  }
  return palette_[it->second];
}

const CisTriplet& CisLexicon::triplet(int id) const {
  auto it = triplet_index_.find(id);
  if (it == triplet_index_.end()) {
    throw IntegrityError("unknown triplet id " + std::to_string(id));
  }
  return triplets_[it->second];
}

const StylePattern& CisLexicon::pattern(int id) const {
  auto it = pattern_index_.find(id);
  if (it == pattern_index_.end()) {
    throw IntegrityError("unknown pattern id " + std::to_string(id));
  }
  return patterns_[it->second];
}

const StylePattern* CisLexicon::find_pattern(std::string_view name) const {
  for (const auto& p : patterns_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t CisLexicon::palette_position(int color_id) const {
  auto it = color_index_.find(color_id);
  if (it == color_index_.end()) {
    throw IntegrityError("unknown color id " + std::to_string(color_id));
  }
  return it->second;
}

const ColorCoords& CisLexicon::coords(int color_id) const {
  return coords_[palette_position(color_id)];
}

CisLexicon CisLexicon::from_json(const nlohmann::json& doc) {
  try {
    if (!doc.is_object()) throw ParseError("lexicon: top level must be an object");
    const int version = require(doc, "cis_version", "lexicon").get<int>();
    if (version != kSchemaVersion) {
      throw ParseError("lexicon: unsupported cis_version " +
                       std::to_string(version));
    }
    ColorSpace space = ColorSpace::rgb;
    if (doc.contains("color_space")) {
      space = color_space_from_string(doc.at("color_space").get<std::string>());
    }

    std::vector<CisColor> colors;
    for (const auto& c : require(doc, "colors", "lexicon")) {
      const std::string where =
          "color record " + (c.contains("id") ? c["id"].dump() : c.dump());
      CisColor color;
      color.id = require(c, "id", where).get<int>();
      const auto& rgb = require(c, "rgb", where);
      if (!rgb.is_array() || rgb.size() != 3) {
        throw ParseError(where + ": rgb must be a triple");
      }
      std::array<int, 3> ch{};
      for (int i = 0; i < 3; ++i) {
        ch[i] = rgb[i].get<int>();
        if (ch[i] < 0 || ch[i] > 255) {
          throw IntegrityError("color " + std::to_string(color.id) +
                               ": channel out of range [0,255]");
        }
      }
      color.rgb = Rgb{std::uint8_t(ch[0]), std::uint8_t(ch[1]), std::uint8_t(ch[2])};
      color.name = c.value("name", std::string{});
      colors.push_back(std::move(color));
    }

    std::vector<CisTriplet> triplets;
    int position = 0;
    for (const auto& t : require(doc, "triplets", "lexicon")) {
      const std::string where = "triplet record " + std::to_string(position);
      CisTriplet triplet;
      triplet.id = t.value("id", position);
      const auto& ids = require(t, "color_ids", where);
      if (!ids.is_array() || ids.size() != 3) {
        throw ParseError(where + ": color_ids must be a triple");
      }
      for (int i = 0; i < 3; ++i) triplet.color_ids[i] = ids[i].get<int>();
      triplet.adjective = require(t, "adjective", where).get<std::string>();
      triplet.pattern_id = require(t, "pattern_id", where).get<int>();
      triplets.push_back(std::move(triplet));
      ++position;
    }

    std::vector<StylePattern> patterns;
    for (const auto& p : require(doc, "patterns", "lexicon")) {
      const std::string where = "pattern record " + p.dump();
      StylePattern pattern;
      pattern.id = require(p, "id", where).get<int>();
      pattern.name = require(p, "name", where).get<std::string>();
      pattern.warm_cool = require(p, "warm_cool", where).get<double>();
      pattern.soft_hard = require(p, "soft_hard", where).get<double>();
      patterns.push_back(std::move(pattern));
    }

    return CisLexicon(std::move(colors), std::move(triplets),
                      std::move(patterns), space);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("lexicon: ") + e.what());
  }
}

nlohmann::json CisLexicon::to_json() const {
  nlohmann::json doc;
  doc["cis_version"] = kSchemaVersion;
  doc["color_space"] = std::string(to_string(space_));
  auto& colors = doc["colors"] = nlohmann::json::array();
  for (const auto& c : palette_) {
    colors.push_back({{"id", c.id},
                      {"rgb", {int(c.rgb.r), int(c.rgb.g), int(c.rgb.b)}},
                      {"name", c.name}});
  }
  auto& triplets = doc["triplets"] = nlohmann::json::array();
  for (const auto& t : triplets_) {
    triplets.push_back({{"id", t.id},
                        {"color_ids", t.color_ids},
                        {"adjective", t.adjective},
                        {"pattern_id", t.pattern_id}});
  }
  auto& patterns = doc["patterns"] = nlohmann::json::array();
  for (const auto& p : patterns_) {
    patterns.push_back({{"id", p.id},
                        {"name", p.name},
                        {"warm_cool", p.warm_cool},
                        {"soft_hard", p.soft_hard}});
  }
  return doc;
}

CisLexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("lexicon " + path.filename().string() + ": " + e.what());
  }
  return CisLexicon::from_json(doc);
}

void save_lexicon(const CisLexicon& lexicon, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write lexicon file " + path.string());
  out << lexicon.to_json().dump(2) << '\n';
}

const CisColor& nearest_palette_color(const CisLexicon& lexicon, Rgb rgb) {
  const auto& palette = lexicon.palette();
  const auto& coords = lexicon.palette_coords();
  const ColorCoords q = to_coords(rgb, lexicon.color_space());
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  // palette is sorted by id, so a strict comparison keeps the lowest id on ties
  for (std::size_t i = 0; i < palette.size(); ++i) {
    const double d0 = coords[i][0] - q[0];
    const double d1 = coords[i][1] - q[1];
    const double d2 = coords[i][2] - q[2];
    const double d = d0 * d0 + d1 * d1 + d2 * d2;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return palette.at(best);
}

}  // namespace outfitrec
