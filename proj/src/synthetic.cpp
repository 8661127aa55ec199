#include "outfitrec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "outfitrec/error.hpp"

namespace outfitrec::synthetic {

namespace fs = std::filesystem;

namespace {

using Rng = std::mt19937_64;

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double rgb_distance(Rgb a, Rgb b) {
  const double dr = double(a.r) - b.r, dg = double(a.g) - b.g, db = double(a.b) - b.b;
  return std::sqrt(dr * dr + dg * dg + db * db);
}

std::uint8_t clamp_channel(int v) { return std::uint8_t(std::clamp(v, 0, 255)); }

Rgb jittered(Rgb c, int jitter, Rng& rng) {
  if (jitter <= 0) return c;
  return {clamp_channel(c.r + uniform_int(rng, -jitter, jitter)),
          clamp_channel(c.g + uniform_int(rng, -jitter, jitter)),
          clamp_channel(c.b + uniform_int(rng, -jitter, jitter))};
}

std::array<int, 3> sorted(std::array<int, 3> ids) {
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Paints `counts[i]` pixels of `colors[i]` at shuffled positions of a black
// square image.
GarmentImage paint(int size, const std::vector<std::pair<Rgb, int>>& fills, int jitter,
                   Rng& rng, std::string id) {
  GarmentImage img(size, size, Rgb{0, 0, 0}, std::move(id));
  std::vector<std::size_t> slots(img.size());
  for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
  std::shuffle(slots.begin(), slots.end(), rng);
  std::size_t next = 0;
  for (const auto& [color, count] : fills) {
    for (int n = 0; n < count; ++n) {
      if (next == slots.size()) throw ConfigError("synthetic image too small");
      img.pixels[slots[next++]] = jittered(color, jitter, rng);
    }
  }
  return img;
}

const std::vector<std::string>& top_categories() {
  static const std::vector<std::string> v{"shirt", "t-shirt", "sweater", "blouse"};
  return v;
}

const std::vector<std::string>& bottom_categories() {
  static const std::vector<std::string> v{"jeans", "skirt", "trousers", "shorts"};
  return v;
}

}  // namespace

const std::vector<std::string>& pattern_names() {
  static const std::vector<std::string> names{
      "romantic", "pretty", "casual",  "dynamic", "gorgeous",
      "wild",     "elegant", "chic",   "dandy",   "classic",
      "clear",    "cool-casual", "modern", "natural", "formal"};
  return names;
}

CisLexicon make_lexicon(const LexiconSpec& spec) {
  if (spec.num_patterns < 1 || spec.num_patterns > int(pattern_names().size())) {
    throw ConfigError("synthetic lexicon supports 1..15 patterns");
  }
  if (spec.num_colors < 3 || spec.num_triplets < spec.num_patterns) {
    throw ConfigError("synthetic lexicon needs >= 3 colors and a triplet per pattern");
  }
  Rng rng(spec.seed);

  std::vector<CisColor> palette;
  int attempts = 0;
  while (int(palette.size()) < spec.num_colors) {
    if (++attempts > 200000) throw ConfigError("cannot place separated palette colors");
    Rgb c{std::uint8_t(uniform_int(rng, 0, 255)), std::uint8_t(uniform_int(rng, 0, 255)),
          std::uint8_t(uniform_int(rng, 0, 255))};
    if (std::max({c.r, c.g, c.b}) < 48) continue;
    const bool far = std::all_of(palette.begin(), palette.end(), [&](const CisColor& p) {
      return rgb_distance(p.rgb, c) >= spec.min_separation;
    });
    if (!far) continue;
    const int id = int(palette.size());
    palette.push_back({id, c, "color-" + std::to_string(id)});
  }

  std::vector<StylePattern> patterns;
  for (int p = 0; p < spec.num_patterns; ++p) {
    const double angle = 2.0 * M_PI * p / spec.num_patterns;
    patterns.push_back({p, pattern_names()[std::size_t(p)], std::cos(angle), std::sin(angle)});
  }

  std::vector<CisTriplet> triplets;
  std::set<std::array<int, 3>> used;
  attempts = 0;
  while (int(triplets.size()) < spec.num_triplets) {
    if (++attempts > 200000) throw ConfigError("cannot draw distinct triplets");
    std::array<int, 3> ids{uniform_int(rng, 0, spec.num_colors - 1),
                           uniform_int(rng, 0, spec.num_colors - 1),
                           uniform_int(rng, 0, spec.num_colors - 1)};
    if (ids[0] == ids[1] || ids[1] == ids[2] || ids[0] == ids[2]) continue;
    if (!used.insert(sorted(ids)).second) continue;
    const int id = int(triplets.size());
    triplets.push_back({id, ids, "adjective-" + std::to_string(id), id % spec.num_patterns});
  }
  return CisLexicon(std::move(palette), std::move(triplets), std::move(patterns), spec.space);
}

std::vector<OutfitSample> make_outfits(const CisLexicon& lexicon, const OutfitSpec& spec) {
  Rng rng(spec.seed);
  const auto& palette = lexicon.palette();
  const int n_colors = int(palette.size());

  std::vector<std::vector<const CisTriplet*>> by_pattern;
  std::vector<int> pattern_ids;
  for (const auto& p : lexicon.patterns()) {
    if (std::find(spec.skip_patterns.begin(), spec.skip_patterns.end(), p.name) !=
        spec.skip_patterns.end()) {
      continue;
    }
    std::vector<const CisTriplet*> ts;
    for (const auto& t : lexicon.triplets()) {
      if (t.pattern_id == p.id) ts.push_back(&t);
    }
    pattern_ids.push_back(p.id);
    by_pattern.push_back(std::move(ts));
  }
  if (pattern_ids.empty()) throw ConfigError("no patterns left to generate outfits");

  std::set<std::array<int, 3>> lexicon_sets;
  for (const auto& t : lexicon.triplets()) lexicon_sets.insert(sorted(t.color_ids));

  const int area = spec.image_size * spec.image_size;
  // Counts scale with the image; the accent never outnumbers the bottom color.
  const int count_a = area * 3 / 8, count_b = area * 9 / 32, count_c = area / 4;
  const int accent = area / 21;

  std::vector<OutfitSample> outfits;
  for (int i = 0; i < spec.count; ++i) {
    std::array<int, 3> colors{};
    std::optional<std::string> style;
    const bool unclear =
        std::uniform_real_distribution<double>(0.0, 1.0)(rng) < spec.unclear_fraction;
    if (unclear) {
      do {
        colors = {uniform_int(rng, 0, n_colors - 1), uniform_int(rng, 0, n_colors - 1),
                  uniform_int(rng, 0, n_colors - 1)};
      } while (colors[0] == colors[1] || colors[1] == colors[2] || colors[0] == colors[2] ||
               lexicon_sets.contains(sorted(colors)));
    } else {
      const std::size_t slot = std::size_t(i) % pattern_ids.size();
      const auto& ts = by_pattern[slot];
      const CisTriplet* t = ts[std::size_t(uniform_int(rng, 0, int(ts.size()) - 1))];
      colors = t->color_ids;
      std::shuffle(colors.begin(), colors.end(), rng);
      style = lexicon.pattern(pattern_ids[slot]).name;
    }

    const int event = uniform_int(rng, 0, int(spec.events.size()) - 1);
    int accent_id = -1;
    for (int offset = 1; accent_id < 0; ++offset) {
      const int candidate = (2 * event + offset) % n_colors;
      if (std::find(colors.begin(), colors.end(), palette[std::size_t(candidate)].id) ==
          colors.end()) {
        accent_id = palette[std::size_t(candidate)].id;
      }
    }
    const Rgb accent_rgb = lexicon.color(accent_id).rgb;
    const std::string id = "outfit-" + std::to_string(100000 + i).substr(1);

    OutfitSample s;
    s.source_id = id;
    s.top = paint(spec.image_size,
                  {{lexicon.color(colors[0]).rgb, count_a},
                   {lexicon.color(colors[1]).rgb, count_b},
                   {accent_rgb, accent / 2}},
                  spec.jitter, rng, id + "/top");
    s.bottom = paint(spec.image_size,
                     {{lexicon.color(colors[2]).rgb, count_c}, {accent_rgb, accent - accent / 2}},
                     spec.jitter, rng, id + "/bottom");
    s.bottom_id = "bottom-" + id.substr(7);
    s.labels.style = style;
    s.labels.event = spec.events.name(event);
    s.labels.top_category = top_categories()[std::size_t(uniform_int(rng, 0, 3))];
    s.labels.bottom_category = bottom_categories()[std::size_t(uniform_int(rng, 0, 3))];
    outfits.push_back(std::move(s));
  }
  return outfits;
}

std::vector<OutfitRecord> write_outfits(const std::vector<OutfitSample>& outfits,
                                        const fs::path& dir,
                                        const std::string& manifest_name) {
  fs::create_directories(dir / "images");
  std::vector<OutfitRecord> records;
  for (const auto& o : outfits) {
    OutfitRecord r;
    r.source_id = o.source_id;
    r.top_image = dir / "images" / (o.source_id + "-top.png");
    r.bottom_image = dir / "images" / (o.source_id + "-bottom.png");
    write_png(o.top, r.top_image);
    write_png(o.bottom, r.bottom_image);
    r.bottom_id = o.bottom_id;
    r.labels = o.labels;
    records.push_back(std::move(r));
  }
  write_outfit_manifest(records, dir / manifest_name);
  return records;
}

Scenes make_scenes(const CisLexicon& lexicon, const SceneSpec& spec) {
  Rng rng(spec.seed);
  const auto& palette = lexicon.palette();
  static const std::vector<std::string> classes{"top", "trousers", "skirt", "dress",
                                                "outwear", "shorts"};
  Scenes out;
  for (int s = 0; s < spec.scenes; ++s) {
    const std::string name = "scene-" + std::to_string(1000 + s).substr(1) + ".png";
    GarmentImage img(spec.width, spec.height, {}, name);
    for (auto& p : img.pixels) {
      p = {std::uint8_t(uniform_int(rng, 20, 235)), std::uint8_t(uniform_int(rng, 20, 235)),
           std::uint8_t(uniform_int(rng, 20, 235))};
    }
    const int event = uniform_int(rng, 0, int(spec.events.size()) - 1);
    for (int g = 0; g < spec.garments_per_scene; ++g) {
      const int bw = uniform_int(rng, 6, spec.width / 2);
      const int bh = uniform_int(rng, 6, spec.height / 2);
      const int bx = uniform_int(rng, 0, spec.width - bw);
      const int by = uniform_int(rng, 0, spec.height - bh);
      Detection det;
      det.source_image = name;
      det.bbox = {bx, by, bw, bh};
      // Convex quadrilateral touching all four bbox sides.
      auto along = [&](int lo, int len) { return lo + 1 + uniform_int(rng, 0, len - 2); };
      det.polygon = {{double(along(bx, bw)), double(by)},
                     {double(bx + bw), double(along(by, bh))},
                     {double(along(bx, bw)), double(by + bh)},
                     {double(bx), double(along(by, bh))}};
      det.score = std::uniform_real_distribution<double>(0.5, 1.0)(rng);
      det.garment_class = classes[std::size_t(uniform_int(rng, 0, int(classes.size()) - 1))];
      det.event_label = event;
      const Rgb fill = palette[std::size_t(uniform_int(rng, 0, int(palette.size()) - 1))].rgb;
      const auto mask = rasterize_polygon(det.polygon, det.bbox);
      for (int y = 0; y < bh; ++y) {
        for (int x = 0; x < bw; ++x) {
          if (mask[std::size_t(y) * bw + x]) img.at(bx + x, by + y) = jittered(fill, 2, rng);
        }
      }
      out.detections.push_back(std::move(det));
    }
    out.images.push_back(std::move(img));
  }
  return out;
}

void write_scenes(const Scenes& scenes, const fs::path& image_dir,
                  const fs::path& detections_path, const EventCatalog& catalog) {
  fs::create_directories(image_dir);
  for (const auto& img : scenes.images) write_png(img, image_dir / img.source_id);
  std::ofstream out(detections_path);
  if (!out) throw IoError("cannot write " + detections_path.string());
  for (const auto& d : scenes.detections) out << to_json(d, catalog).dump() << '\n';
}

}  // namespace outfitrec::synthetic
