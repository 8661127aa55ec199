#include "outfitrec/event_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "outfitrec/error.hpp"

namespace outfitrec {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string>& default_event_names() {
  static const std::vector<std::string> names{
      "concert",     "graduation", "meeting",    "mountain-trip", "picnic",
      "sea-holiday", "ski-holiday", "wedding",   "conference",    "exhibition",
      "fashion",     "protest",    "sport",      "theater-dance"};
  return names;
}

std::string sanitize(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_';
    out.push_back(ok ? c : '_');
  }
  return out;
}

double shoelace_area(std::span<const Vertex> polygon) {
  double a = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Vertex& p = polygon[i];
    const Vertex& q = polygon[(i + 1) % polygon.size()];
    a += p[0] * q[1] - q[0] * p[1];
  }
  return 0.5 * a;
}

bool inside(std::span<const Vertex> polygon, double px, double py) {
  bool in = false;
  for (std::size_t i = 0, j = polygon.size() - 1; i < polygon.size(); j = i++) {
    const double xi = polygon[i][0], yi = polygon[i][1];
    const double xj = polygon[j][0], yj = polygon[j][1];
    if ((yi > py) != (yj > py) &&
        px < (xj - xi) * (py - yi) / (yj - yi) + xi) {
      in = !in;
    }
  }
  return in;
}

}  // namespace

EventCatalog::EventCatalog() : EventCatalog(default_event_names()) {}

EventCatalog::EventCatalog(std::vector<std::string> names) {
  std::set<std::string> seen;
  for (auto& n : names) {
    if (n.empty() || !seen.insert(n).second) {
      throw ConfigError("event category names must be unique and non-empty");
    }
    categories_.push_back({int(categories_.size()), std::move(n)});
  }
}

const std::string& EventCatalog::name(int id) const {
  if (id < 0 || std::size_t(id) >= categories_.size()) {
    throw IntegrityError("unknown event category id " + std::to_string(id));
  }
  return categories_[std::size_t(id)].name;
}

std::optional<int> EventCatalog::find(std::string_view name) const {
  for (const auto& c : categories_) {
    if (c.name == name) return c.id;
  }
  return std::nullopt;
}

int EventCatalog::resolve(const nlohmann::json& value) const {
  if (value.is_number_integer()) {
    const int id = value.get<int>();
    if (id < 0 || std::size_t(id) >= categories_.size()) {
      throw ParseError("event label " + std::to_string(id) + " out of range");
    }
    return id;
  }
  if (value.is_string()) {
    if (auto id = find(value.get<std::string>())) return *id;
    throw ParseError("unknown event label '" + value.get<std::string>() + "'");
  }
  throw ParseError("event label must be a name or an id");
}

Detection detection_from_json(const nlohmann::json& j, const EventCatalog& catalog) {
  try {
    Detection d;
    d.source_image = j.at("source_image").get<std::string>();
    d.score = j.at("score").get<double>();
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      throw ParseError("detection score outside [0,1]");
    }
    const auto& b = j.at("bbox");
    if (!b.is_array() || b.size() != 4) throw ParseError("bbox must be [x,y,w,h]");
    d.bbox = {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
    for (const auto& v : j.at("polygon")) {
      if (!v.is_array() || v.size() != 2) {
        throw ParseError("polygon vertices must be [x,y] pairs");
      }
      d.polygon.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    d.garment_class = j.value("garment_class", std::string{});
    d.event_label = catalog.resolve(j.at("event_label"));
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("detection: ") + e.what());
  }
}

nlohmann::json to_json(const Detection& det, const EventCatalog& catalog) {
  nlohmann::json polygon = nlohmann::json::array();
  for (const auto& v : det.polygon) polygon.push_back({v[0], v[1]});
  return {{"source_image", det.source_image},
          {"score", det.score},
          {"bbox", {det.bbox.x, det.bbox.y, det.bbox.w, det.bbox.h}},
          {"polygon", polygon},
          {"garment_class", det.garment_class},
          {"event_label", catalog.name(det.event_label)}};
}

std::vector<Detection> read_detections(const fs::path& path,
                                       const EventCatalog& catalog) {
  std::vector<Detection> out;
  int lineno = 0;
  for (const auto& row : read_jsonl(path)) {
    ++lineno;
    try {
      out.push_back(detection_from_json(row, catalog));
    } catch (const ParseError& e) {
      throw ParseError(path.filename().string() + " record " +
                       std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Detection> filter_detections(std::span<const Detection> detections,
                                         double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError("detection threshold must lie in [0,1]");
  }
  std::vector<Detection> kept;
  for (const auto& d : detections) {
    if (d.score > threshold) kept.push_back(d);
  }
  return kept;
}

std::vector<std::uint8_t> rasterize_polygon(std::span<const Vertex> polygon,
                                            const BoundingBox& bbox) {
  std::vector<std::uint8_t> mask(std::size_t(bbox.w) * std::size_t(bbox.h), 0);
  if (polygon.size() < 3) return mask;
  for (int y = 0; y < bbox.h; ++y) {
    for (int x = 0; x < bbox.w; ++x) {
      if (inside(polygon, bbox.x + x + 0.5, bbox.y + y + 0.5)) {
        mask[std::size_t(y) * bbox.w + x] = 1;
      }
    }
  }
  return mask;
}

GarmentImage composite_garment(const Detection& det, const GarmentImage& source) {
  source.validate();
  const BoundingBox& b = det.bbox;
  if (b.w <= 0 || b.h <= 0 || b.x < 0 || b.y < 0 || b.x + b.w > source.width ||
      b.y + b.h > source.height) {
    throw GeometryError("bbox of detection on '" + det.source_image +
                        "' lies outside the source image");
  }
  for (const auto& v : det.polygon) {
    if (!std::isfinite(v[0]) || !std::isfinite(v[1]) || v[0] < 0 || v[1] < 0 ||
        v[0] > source.width || v[1] > source.height) {
      throw GeometryError("polygon of detection on '" + det.source_image +
                          "' lies outside the source image");
    }
    if (v[0] < b.x || v[1] < b.y || v[0] > b.x + b.w || v[1] > b.y + b.h) {
      throw GeometryError("polygon of detection on '" + det.source_image +
                          "' is not contained in its bbox");
    }
  }
  if (det.polygon.size() < 3 || shoelace_area(det.polygon) == 0.0) {
    throw GeometryError("degenerate polygon on '" + det.source_image + "'");
  }
  auto mask = rasterize_polygon(det.polygon, b);
  if (std::none_of(mask.begin(), mask.end(), [](auto m) { return m != 0; })) {
    throw GeometryError("polygon on '" + det.source_image +
                        "' covers no pixel centre");
  }

  GarmentImage out(b.w, b.h, Rgb{0, 0, 0}, det.source_image);
  for (int y = 0; y < b.h; ++y) {
    for (int x = 0; x < b.w; ++x) {
      if (mask[std::size_t(y) * b.w + x]) out.at(x, y) = source.at(b.x + x, b.y + y);
    }
  }
  out.mask = std::move(mask);
  return out;
}

nlohmann::json EventDatasetStats::to_json(const EventCatalog& catalog) const {
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t i = 0; i < per_category.size(); ++i) {
    per[catalog.name(int(i))] = per_category[i];
  }
  return {{"per_category", per},     {"total", total},
          {"train", train},          {"test", test},
          {"below_threshold", below_threshold}, {"skipped", skipped}};
}

ImageSource directory_image_source(const fs::path& dir) {
  return [dir](const std::string& source_image) -> std::optional<GarmentImage> {
    const fs::path p = dir / source_image;
    if (!fs::is_regular_file(p)) return std::nullopt;
    try {
      return read_png(p);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
}

double split_hash(std::string_view key) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return double(h >> 11) * 0x1.0p-53;
}

bool in_train_split(std::string_view source_image, double split_ratio) {
  return split_hash(source_image) < split_ratio;
}

EventDataset build_event_dataset(std::span<const Detection> detections,
                                 const ImageSource& images, double threshold,
                                 double split_ratio, const EventCatalog& catalog) {
  if (!(split_ratio >= 0.0 && split_ratio <= 1.0)) {
    throw ConfigError("split ratio must lie in [0,1]");
  }
  EventDataset ds;
  ds.stats.per_category.assign(catalog.size(), 0);

  auto kept = filter_detections(detections, threshold);
  ds.stats.below_threshold = detections.size() - kept.size();
  std::stable_sort(kept.begin(), kept.end(), [](const Detection& a, const Detection& b) {
    if (a.source_image != b.source_image) return a.source_image < b.source_image;
    return a.bbox < b.bbox;
  });

  std::map<std::string, std::optional<GarmentImage>> cache;
  std::map<std::string, int> id_uses;
  for (const auto& det : kept) {
    auto [it, fresh] = cache.try_emplace(det.source_image);
    if (fresh) it->second = images(det.source_image);
    if (!it->second) {
      ++ds.stats.skipped;
      ds.log.push_back("missing image " + det.source_image);
      continue;
    }
    EventGarment g;
    try {
      g.image = composite_garment(det, *it->second);
    } catch (const GeometryError& e) {
      ++ds.stats.skipped;
      ds.log.push_back(e.what());
      continue;
    }
    const auto& b = det.bbox;
    std::string id = sanitize(fs::path(det.source_image).stem().string()) + "_" +
                     std::to_string(b.x) + "_" + std::to_string(b.y) + "_" +
                     std::to_string(b.w) + "_" + std::to_string(b.h);
    if (const int n = id_uses[id]++; n > 0) id += "_" + std::to_string(n);
    g.id = id;
    g.image.source_id = id;
    g.detection = det;
    g.train = in_train_split(det.source_image, split_ratio);
    ++ds.stats.total;
    ++(g.train ? ds.stats.train : ds.stats.test);
    ++ds.stats.per_category.at(std::size_t(det.event_label));
    ds.garments.push_back(std::move(g));
  }
  return ds;
}

void write_event_dataset(const EventDataset& dataset, const fs::path& out_dir,
                         const EventCatalog& catalog) {
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");
  std::vector<GarmentRecord> records;
  for (const auto& g : dataset.garments) {
    GarmentRecord r;
    r.source_id = g.id;
    r.image_path = out_dir / "images" / (g.id + ".png");
    r.mask_path = out_dir / "masks" / (g.id + ".png");
    write_png(g.image, r.image_path);
    write_mask_png(*g.image.mask, g.image.width, g.image.height, *r.mask_path);
    r.labels = {{"event", catalog.name(g.detection.event_label)},
                {"garment_class", g.detection.garment_class},
                {"source_image", g.detection.source_image},
                {"score", g.detection.score},
                {"split", g.train ? "train" : "test"}};
    records.push_back(std::move(r));
  }
  write_garment_manifest(records, out_dir / "manifest.jsonl");
  std::ofstream stats(out_dir / "stats.json");
  if (!stats) throw IoError("cannot write " + (out_dir / "stats.json").string());
  stats << dataset.stats.to_json(catalog).dump(2) << '\n';
}

LabeledFeatureSet build_event_model(std::span<const GarmentRecord> records,
                                    const CisLexicon& lexicon,
                                    const EventCatalog& catalog, int k,
                                    bool train_only, const PreprocessConfig& cfg) {
  LabeledFeatureSet set(k);
  for (const auto& r : records) {
    if (!r.labels.contains("event")) continue;
    if (train_only && r.labels.value("split", std::string("train")) != "train") {
      continue;
    }
    const int label = catalog.resolve(r.labels.at("event"));
    const GarmentImage img = load_garment(r.image_path, r.mask_path, r.source_id);
    set.add(histogram_feature(garment_histogram(img, lexicon, cfg), lexicon), label,
            r.source_id);
  }
  return set;
}

LabeledFeatureSet build_event_model(std::span<const OutfitSample> outfits,
                                    const CisLexicon& lexicon,
                                    const EventCatalog& catalog, int k,
                                    const PreprocessConfig& cfg) {
  LabeledFeatureSet set(k);
  for (const auto& o : outfits) {
    if (!o.labels.event) continue;
    const auto label = catalog.find(*o.labels.event);
    if (!label) continue;
    const auto hist = outfit_concat_features(o.top, o.bottom, lexicon, cfg);
    set.add(histogram_feature(hist, lexicon), *label, o.source_id);
  }
  return set;
}

std::vector<double> classify_event(const ColorHistogram& outfit_histogram,
                                   const LabeledFeatureSet& model,
                                   const CisLexicon& lexicon,
                                   std::size_t num_categories) {
  const auto query = histogram_feature(outfit_histogram, lexicon);
  const KnnResult knn = knn_classify(model, query);
  std::vector<double> probs(num_categories, 0.0);
  const double k = double(knn.neighbors.size());
  for (const auto& [label, votes] : knn.votes) {
    if (label < 0 || std::size_t(label) >= num_categories) {
      throw IntegrityError("event model label " + std::to_string(label) +
                           " outside the category list");
    }
    probs[std::size_t(label)] = double(votes) / k;
  }
  return probs;
}

std::vector<double> classify_event(const GarmentImage& top,
                                   const GarmentImage& bottom,
                                   const LabeledFeatureSet& model,
                                   const CisLexicon& lexicon,
                                   std::size_t num_categories,
                                   const PreprocessConfig& cfg) {
  return classify_event(outfit_concat_features(top, bottom, lexicon, cfg), model,
                        lexicon, num_categories);
}

int argmax(std::span<const double> probs) {
  int best = -1;
  double best_p = -1.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > best_p) {
      best_p = probs[i];
      best = int(i);
    }
  }
  return best;
}

}  // namespace outfitrec
