#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "outfitrec/cis_data.hpp"
#include "outfitrec/image.hpp"
#include "outfitrec/knn.hpp"
#include "outfitrec/manifest.hpp"
#include "outfitrec/preprocess.hpp"

namespace outfitrec {

struct EventCategory {
  int id = 0;
  std::string name;
};

// Ordered list of social-event categories; ids are list positions.
class EventCatalog {
 public:
  // The 14 social-event categories of the garment/event dataset.
  EventCatalog();
  explicit EventCatalog(std::vector<std::string> names);

  std::size_t size() const { return categories_.size(); }
  const std::vector<EventCategory>& categories() const { return categories_; }
  const std::string& name(int id) const;
  std::optional<int> find(std::string_view name) const;
  // Resolves a name or a numeric id; throws ParseError.
  int resolve(const nlohmann::json& value) const;

 private:
  std::vector<EventCategory> categories_;
};

struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  friend auto operator<=>(const BoundingBox&, const BoundingBox&) = default;
};

using Vertex = std::array<double, 2>;

struct Detection {
  std::string source_image;
  double score = 0.0;
  BoundingBox bbox;
  std::vector<Vertex> polygon;
  std::string garment_class;
  int event_label = 0;
};

Detection detection_from_json(const nlohmann::json& j, const EventCatalog& catalog);
nlohmann::json to_json(const Detection& det, const EventCatalog& catalog);
std::vector<Detection> read_detections(const std::filesystem::path& path,
                                       const EventCatalog& catalog);

// Keeps detections whose score is strictly greater than the threshold, in
// their original order.
std::vector<Detection> filter_detections(std::span<const Detection> detections,
                                         double threshold);

// Even-odd fill of the polygon sampled at pixel centres, over the bbox
// window. Result is row-major bbox.w x bbox.h.
std::vector<std::uint8_t> rasterize_polygon(std::span<const Vertex> polygon,
                                            const BoundingBox& bbox);

// Crops the source to the bbox, keeps the pixels inside the polygon and paints
// everything else exact black. The mask field holds the rasterized polygon.
// Throws GeometryError for out-of-bounds or degenerate polygons.
GarmentImage composite_garment(const Detection& det, const GarmentImage& source);

struct EventDatasetStats {
  std::vector<std::size_t> per_category;
  std::size_t total = 0;
  std::size_t train = 0;
  std::size_t test = 0;
  std::size_t below_threshold = 0;
  std::size_t skipped = 0;

  nlohmann::json to_json(const EventCatalog& catalog) const;
};

struct EventGarment {
  std::string id;
  Detection detection;
  GarmentImage image;
  bool train = true;
};

struct EventDataset {
  // Sorted by (source_image, bbox).
  std::vector<EventGarment> garments;
  EventDatasetStats stats;
  std::vector<std::string> log;
};

// Returns the decoded image for a source id, or nullopt when missing.
using ImageSource =
    std::function<std::optional<GarmentImage>(const std::string& source_image)>;

ImageSource directory_image_source(const std::filesystem::path& dir);

// Position of a key in [0, 1) under a fixed 64-bit FNV-1a hash.
double split_hash(std::string_view key);
bool in_train_split(std::string_view source_image, double split_ratio);

EventDataset build_event_dataset(std::span<const Detection> detections,
                                 const ImageSource& images, double threshold,
                                 double split_ratio,
                                 const EventCatalog& catalog = {});

// Writes images/, masks/, manifest.jsonl (a garment manifest whose labels
// carry event, garment_class and split) and stats.json.
void write_event_dataset(const EventDataset& dataset,
                         const std::filesystem::path& out_dir,
                         const EventCatalog& catalog = {});

// k-NN event model over garment histograms from a garment manifest whose
// labels carry an `event` name. Only `split == "train"` records are used
// when `train_only` is set.
LabeledFeatureSet build_event_model(std::span<const GarmentRecord> records,
                                    const CisLexicon& lexicon,
                                    const EventCatalog& catalog, int k,
                                    bool train_only = true,
                                    const PreprocessConfig& cfg = {});

// k-NN event model over outfit histograms with labels.event set.
LabeledFeatureSet build_event_model(std::span<const OutfitSample> outfits,
                                    const CisLexicon& lexicon,
                                    const EventCatalog& catalog, int k,
                                    const PreprocessConfig& cfg = {});

// Vote fractions of the k nearest neighbours over all catalog categories.
std::vector<double> classify_event(const ColorHistogram& outfit_histogram,
                                   const LabeledFeatureSet& model,
                                   const CisLexicon& lexicon,
                                   std::size_t num_categories);

std::vector<double> classify_event(const GarmentImage& top,
                                   const GarmentImage& bottom,
                                   const LabeledFeatureSet& model,
                                   const CisLexicon& lexicon,
                                   std::size_t num_categories,
                                   const PreprocessConfig& cfg = {});

// Index of the largest entry; lowest index on ties.
int argmax(std::span<const double> probs);

}  // namespace outfitrec
