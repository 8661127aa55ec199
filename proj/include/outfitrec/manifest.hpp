#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "outfitrec/image.hpp"

namespace outfitrec {

// Annotations an outfit may carry. Style and event are category names; the
// garment categories are free text (e.g. "skirt", "jeans").
struct OutfitLabels {
  std::optional<std::string> style;
  std::optional<std::string> event;
  std::optional<std::string> top_category;
  std::optional<std::string> bottom_category;

  friend bool operator==(const OutfitLabels&, const OutfitLabels&) = default;
};

nlohmann::json to_json(const OutfitLabels& labels);
OutfitLabels labels_from_json(const nlohmann::json& j);

// One line of an outfit manifest (JSON-lines). Paths are resolved relative
// to the manifest's directory when read.
struct OutfitRecord {
  std::string source_id;
  std::filesystem::path top_image;
  std::optional<std::filesystem::path> top_mask;
  std::filesystem::path bottom_image;
  std::optional<std::filesystem::path> bottom_mask;
  std::string bottom_id;
  OutfitLabels labels;
};

struct OutfitSample {
  std::string source_id;
  GarmentImage top;
  GarmentImage bottom;
  std::string bottom_id;
  OutfitLabels labels;
};

// One line of a garment manifest: `source_id`, `image_path`, optional
// `mask_path`, optional `labels` object.
struct GarmentRecord {
  std::string source_id;
  std::filesystem::path image_path;
  std::optional<std::filesystem::path> mask_path;
  nlohmann::json labels = nlohmann::json::object();
};

std::vector<OutfitRecord> read_outfit_manifest(const std::filesystem::path& path);
void write_outfit_manifest(const std::vector<OutfitRecord>& records,
                           const std::filesystem::path& path);
OutfitSample load_outfit(const OutfitRecord& record, const ImageLimits& limits = {});

std::vector<GarmentRecord> read_garment_manifest(const std::filesystem::path& path);
void write_garment_manifest(const std::vector<GarmentRecord>& records,
                            const std::filesystem::path& path);

// Reads a JSON-lines file; blank lines are skipped. Throws ParseError naming
// the line number.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

}  // namespace outfitrec
