#include "outfitrec/manifest.hpp"

#include <fstream>

#include "outfitrec/error.hpp"

namespace outfitrec {

namespace fs = std::filesystem;

namespace {

std::optional<std::string> optional_string(const nlohmann::json& j,
                                           const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string relative_to(const fs::path& p, const fs::path& base) {
  std::error_code ec;
  auto rel = fs::relative(fs::absolute(p), fs::absolute(base), ec);
  return ec || rel.empty() ? p.generic_string() : rel.generic_string();
}

}  // namespace

nlohmann::json to_json(const OutfitLabels& labels) {
  nlohmann::json j = nlohmann::json::object();
  if (labels.style) j["style"] = *labels.style;
  if (labels.event) j["event"] = *labels.event;
  if (labels.top_category) j["top_category"] = *labels.top_category;
  if (labels.bottom_category) j["bottom_category"] = *labels.bottom_category;
  return j;
}

OutfitLabels labels_from_json(const nlohmann::json& j) {
  OutfitLabels labels;
  if (!j.is_object()) return labels;
  labels.style = optional_string(j, "style");
  labels.event = optional_string(j, "event");
  labels.top_category = optional_string(j, "top_category");
  labels.bottom_category = optional_string(j, "bottom_category");
  return labels;
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<nlohmann::json> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.filename().string() + " line " +
                       std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<OutfitRecord> read_outfit_manifest(const fs::path& path) {
  const fs::path base = path.parent_path();
  std::vector<OutfitRecord> records;
  int lineno = 0;
  for (const auto& row : read_jsonl(path)) {
    ++lineno;
    try {
      OutfitRecord r;
      r.source_id = row.at("source_id").get<std::string>();
      r.top_image = resolve(base, row.at("top_image").get<std::string>());
      r.bottom_image = resolve(base, row.at("bottom_image").get<std::string>());
      if (auto m = optional_string(row, "top_mask")) r.top_mask = resolve(base, *m);
      if (auto m = optional_string(row, "bottom_mask")) {
        r.bottom_mask = resolve(base, *m);
      }
      r.bottom_id = row.value("bottom_id", r.source_id);
      if (row.contains("labels")) r.labels = labels_from_json(row.at("labels"));
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.filename().string() + " record " +
                       std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

void write_outfit_manifest(const std::vector<OutfitRecord>& records,
                           const fs::path& path) {
  const fs::path base = path.parent_path();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) {
    nlohmann::json j{{"source_id", r.source_id},
                     {"top_image", relative_to(r.top_image, base)},
                     {"bottom_image", relative_to(r.bottom_image, base)},
                     {"bottom_id", r.bottom_id},
                     {"labels", to_json(r.labels)}};
    if (r.top_mask) j["top_mask"] = relative_to(*r.top_mask, base);
    if (r.bottom_mask) j["bottom_mask"] = relative_to(*r.bottom_mask, base);
    out << j.dump() << '\n';
  }
}

OutfitSample load_outfit(const OutfitRecord& record, const ImageLimits& limits) {
  OutfitSample s;
  s.source_id = record.source_id;
  s.top = load_garment(record.top_image, record.top_mask,
                       record.source_id + "/top", limits);
  s.bottom = load_garment(record.bottom_image, record.bottom_mask,
                          record.source_id + "/bottom", limits);
  s.bottom_id = record.bottom_id;
  s.labels = record.labels;
  return s;
}

std::vector<GarmentRecord> read_garment_manifest(const fs::path& path) {
  const fs::path base = path.parent_path();
  std::vector<GarmentRecord> records;
  int lineno = 0;
  for (const auto& row : read_jsonl(path)) {
    ++lineno;
    try {
      GarmentRecord r;
      r.source_id = row.at("source_id").get<std::string>();
      r.image_path = resolve(base, row.at("image_path").get<std::string>());
      if (auto m = optional_string(row, "mask_path")) r.mask_path = resolve(base, *m);
      if (row.contains("labels")) r.labels = row.at("labels");
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.filename().string() + " record " +
                       std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

void write_garment_manifest(const std::vector<GarmentRecord>& records,
                            const fs::path& path) {
  const fs::path base = path.parent_path();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) {
    nlohmann::json j{{"source_id", r.source_id},
                     {"image_path", relative_to(r.image_path, base)},
                     {"labels", r.labels}};
    if (r.mask_path) j["mask_path"] = relative_to(*r.mask_path, base);
    out << j.dump() << '\n';
  }
}

}  // namespace outfitrec
