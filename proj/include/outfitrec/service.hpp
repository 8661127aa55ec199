#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "outfitrec/cis_data.hpp"
#include "outfitrec/event_pipeline.hpp"
#include "outfitrec/image.hpp"
#include "outfitrec/knn.hpp"
#include "outfitrec/memory.hpp"
#include "outfitrec/style_classifier.hpp"

namespace httplib {
class Server;
}

namespace outfitrec {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path lexicon;
  std::filesystem::path store;
  // Garment manifest (labels.event) or outfit manifest for the event model.
  std::optional<std::filesystem::path> event_manifest;
  std::optional<std::filesystem::path> event_outfits;
  int event_k = 5;
  StyleClassifierConfig style;
  std::size_t over_fetch = 4;
  // Outfit manifest used to resolve bottom thumbnails.
  std::optional<std::filesystem::path> catalog_manifest;
  std::optional<std::filesystem::path> asset_dir;
  // Root for image references in requests; references may not escape it.
  std::optional<std::filesystem::path> image_root;
  // Root for relative paths in POST /evaluate configs.
  std::filesystem::path eval_root = ".";
  std::size_t max_upload_bytes = 8u << 20;
  ImageLimits image_limits{4096LL * 4096};
  std::size_t max_k = 500;
  std::string cors_origin = "*";

  static ServiceConfig from_json(const nlohmann::json& j,
                                 const std::filesystem::path& base_dir = {});
  static ServiceConfig load(const std::filesystem::path& path);
  // OUTFITREC_LISTEN (host:port), OUTFITREC_LEXICON, OUTFITREC_STORE,
  // OUTFITREC_EVENT_MANIFEST, OUTFITREC_ASSETS, OUTFITREC_IMAGE_ROOT.
  void apply_env();
  void validate() const;
};

// A request failure carrying its HTTP status. The message never contains
// filesystem paths.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, std::string kind, const std::string& message)
      : std::runtime_error(message), status_(status), kind_(std::move(kind)) {}

  int status() const { return status_; }
  const std::string& kind() const { return kind_; }
  nlohmann::json to_json() const;

 private:
  int status_;
  std::string kind_;
};

struct RecommendRequest {
  GarmentImage top;
  std::size_t k = 10;
  Condition condition;
};

// Request handling over immutable, fully loaded resources. Every endpoint is
// a thin wrapper over the matching library call, exposed here so it can be
// exercised without a socket.
class Service {
 public:
  // Loads every resource named by the config; throws on failure.
  explicit Service(ServiceConfig cfg);
  Service(ServiceConfig cfg, CisLexicon lexicon, MemoryStore store,
          std::optional<LabeledFeatureSet> event_model,
          EventCatalog events = {});
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const ServiceConfig& config() const { return cfg_; }
  const CisLexicon& lexicon() const { return lexicon_; }
  const MemoryStore& store() const { return store_; }
  const EventCatalog& events() const { return events_; }
  const LabeledFeatureSet* event_model() const {
    return event_model_ ? &*event_model_ : nullptr;
  }
  Classifiers classifiers() const;

  nlohmann::json health() const;
  nlohmann::json patterns() const;
  nlohmann::json event_list() const;

  // Resolves {"ref"}, {"png_base64"} or {"pixels": {width, height, rgb}}
  // (each with an optional mask) into an image. Throws ServiceError.
  GarmentImage resolve_image(const nlohmann::json& ref) const;
  RecommendRequest parse_recommend(const nlohmann::json& body,
                                   std::optional<GarmentImage> uploaded_top = {}) const;
  Condition parse_condition(const nlohmann::json& j) const;

  RankedRecommendation run_recommend(const RecommendRequest& request) const;
  nlohmann::json recommend(const RecommendRequest& request) const;
  nlohmann::json classify_style(const nlohmann::json& body) const;
  nlohmann::json classify_event(const nlohmann::json& body) const;
  // Runs one experiment at a time; a concurrent call gets a 503 busy error.
  nlohmann::json evaluate(const nlohmann::json& body);

  nlohmann::json to_json(const RankedRecommendation& rec) const;
  std::optional<std::filesystem::path> thumbnail(const std::string& bottom_id) const;

  // Binds the HTTP server; port 0 picks a free port. Returns the bound port.
  int bind();
  // Serves until stop(); requires bind() first.
  void listen();
  void stop();

 private:
  void mount();

  ServiceConfig cfg_;
  CisLexicon lexicon_;
  MemoryStore store_;
  EventCatalog events_;
  std::optional<LabeledFeatureSet> event_model_;
  std::map<std::string, std::filesystem::path> thumbnails_;
  std::atomic<bool> evaluating_{false};
  std::unique_ptr<httplib::Server> server_;
};

// Response form of a ranking: per-proposal score, style match (d_star,
// pattern name), event posterior and thumbnail reference when known.
nlohmann::json recommendation_to_json(
    const RankedRecommendation& rec, const MemoryStore& store, const CisLexicon& lexicon,
    const EventCatalog& events,
    const std::map<std::string, std::filesystem::path>* thumbnails = nullptr);

std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace outfitrec
