#include "outfitrec/service.hpp"

#include <array>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <regex>
#include <sstream>

#include <httplib.h>

#include "outfitrec/error.hpp"
#include "outfitrec/experiment.hpp"
#include "outfitrec/manifest.hpp"
#include "outfitrec/preprocess.hpp"

namespace outfitrec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::optional<fs::path> optional_path(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return resolve(base, j.at(key).get<std::string>());
}

void require_file(const fs::path& p, const std::string& key) {
  if (!fs::is_regular_file(p)) {
    throw ConfigError("missing resource '" + key + "' (" + p.filename().string() + ")");
  }
}

// Replaces anything that looks like an absolute path so that error messages
// sent to clients never reveal the server's layout.
std::string scrub(const std::string& message) {
  static const std::regex abs_path(R"((^|[\s'"(=:])/[^\s'"),]+)");
  return std::regex_replace(message, abs_path, "$1<path>");
}

// True when `p` equals `root` or lies below it after normalization.
bool within(const fs::path& root, const fs::path& p) {
  const fs::path r = fs::weakly_canonical(root);
  const fs::path c = fs::weakly_canonical(p);
  auto ri = r.begin();
  auto ci = c.begin();
  for (; ri != r.end(); ++ri, ++ci) {
    if (ri->empty() && std::next(ri) == r.end()) break;  // trailing separator
    if (ci == c.end() || *ri != *ci) return false;
  }
  return true;
}

ServiceError bad_request(const std::string& message, std::string kind = "request") {
  return ServiceError(400, std::move(kind), message);
}

json error_body(const std::string& kind, const std::string& message) {
  return json{{"error", {{"kind", kind}, {"message", message}}}};
}

std::string strip_data_url(const std::string& s) {
  const auto comma = s.find(',');
  if (s.rfind("data:", 0) == 0 && comma != std::string::npos) return s.substr(comma + 1);
  return s;
}

std::vector<std::uint8_t> mask_from_json(const json& j, std::size_t expected) {
  auto values = j.get<std::vector<int>>();
  if (values.size() != expected) throw bad_request("mask size does not match the image");
  std::vector<std::uint8_t> mask(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) mask[i] = values[i] != 0 ? 1 : 0;
  return mask;
}

}  // namespace

ServiceConfig ServiceConfig::from_json(const json& j, const fs::path& base) {
  try {
    ServiceConfig cfg;
    if (j.contains("listen")) {
      const auto listen = j.at("listen").get<std::string>();
      const auto colon = listen.rfind(':');
      if (colon == std::string::npos) throw ConfigError("listen must be host:port");
      cfg.host = listen.substr(0, colon);
      cfg.port = std::stoi(listen.substr(colon + 1));
    }
    cfg.host = j.value("host", cfg.host);
    cfg.port = j.value("port", cfg.port);
    cfg.lexicon = resolve(base, j.at("lexicon").get<std::string>());
    cfg.store = resolve(base, j.at("store").get<std::string>());
    cfg.event_manifest = optional_path(j, "event_manifest", base);
    cfg.event_outfits = optional_path(j, "event_outfits", base);
    cfg.event_k = j.value("event_k", cfg.event_k);
    cfg.style.theta = j.value("theta", 0.0);
    cfg.style.distance_variant =
        distance_variant_from_string(j.value("distance_variant", std::string("l2")));
    cfg.style.preprocess.background_tolerance = j.value("background_tolerance", 0);
    cfg.over_fetch = j.value("over_fetch", cfg.over_fetch);
    cfg.catalog_manifest = optional_path(j, "catalog_manifest", base);
    cfg.asset_dir = optional_path(j, "asset_dir", base);
    cfg.image_root = optional_path(j, "image_root", base);
    if (j.contains("eval_root")) cfg.eval_root = resolve(base, j.at("eval_root").get<std::string>());
    else if (!base.empty()) cfg.eval_root = base;
    cfg.max_upload_bytes = j.value("max_upload_bytes", cfg.max_upload_bytes);
    cfg.image_limits.max_pixels = j.value("max_image_pixels", cfg.image_limits.max_pixels);
    cfg.max_k = j.value("max_k", cfg.max_k);
    cfg.cors_origin = j.value("cors_origin", cfg.cors_origin);
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("service config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ConfigError("listen port is not a number");
  } catch (const std::out_of_range&) {
    throw ConfigError("listen port is out of range");
  }
}

ServiceConfig ServiceConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open service config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("service config " + path.filename().string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

void ServiceConfig::apply_env() {
  if (const char* v = std::getenv("OUTFITREC_LISTEN")) {
    const std::string listen = v;
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw ConfigError("OUTFITREC_LISTEN must be host:port");
    host = listen.substr(0, colon);
    try {
      port = std::stoi(listen.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("OUTFITREC_LISTEN port is not a number");
    }
  }
  if (const char* v = std::getenv("OUTFITREC_LEXICON")) lexicon = v;
  if (const char* v = std::getenv("OUTFITREC_STORE")) store = v;
  if (const char* v = std::getenv("OUTFITREC_EVENT_MANIFEST")) event_manifest = fs::path(v);
  if (const char* v = std::getenv("OUTFITREC_ASSETS")) asset_dir = fs::path(v);
  if (const char* v = std::getenv("OUTFITREC_IMAGE_ROOT")) image_root = fs::path(v);
}

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw ConfigError("port must be in [0, 65535]");
  if (event_k < 1) throw ConfigError("event_k must be >= 1");
  if (over_fetch < 1) throw ConfigError("over_fetch must be >= 1");
  if (max_k < 1) throw ConfigError("max_k must be >= 1");
  if (max_upload_bytes == 0) throw ConfigError("max_upload_bytes must be positive");
  if (image_limits.max_pixels < 1) throw ConfigError("max_image_pixels must be positive");
  style.validate();
  require_file(lexicon, "lexicon");
  require_file(store, "store");
  if (event_manifest) require_file(*event_manifest, "event_manifest");
  if (event_outfits) require_file(*event_outfits, "event_outfits");
  if (catalog_manifest) require_file(*catalog_manifest, "catalog_manifest");
  if (asset_dir && !fs::is_directory(*asset_dir)) throw ConfigError("asset_dir is not a directory");
  if (image_root && !fs::is_directory(*image_root)) {
    throw ConfigError("image_root is not a directory");
  }
}

json ServiceError::to_json() const { return error_body(kind_, what()); }

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  static const auto table = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    const std::string_view alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    for (std::size_t i = 0; i < alphabet.size(); ++i) t[std::uint8_t(alphabet[i])] = int(i);
    t[std::uint8_t('-')] = 62;
    t[std::uint8_t('_')] = 63;
    return t;
  }();
  std::vector<std::uint8_t> out;
  out.reserve(text.size() * 3 / 4);
  std::uint32_t acc = 0;
  int bits = 0;
  bool padding = false;
  for (char ch : text) {
    if (ch == ' ' || ch == '\n' || ch == '\r' || ch == '\t') continue;
    if (ch == '=') {
      padding = true;
      continue;
    }
    const int v = table[std::uint8_t(ch)];
    if (v < 0 || padding) throw ParseError("invalid base64 data");
    acc = (acc << 6) | std::uint32_t(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(std::uint8_t((acc >> bits) & 0xff));
    }
  }
  if (bits >= 6) throw ParseError("truncated base64 data");
  return out;
}

Service::Service(ServiceConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  lexicon_ = load_lexicon(cfg_.lexicon);
  store_ = load_memory(cfg_.store);
  if (store_.dimension() != 0 && store_.dimension() != lexicon_.palette().size()) {
    throw ConfigError("store dimension does not match the lexicon palette");
  }
  if (cfg_.event_manifest) {
    const auto records = read_garment_manifest(*cfg_.event_manifest);
    event_model_ = build_event_model(records, lexicon_, events_, cfg_.event_k, true,
                                     cfg_.style.preprocess);
  } else if (cfg_.event_outfits) {
    std::vector<OutfitSample> outfits;
    for (const auto& r : read_outfit_manifest(*cfg_.event_outfits)) {
      outfits.push_back(load_outfit(r, cfg_.image_limits));
    }
    event_model_ = build_event_model(outfits, lexicon_, events_, cfg_.event_k,
                                     cfg_.style.preprocess);
  }
  if (event_model_) event_model_->validate();
  if (cfg_.catalog_manifest) {
    for (const auto& r : read_outfit_manifest(*cfg_.catalog_manifest)) {
      thumbnails_.emplace(r.bottom_id, r.bottom_image);
    }
  }
}

Service::Service(ServiceConfig cfg, CisLexicon lexicon, MemoryStore store,
                 std::optional<LabeledFeatureSet> event_model, EventCatalog events)
    : cfg_(std::move(cfg)),
      lexicon_(std::move(lexicon)),
      store_(std::move(store)),
      events_(std::move(events)),
      event_model_(std::move(event_model)) {
  if (cfg_.catalog_manifest) {
    for (const auto& r : read_outfit_manifest(*cfg_.catalog_manifest)) {
      thumbnails_.emplace(r.bottom_id, r.bottom_image);
    }
  }
}

Service::~Service() = default;

Classifiers Service::classifiers() const {
  Classifiers c;
  c.lexicon = &lexicon_;
  c.style = cfg_.style;
  c.event_model = event_model();
  c.num_events = events_.size();
  return c;
}

json Service::health() const {
  return json{{"status", "ok"},
              {"entries", store_.size()},
              {"patterns", lexicon_.patterns().size()},
              {"events", events_.size()},
              {"event_model", event_model_.has_value()},
              {"theta", cfg_.style.theta}};
}

json Service::patterns() const {
  json list = json::array();
  for (const auto& p : lexicon_.patterns()) {
    list.push_back({{"id", p.id},
                    {"name", p.name},
                    {"warm_cool", p.warm_cool},
                    {"soft_hard", p.soft_hard}});
  }
  return json{{"patterns", list}};
}

json Service::event_list() const {
  json list = json::array();
  for (const auto& e : events_.categories()) list.push_back({{"id", e.id}, {"name", e.name}});
  return json{{"events", list}};
}

GarmentImage Service::resolve_image(const json& ref) const {
  if (!ref.is_object()) throw bad_request("image must be an object");
  GarmentImage image;
  if (ref.contains("ref")) {
    if (!cfg_.image_root) throw bad_request("image references are disabled");
    const fs::path rel = ref.at("ref").get<std::string>();
    const fs::path path = *cfg_.image_root / rel;
    if (rel.is_absolute() || !within(*cfg_.image_root, path)) {
      throw bad_request("image reference escapes the image root");
    }
    if (!fs::is_regular_file(path)) throw ServiceError(404, "not_found", "image reference not found");
    std::optional<fs::path> mask_path;
    if (ref.contains("mask_ref")) {
      const fs::path mrel = ref.at("mask_ref").get<std::string>();
      mask_path = *cfg_.image_root / mrel;
      if (mrel.is_absolute() || !within(*cfg_.image_root, *mask_path)) {
        throw bad_request("mask reference escapes the image root");
      }
      if (!fs::is_regular_file(*mask_path)) {
        throw ServiceError(404, "not_found", "mask reference not found");
      }
    }
    try {
      image = load_garment(path, mask_path, rel.generic_string(), cfg_.image_limits);
    } catch (const Error& e) {
      throw bad_request("image reference could not be decoded", e.kind());
    }
    return image;
  }
  if (ref.contains("png_base64")) {
    const auto bytes = base64_decode(strip_data_url(ref.at("png_base64").get<std::string>()));
    image = decode_png(bytes, cfg_.image_limits);
    if (ref.contains("mask_base64")) {
      const auto mbytes = base64_decode(strip_data_url(ref.at("mask_base64").get<std::string>()));
      const GarmentImage m = decode_png(mbytes, cfg_.image_limits);
      if (m.width != image.width || m.height != image.height) {
        throw bad_request("mask size does not match the image", "dimension");
      }
      std::vector<std::uint8_t> mask(m.size());
      for (std::size_t i = 0; i < m.size(); ++i) {
        const Rgb c = m.pixels[i];
        mask[i] = (c.r | c.g | c.b) != 0 ? 1 : 0;
      }
      image.mask = std::move(mask);
    } else if (ref.contains("mask")) {
      image.mask = mask_from_json(ref.at("mask"), image.size());
    }
  } else if (ref.contains("pixels")) {
    const json& px = ref.at("pixels");
    const int w = px.at("width").get<int>();
    const int h = px.at("height").get<int>();
    if (w < 1 || h < 1) throw bad_request("image dimensions must be positive", "dimension");
    if (std::int64_t(w) * h > cfg_.image_limits.max_pixels) {
      throw bad_request("image exceeds the pixel limit", "dimension");
    }
    const auto rgb = px.at("rgb").get<std::vector<int>>();
    if (rgb.size() != std::size_t(w) * h * 3) {
      throw bad_request("rgb length must be width * height * 3", "dimension");
    }
    image = GarmentImage(w, h);
    for (std::size_t i = 0; i < image.size(); ++i) {
      for (int c = 0; c < 3; ++c) {
        if (rgb[i * 3 + c] < 0 || rgb[i * 3 + c] > 255) {
          throw bad_request("rgb values must be in [0, 255]");
        }
      }
      image.pixels[i] = Rgb{std::uint8_t(rgb[i * 3]), std::uint8_t(rgb[i * 3 + 1]),
                            std::uint8_t(rgb[i * 3 + 2])};
    }
    if (px.contains("mask")) image.mask = mask_from_json(px.at("mask"), image.size());
    else if (ref.contains("mask")) image.mask = mask_from_json(ref.at("mask"), image.size());
  } else {
    throw bad_request("image needs one of ref, png_base64 or pixels");
  }
  image.source_id = ref.value("id", std::string("upload"));
  image.validate();
  return image;
}

Condition Service::parse_condition(const json& j) const {
  Condition cond;
  if (j.is_null()) return cond;
  if (!j.is_object()) throw bad_request("condition must be an object");
  cond.kind = condition_kind_from_string(j.value("kind", std::string("none")));
  cond.mode = condition_mode_from_string(j.value("mode", std::string("filter")));
  cond.min_posterior = j.value("min_posterior", 0.0);
  if (cond.kind == ConditionKind::none) return cond;
  if (!j.contains("target")) throw bad_request("condition needs a target");
  const json& target = j.at("target");
  if (cond.kind == ConditionKind::style) {
    if (target.is_string()) {
      const StylePattern* p = lexicon_.find_pattern(target.get<std::string>());
      if (!p) throw bad_request("unknown style pattern '" + target.get<std::string>() + "'");
      cond.target = p->id;
    } else {
      cond.target = target.get<int>();
      if (!lexicon_.has_pattern(cond.target)) throw bad_request("unknown style pattern id");
    }
  } else {
    if (!event_model_) throw ServiceError(409, "unavailable", "no event model loaded");
    try {
      cond.target = events_.resolve(target);
    } catch (const Error& e) {
      throw bad_request(e.what(), e.kind());
    }
  }
  cond.validate();
  return cond;
}

RecommendRequest Service::parse_recommend(const json& body,
                                          std::optional<GarmentImage> uploaded_top) const {
  if (!body.is_object()) throw bad_request("request body must be a JSON object");
  RecommendRequest req;
  if (uploaded_top) {
    req.top = std::move(*uploaded_top);
  } else {
    if (!body.contains("top")) throw bad_request("request needs a top image");
    req.top = resolve_image(body.at("top"));
  }
  const auto k = body.value("k", std::int64_t{10});
  if (k < 1 || std::size_t(k) > cfg_.max_k) {
    throw bad_request("k must be in [1, " + std::to_string(cfg_.max_k) + "]");
  }
  req.k = std::size_t(k);
  req.condition = parse_condition(body.contains("condition") ? body.at("condition") : json());
  return req;
}

RankedRecommendation Service::run_recommend(const RecommendRequest& request) const {
  const ColorHistogram top = garment_histogram(request.top, lexicon_, cfg_.style.preprocess);
  RankedRecommendation rec;
  if (request.condition.kind == ConditionKind::none) {
    rec = outfitrec::recommend(store_, top, request.k, lexicon_);
    annotate_proposals(rec, store_, top, classifiers());
  } else {
    rec = recommend_conditioned(store_, top, request.k, request.condition, classifiers(),
                                ConditionOptions{cfg_.over_fetch});
  }
  rec.query_id = request.top.source_id;
  return rec;
}

json recommendation_to_json(const RankedRecommendation& rec, const MemoryStore& store,
                            const CisLexicon& lexicon, const EventCatalog& events,
                            const std::map<std::string, fs::path>* thumbnails) {
  json proposals = json::array();
  for (std::size_t i = 0; i < rec.proposals.size(); ++i) {
    const Proposal& p = rec.proposals[i];
    const MemoryEntry& entry = store.entries().at(p.entry);
    json item{{"rank", i + 1},
              {"bottom_id", p.bottom_id},
              {"score", p.score},
              {"retrieval_score", p.retrieval_score},
              {"source_id", entry.source_id},
              {"thumbnail", thumbnails && thumbnails->contains(p.bottom_id)
                                ? json("/thumbnails/" + p.bottom_id)
                                : json()}};
    if (p.style) {
      item["d_star"] = p.style->d_star;
      item["accepted"] = p.style->accepted;
      item["pattern"] = p.style->pattern;
      item["pattern_name"] = lexicon.has_pattern(p.style->pattern)
                                 ? json(lexicon.pattern(p.style->pattern).name)
                                 : json();
      item["matched_triplet"] = p.style->matched_triplet;
      item["adjective"] = lexicon.triplet(p.style->matched_triplet).adjective;
    }
    if (p.event_posterior) {
      const int best = argmax(*p.event_posterior);
      item["event_posterior"] = *p.event_posterior;
      item["event"] = events.name(best);
      item["event_confidence"] = (*p.event_posterior)[std::size_t(best)];
    }
    proposals.push_back(std::move(item));
  }
  return json{{"query_id", rec.query_id},
              {"requested", rec.requested},
              {"shortfall", rec.shortfall()},
              {"warnings", rec.warnings},
              {"proposals", proposals}};
}

json Service::to_json(const RankedRecommendation& rec) const {
  return recommendation_to_json(rec, store_, lexicon_, events_, &thumbnails_);
}

json Service::recommend(const RecommendRequest& request) const {
  json out = to_json(run_recommend(request));
  const Condition& c = request.condition;
  out["condition"] = {{"kind", to_string(c.kind)},
                      {"mode", to_string(c.mode)},
                      {"target", c.target},
                      {"min_posterior", c.min_posterior}};
  return out;
}

json Service::classify_style(const json& body) const {
  if (!body.is_object() || !body.contains("top") || !body.contains("bottom")) {
    throw bad_request("request needs top and bottom images");
  }
  const GarmentImage top = resolve_image(body.at("top"));
  const GarmentImage bottom = resolve_image(body.at("bottom"));
  const StyleMatch m = outfitrec::classify_style(top, bottom, lexicon_, cfg_.style);
  const CisTriplet& t = lexicon_.triplet(m.matched_triplet);
  return json{{"d_star", m.d_star},
              {"accepted", m.accepted},
              {"theta", cfg_.style.theta},
              {"matched_triplet", m.matched_triplet},
              {"permutation", m.permutation},
              {"pattern", m.pattern},
              {"pattern_name", lexicon_.pattern(m.pattern).name},
              {"adjective", t.adjective}};
}

json Service::classify_event(const json& body) const {
  if (!event_model_) throw ServiceError(409, "unavailable", "no event model loaded");
  if (!body.is_object() || !body.contains("top") || !body.contains("bottom")) {
    throw bad_request("request needs top and bottom images");
  }
  const GarmentImage top = resolve_image(body.at("top"));
  const GarmentImage bottom = resolve_image(body.at("bottom"));
  const auto posterior = outfitrec::classify_event(top, bottom, *event_model_, lexicon_,
                                                   events_.size(), cfg_.style.preprocess);
  const int best = argmax(posterior);
  return json{{"posterior", posterior},
              {"event", best},
              {"event_name", events_.name(best)},
              {"confidence", posterior[std::size_t(best)]}};
}

json Service::evaluate(const json& body) {
  if (!body.is_object()) throw bad_request("request body must be a JSON object");
  json cfg_json = body;
  cfg_json.erase("out_dir");
  for (const char* key : {"lexicon", "query_manifest", "memory_manifest", "store", "event_manifest"}) {
    if (!cfg_json.contains(key) || cfg_json.at(key).is_null()) continue;
    const fs::path rel = cfg_json.at(key).get<std::string>();
    if (rel.is_absolute() || !within(cfg_.eval_root, cfg_.eval_root / rel)) {
      throw bad_request(std::string(key) + " must be a path inside the evaluation root");
    }
  }
  bool expected = false;
  if (!evaluating_.compare_exchange_strong(expected, true)) {
    throw ServiceError(503, "busy", "an evaluation is already running");
  }
  struct Release {
    std::atomic<bool>& flag;
    ~Release() { flag = false; }
  } release{evaluating_};
  ExperimentConfig cfg = ExperimentConfig::from_json(cfg_json, cfg_.eval_root);
  return run_experiment(cfg).to_json();
}

std::optional<fs::path> Service::thumbnail(const std::string& bottom_id) const {
  auto it = thumbnails_.find(bottom_id);
  if (it == thumbnails_.end()) return std::nullopt;
  return it->second;
}

void Service::mount() {
  auto& svr = *server_;
  svr.set_payload_max_length(cfg_.max_upload_bytes);

  auto send = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  // Runs a handler and maps failures onto JSON error responses.
  auto guarded = [send](auto fn) {
    return [fn, send](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const ServiceError& e) {
        send(res, e.status(), error_body(e.kind(), scrub(e.what())));
      } catch (const Error& e) {
        send(res, 400, error_body(e.kind(), scrub(e.what())));
      } catch (const json::exception& e) {
        send(res, 400, error_body("parse", scrub(std::string("malformed JSON: ") + e.what())));
      } catch (const std::exception&) {
        send(res, 500, error_body("internal", "internal error"));
      }
    };
  };
  auto parse_body = [](const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
  };

  svr.Get("/health", guarded([this, send](const httplib::Request&, httplib::Response& res) {
            send(res, 200, health());
          }));
  svr.Get("/patterns", guarded([this, send](const httplib::Request&, httplib::Response& res) {
            send(res, 200, patterns());
          }));
  svr.Get("/events", guarded([this, send](const httplib::Request&, httplib::Response& res) {
            send(res, 200, event_list());
          }));
  svr.Get(R"(/thumbnails/([^/]+))",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto path = thumbnail(req.matches[1].str());
            if (!path) throw ServiceError(404, "not_found", "unknown bottom id");
            std::ifstream in(*path, std::ios::binary);
            if (!in) throw ServiceError(404, "not_found", "thumbnail unavailable");
            std::ostringstream bytes;
            bytes << in.rdbuf();
            res.set_content(bytes.str(), "image/png");
          }));
  svr.Post("/recommend",
           guarded([this, send, parse_body](const httplib::Request& req, httplib::Response& res) {
             if (req.is_multipart_form_data()) {
               json body = json::object();
               if (req.has_file("request")) body = json::parse(req.get_file_value("request").content);
               if (!req.has_file("top")) throw bad_request("multipart upload needs a 'top' file");
               const auto& file = req.get_file_value("top").content;
               GarmentImage top = decode_png(
                   std::span(reinterpret_cast<const std::uint8_t*>(file.data()), file.size()),
                   cfg_.image_limits);
               if (req.has_file("top_mask")) {
                 const auto& mfile = req.get_file_value("top_mask").content;
                 const GarmentImage m = decode_png(
                     std::span(reinterpret_cast<const std::uint8_t*>(mfile.data()), mfile.size()),
                     cfg_.image_limits);
                 if (m.width != top.width || m.height != top.height) {
                   throw bad_request("mask size does not match the image", "dimension");
                 }
                 std::vector<std::uint8_t> mask(m.size());
                 for (std::size_t i = 0; i < m.size(); ++i) {
                   mask[i] = (m.pixels[i].r | m.pixels[i].g | m.pixels[i].b) != 0 ? 1 : 0;
                 }
                 top.mask = std::move(mask);
               }
               top.source_id = req.get_file_value("top").filename;
               send(res, 200, recommend(parse_recommend(body, std::move(top))));
               return;
             }
             send(res, 200, recommend(parse_recommend(parse_body(req))));
           }));
  svr.Post("/classify/style",
           guarded([this, send, parse_body](const httplib::Request& req, httplib::Response& res) {
             send(res, 200, classify_style(parse_body(req)));
           }));
  svr.Post("/classify/event",
           guarded([this, send, parse_body](const httplib::Request& req, httplib::Response& res) {
             send(res, 200, classify_event(parse_body(req)));
           }));
  svr.Post("/evaluate",
           guarded([this, send, parse_body](const httplib::Request& req, httplib::Response& res) {
             send(res, 200, evaluate(parse_body(req)));
           }));
  svr.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });

  const std::string origin = cfg_.cors_origin;
  svr.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
    if (origin.empty()) return;
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  svr.set_error_handler([send](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string kind = res.status == 404   ? "not_found"
                             : res.status == 413 ? "payload_too_large"
                                                 : "request";
    send(res, res.status, error_body(kind, httplib::status_message(res.status)));
  });
  svr.set_exception_handler(
      [send](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
        send(res, 500, error_body("internal", "internal error"));
      });

  if (cfg_.asset_dir) svr.set_mount_point("/", cfg_.asset_dir->string());
}

int Service::bind() {
  server_ = std::make_unique<httplib::Server>();
  mount();
  if (cfg_.port == 0) {
    const int port = server_->bind_to_any_port(cfg_.host);
    if (port <= 0) throw IoError("cannot bind " + cfg_.host);
    return port;
  }
  if (!server_->bind_to_port(cfg_.host, cfg_.port)) {
    throw IoError("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
  }
  return cfg_.port;
}

void Service::listen() {
  if (!server_) throw ConfigError("bind() must be called before listen()");
  server_->listen_after_bind();
}

void Service::stop() {
  if (server_) server_->stop();
}

}  // namespace outfitrec
