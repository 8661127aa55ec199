#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "outfitrec/cis_data.hpp"
#include "outfitrec/event_pipeline.hpp"
#include "outfitrec/knn.hpp"
#include "outfitrec/manifest.hpp"
#include "outfitrec/memory.hpp"
#include "outfitrec/style_classifier.hpp"

namespace outfitrec {

struct ExperimentConfig {
  std::vector<int> k_values{5, 10, 20, 30, 40, 50, 60};
  std::uint64_t seed = 0;
  StyleClassifierConfig style;
  std::set<std::string> exclude_patterns;
  std::size_t over_fetch = 4;
  int event_k = 5;
  std::size_t random_queries = 10000;

  // Resource locations, used by the file-driven overload. Relative paths are
  // resolved against `base_dir`.
  std::filesystem::path base_dir;
  std::filesystem::path lexicon;
  std::filesystem::path query_manifest;
  std::optional<std::filesystem::path> memory_manifest;
  std::optional<std::filesystem::path> store;
  std::optional<std::filesystem::path> event_manifest;
  double tau = 0.0;
  std::optional<std::size_t> capacity;
  std::optional<std::filesystem::path> out_dir;

  static ExperimentConfig from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;
};

// Metric grid: protocol -> metric -> one value per k (same order as k_values).
struct EvalReport {
  std::vector<int> k_values;
  std::map<std::string, std::map<std::string, std::vector<double>>> protocols;
  std::map<std::string, double> info;

  nlohmann::json to_json() const;
  // One row per protocol.metric, one column per k.
  std::string to_csv() const;
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct ExperimentData {
  const CisLexicon* lexicon = nullptr;
  const MemoryStore* store = nullptr;
  const LabeledFeatureSet* event_model = nullptr;
  EventCatalog events;
  std::span<const OutfitSample> queries;
};

// Unconditioned style/event retrieval (accuracy and mAP with random
// baselines), classifier-filtered retrieval (category, color and joint
// accuracy, accuracy, mAP, shortfall) and label entropy, over every k.
// Throws ConfigError when no query is usable.
EvalReport run_experiment(const ExperimentData& data, const ExperimentConfig& cfg);

// Resolves every resource named by the config, runs, and writes report.csv /
// report.json into out_dir when set.
EvalReport run_experiment(const ExperimentConfig& cfg);

void write_report(const EvalReport& report, const std::filesystem::path& out_dir);

}  // namespace outfitrec
