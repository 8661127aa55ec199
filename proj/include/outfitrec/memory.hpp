#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "outfitrec/cis_data.hpp"
#include "outfitrec/event_pipeline.hpp"
#include "outfitrec/manifest.hpp"
#include "outfitrec/preprocess.hpp"
#include "outfitrec/style_classifier.hpp"

namespace outfitrec {

// One stored top -> bottom pairing. Feature vectors are L2-normalized
// palette histograms; the raw bottom histogram is kept so that (top, bottom)
// pairs can be re-classified without the bottom image.
struct MemoryEntry {
  std::vector<double> key;
  std::string bottom_id;
  ColorHistogram bottom_histogram;
  std::vector<double> bottom_feature;
  std::string source_id;
  OutfitLabels labels;
};

MemoryEntry make_memory_entry(const OutfitSample& outfit, const CisLexicon& lexicon,
                              const PreprocessConfig& cfg = {});

// Mean of the key distance and the bottom-feature distance.
double joint_distance(const MemoryEntry& a, const MemoryEntry& b);

enum class WriteOutcome { stored, rejected_redundant, evicted_stored, rejected_no_gain };

std::string_view to_string(WriteOutcome outcome);

struct WriteDecision {
  WriteOutcome outcome = WriteOutcome::stored;
  // Minimum joint distance to the entries present before the write
  // (infinity for an empty store) and the index attaining it.
  double min_distance = 0.0;
  std::optional<std::size_t> nearest;
  // Set on eviction: the evicted entry's index and nearest-neighbour distance.
  std::optional<std::size_t> evicted;
  double evicted_spread = 0.0;
  // Candidate's nearest-neighbour distance once the victim is removed.
  double candidate_spread = 0.0;
};

// Non-redundant memory of pairings. Every pair of stored entries is at joint
// distance >= tau. Not internally synchronized: one writer at a time, or
// publish snapshots through MemoryHandle.
class MemoryStore {
 public:
  MemoryStore() = default;
  MemoryStore(double tau, std::optional<std::size_t> capacity = std::nullopt,
              std::size_t dimension = 0);

  // Stored iff the candidate is at joint distance >= tau from every entry.
  // At capacity, the entry with the smallest nearest-neighbour distance is
  // replaced when the candidate's own nearest-neighbour distance (computed
  // without the victim) exceeds it; otherwise rejected_no_gain.
  WriteDecision write(MemoryEntry candidate);

  const std::vector<MemoryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  double tau() const { return tau_; }
  std::optional<std::size_t> capacity() const { return capacity_; }
  std::size_t dimension() const { return dimension_; }

  nlohmann::json to_json() const;
  static MemoryStore from_json(const nlohmann::json& doc);

 private:
  double nearest_neighbor_distance(std::size_t i, std::optional<std::size_t> skip) const;

  double tau_ = 0.0;
  std::optional<std::size_t> capacity_;
  std::size_t dimension_ = 0;
  std::vector<MemoryEntry> entries_;
};

void save_memory(const MemoryStore& store, const std::filesystem::path& path);
MemoryStore load_memory(const std::filesystem::path& path);

// Copy-on-write publisher: readers take an immutable snapshot, writers build
// the next version off to the side and swap it in atomically.
class MemoryHandle {
 public:
  explicit MemoryHandle(MemoryStore store);

  std::shared_ptr<const MemoryStore> snapshot() const;
  WriteDecision write(MemoryEntry candidate);

 private:
  std::shared_ptr<const MemoryStore> current_;
  mutable std::mutex swap_mutex_;
  std::mutex writer_mutex_;
};

struct BuildMemoryStats {
  std::size_t stored = 0;
  std::size_t rejected = 0;
  std::size_t evicted = 0;
  std::size_t skipped = 0;
  std::vector<std::string> log;
};

struct BuildMemoryResult {
  MemoryStore store;
  BuildMemoryStats stats;
  std::vector<WriteDecision> decisions;
};

// Writes outfits in ascending source_id order.
BuildMemoryResult build_memory(std::span<const OutfitSample> outfits, double tau,
                               std::optional<std::size_t> capacity,
                               const CisLexicon& lexicon,
                               const PreprocessConfig& cfg = {});

struct Proposal {
  std::string bottom_id;
  double score = 0.0;
  // Similarity before reranking.
  double retrieval_score = 0.0;
  std::size_t entry = 0;
  std::optional<StyleMatch> style;
  std::optional<std::vector<double>> event_posterior;
};

struct RankedRecommendation {
  std::string query_id;
  std::vector<Proposal> proposals;
  std::size_t requested = 0;
  std::vector<std::string> warnings;

  bool shortfall() const { return proposals.size() < requested; }
};

// Cosine ranking of stored keys against the query top's histogram feature;
// the best-scoring entry of each bottom_id is kept and the first k distinct
// bottoms returned. Ties by bottom_id.
RankedRecommendation recommend(const MemoryStore& store,
                               const ColorHistogram& query_top, std::size_t k,
                               const CisLexicon& lexicon);

RankedRecommendation recommend(const MemoryStore& store, const GarmentImage& query_top,
                               std::size_t k, const CisLexicon& lexicon,
                               const PreprocessConfig& cfg = {});

enum class ConditionKind { none, style, event };
enum class ConditionMode { filter, rerank };

ConditionKind condition_kind_from_string(std::string_view s);
ConditionMode condition_mode_from_string(std::string_view s);
std::string_view to_string(ConditionKind kind);
std::string_view to_string(ConditionMode mode);

struct Condition {
  ConditionKind kind = ConditionKind::none;
  // Pattern id (style) or event category id (event).
  int target = -1;
  ConditionMode mode = ConditionMode::filter;
  double min_posterior = 0.0;

  void validate() const;
};

struct Classifiers {
  const CisLexicon* lexicon = nullptr;
  StyleClassifierConfig style;
  const LabeledFeatureSet* event_model = nullptr;
  std::size_t num_events = 14;
};

struct ConditionOptions {
  std::size_t over_fetch = 4;
};

// Posterior of the requested category for one classified pair: for style,
// 1 when the match is accepted with the target pattern and 0 otherwise; for
// event, the target's vote fraction.
double target_posterior(const Condition& cond, const Proposal& proposal);
bool satisfies(const Condition& cond, const Proposal& proposal);

// Attaches style (when style.theta > 0) and event (when a model is loaded)
// outputs to every proposal without changing the order. Pairs whose
// classification fails are dropped with a warning.
void annotate_proposals(RankedRecommendation& rec, const MemoryStore& store,
                        const ColorHistogram& query_top, const Classifiers& classifiers);

// Filters (keeping retrieval order) or reranks classified candidates and
// returns at most k of them.
RankedRecommendation apply_condition(std::vector<Proposal> classified,
                                     const Condition& cond, std::size_t k);

// Over-fetches k * over_fetch candidates, classifies each (top, bottom) pair
// with every available classifier, then filters or reranks on the condition.
RankedRecommendation recommend_conditioned(const MemoryStore& store,
                                           const ColorHistogram& query_top,
                                           std::size_t k, const Condition& cond,
                                           const Classifiers& classifiers,
                                           const ConditionOptions& options = {});

}  // namespace outfitrec
