#include "outfitrec/memory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "outfitrec/error.hpp"

namespace outfitrec {

namespace {

constexpr int kStoreVersion = 1;
constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

MemoryEntry make_memory_entry(const OutfitSample& outfit, const CisLexicon& lexicon,
                              const PreprocessConfig& cfg) {
  MemoryEntry e;
  e.key = histogram_feature(garment_histogram(outfit.top, lexicon, cfg), lexicon);
  e.bottom_histogram = garment_histogram(outfit.bottom, lexicon, cfg);
  e.bottom_feature = histogram_feature(e.bottom_histogram, lexicon);
  e.bottom_id = outfit.bottom_id.empty() ? outfit.source_id : outfit.bottom_id;
  e.source_id = outfit.source_id;
  e.labels = outfit.labels;
  return e;
}

double joint_distance(const MemoryEntry& a, const MemoryEntry& b) {
  return 0.5 * (euclidean_distance(a.key, b.key) +
                euclidean_distance(a.bottom_feature, b.bottom_feature));
}

std::string_view to_string(WriteOutcome outcome) {
  switch (outcome) {
    case WriteOutcome::stored: return "stored";
    case WriteOutcome::rejected_redundant: return "rejected-redundant";
    case WriteOutcome::evicted_stored: return "evicted+stored";
    case WriteOutcome::rejected_no_gain: return "rejected-no-gain";
  }
  return "unknown";
}

MemoryStore::MemoryStore(double tau, std::optional<std::size_t> capacity,
                         std::size_t dimension)
    : tau_(tau), capacity_(capacity), dimension_(dimension) {
  if (!(tau >= 0.0) || !std::isfinite(tau)) {
    throw ConfigError("tau must be a finite non-negative number");
  }
  if (capacity && *capacity == 0) throw ConfigError("capacity must be at least 1");
}

double MemoryStore::nearest_neighbor_distance(std::size_t i,
                                              std::optional<std::size_t> skip) const {
  double best = kInf;
  for (std::size_t j = 0; j < entries_.size(); ++j) {
    if (j == i || (skip && j == *skip)) continue;
    best = std::min(best, joint_distance(entries_[i], entries_[j]));
  }
  return best;
}

WriteDecision MemoryStore::write(MemoryEntry candidate) {
  if (dimension_ == 0) dimension_ = candidate.key.size();
  if (candidate.key.size() != dimension_ ||
      candidate.bottom_feature.size() != dimension_) {
    throw DimensionError("memory entry of dimension " +
                         std::to_string(candidate.key.size()) +
                         " written to a store of dimension " +
                         std::to_string(dimension_));
  }

  WriteDecision decision;
  decision.min_distance = kInf;
  for (std::size_t j = 0; j < entries_.size(); ++j) {
    const double d = joint_distance(candidate, entries_[j]);
    if (d < decision.min_distance) {
      decision.min_distance = d;
      decision.nearest = j;
    }
  }

  if (decision.min_distance < tau_) {
    decision.outcome = WriteOutcome::rejected_redundant;
    return decision;
  }
  if (!capacity_ || entries_.size() < *capacity_) {
    decision.outcome = WriteOutcome::stored;
    entries_.push_back(std::move(candidate));
    return decision;
  }

  std::size_t victim = 0;
  double victim_spread = kInf;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const double nn = nearest_neighbor_distance(i, std::nullopt);
    if (nn < victim_spread) {
      victim_spread = nn;
      victim = i;
    }
  }
  double candidate_spread = kInf;
  for (std::size_t j = 0; j < entries_.size(); ++j) {
    if (j != victim) {
      candidate_spread = std::min(candidate_spread, joint_distance(candidate, entries_[j]));
    }
  }
  decision.evicted_spread = victim_spread;
  decision.candidate_spread = candidate_spread;
  if (!(candidate_spread > victim_spread)) {
    decision.outcome = WriteOutcome::rejected_no_gain;
    return decision;
  }
  decision.outcome = WriteOutcome::evicted_stored;
  decision.evicted = victim;
  entries_.erase(entries_.begin() + std::ptrdiff_t(victim));
  entries_.push_back(std::move(candidate));
  return decision;
}

nlohmann::json MemoryStore::to_json() const {
  nlohmann::json doc;
  doc["store_version"] = kStoreVersion;
  doc["tau"] = tau_;
  doc["capacity"] = capacity_ ? nlohmann::json(*capacity_) : nlohmann::json(nullptr);
  doc["dimension"] = dimension_;
  auto& entries = doc["entries"] = nlohmann::json::array();
  for (const auto& e : entries_) {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& [id, n] : e.bottom_histogram.counts) hist.push_back({id, n});
    entries.push_back({{"key", e.key},
                       {"bottom_id", e.bottom_id},
                       {"bottom_histogram", hist},
                       {"bottom_feature", e.bottom_feature},
                       {"source_id", e.source_id},
                       {"labels", outfitrec::to_json(e.labels)}});
  }
  return doc;
}

MemoryStore MemoryStore::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("store_version").get<int>() != kStoreVersion) {
      throw ParseError("unsupported store_version");
    }
    std::optional<std::size_t> capacity;
    if (!doc.at("capacity").is_null()) capacity = doc.at("capacity").get<std::size_t>();
    MemoryStore store(doc.at("tau").get<double>(), capacity,
                      doc.at("dimension").get<std::size_t>());
    for (const auto& j : doc.at("entries")) {
      MemoryEntry e;
      e.key = j.at("key").get<std::vector<double>>();
      e.bottom_id = j.at("bottom_id").get<std::string>();
      for (const auto& pair : j.at("bottom_histogram")) {
        e.bottom_histogram.add(pair.at(0).get<int>(), pair.at(1).get<std::int64_t>());
      }
      e.bottom_feature = j.at("bottom_feature").get<std::vector<double>>();
      e.source_id = j.value("source_id", std::string{});
      if (j.contains("labels")) e.labels = labels_from_json(j.at("labels"));
      if (e.key.size() != store.dimension_ || e.bottom_feature.size() != store.dimension_) {
        throw ParseError("entry '" + e.source_id + "' has the wrong dimension");
      }
      store.entries_.push_back(std::move(e));
    }
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("memory store: ") + e.what());
  }
}

void save_memory(const MemoryStore& store, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write memory store " + path.string());
  out << store.to_json().dump() << '\n';
}

MemoryStore load_memory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open memory store " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("memory store " + path.filename().string() + ": " + e.what());
  }
  return MemoryStore::from_json(doc);
}

MemoryHandle::MemoryHandle(MemoryStore store)
    : current_(std::make_shared<const MemoryStore>(std::move(store))) {}

std::shared_ptr<const MemoryStore> MemoryHandle::snapshot() const {
  std::lock_guard lock(swap_mutex_);
  return current_;
}

WriteDecision MemoryHandle::write(MemoryEntry candidate) {
  std::lock_guard writer(writer_mutex_);
  auto next = std::make_shared<MemoryStore>(*snapshot());
  WriteDecision decision = next->write(std::move(candidate));
  if (decision.outcome == WriteOutcome::stored ||
      decision.outcome == WriteOutcome::evicted_stored) {
    std::lock_guard lock(swap_mutex_);
    current_ = std::move(next);
  }
  return decision;
}

BuildMemoryResult build_memory(std::span<const OutfitSample> outfits, double tau,
                               std::optional<std::size_t> capacity,
                               const CisLexicon& lexicon,
                               const PreprocessConfig& cfg) {
  BuildMemoryResult result{MemoryStore(tau, capacity, lexicon.palette().size()), {}, {}};
  std::vector<std::size_t> order(outfits.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return outfits[a].source_id < outfits[b].source_id;
  });
  for (std::size_t i : order) {
    MemoryEntry entry;
    try {
      entry = make_memory_entry(outfits[i], lexicon, cfg);
    } catch (const Error& e) {
      ++result.stats.skipped;
      result.stats.log.push_back(outfits[i].source_id + ": " + e.what());
      continue;
    }
    WriteDecision d = result.store.write(std::move(entry));
    switch (d.outcome) {
      case WriteOutcome::stored: ++result.stats.stored; break;
      case WriteOutcome::evicted_stored: ++result.stats.evicted; break;
      case WriteOutcome::rejected_redundant:
      case WriteOutcome::rejected_no_gain: ++result.stats.rejected; break;
    }
    result.decisions.push_back(d);
  }
  return result;
}

RankedRecommendation recommend(const MemoryStore& store,
                               const ColorHistogram& query_top, std::size_t k,
                               const CisLexicon& lexicon) {
  if (store.empty()) throw ConfigError("memory store is empty");
  if (k < 1) throw ConfigError("k must be at least 1");
  const auto query = histogram_feature(query_top, lexicon);
  if (query.size() != store.dimension()) {
    throw DimensionError("query feature dimension differs from the store");
  }

  const auto& entries = store.entries();
  std::vector<double> score(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) score[i] = dot(entries[i].key, query);
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    if (entries[a].bottom_id != entries[b].bottom_id) {
      return entries[a].bottom_id < entries[b].bottom_id;
    }
    return a < b;
  });

  RankedRecommendation rec;
  rec.requested = k;
  std::set<std::string> seen;
  for (std::size_t i : order) {
    if (rec.proposals.size() == k) break;
    if (!seen.insert(entries[i].bottom_id).second) continue;
    Proposal p;
    p.bottom_id = entries[i].bottom_id;
    p.score = p.retrieval_score = score[i];
    p.entry = i;
    rec.proposals.push_back(std::move(p));
  }
  return rec;
}

RankedRecommendation recommend(const MemoryStore& store, const GarmentImage& query_top,
                               std::size_t k, const CisLexicon& lexicon,
                               const PreprocessConfig& cfg) {
  auto rec = recommend(store, garment_histogram(query_top, lexicon, cfg), k, lexicon);
  rec.query_id = query_top.source_id;
  return rec;
}

ConditionKind condition_kind_from_string(std::string_view s) {
  if (s == "none") return ConditionKind::none;
  if (s == "style") return ConditionKind::style;
  if (s == "event") return ConditionKind::event;
  throw ConfigError("unknown condition kind '" + std::string(s) + "'");
}

ConditionMode condition_mode_from_string(std::string_view s) {
  if (s == "filter") return ConditionMode::filter;
  if (s == "rerank") return ConditionMode::rerank;
  throw ConfigError("unknown condition mode '" + std::string(s) + "'");
}

std::string_view to_string(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::none: return "none";
    case ConditionKind::style: return "style";
    case ConditionKind::event: return "event";
  }
  return "none";
}

std::string_view to_string(ConditionMode mode) {
  return mode == ConditionMode::rerank ? "rerank" : "filter";
}

void Condition::validate() const {
  if ((kind == ConditionKind::none) != (target < 0)) {
    throw ConfigError("condition target must be set exactly when kind is not none");
  }
  if (!(min_posterior >= 0.0 && min_posterior <= 1.0)) {
    throw ConfigError("min_posterior must lie in [0,1]");
  }
}

double target_posterior(const Condition& cond, const Proposal& proposal) {
  switch (cond.kind) {
    case ConditionKind::none: return 1.0;
    case ConditionKind::style:
      return proposal.style && proposal.style->accepted &&
                     proposal.style->pattern == cond.target
                 ? 1.0
                 : 0.0;
    case ConditionKind::event:
      if (!proposal.event_posterior ||
          std::size_t(cond.target) >= proposal.event_posterior->size()) {
        return 0.0;
      }
      return (*proposal.event_posterior)[std::size_t(cond.target)];
  }
  return 0.0;
}

bool satisfies(const Condition& cond, const Proposal& proposal) {
  switch (cond.kind) {
    case ConditionKind::none: return true;
    case ConditionKind::style: return target_posterior(cond, proposal) > 0.0;
    case ConditionKind::event:
      if (!proposal.event_posterior) return false;
      return argmax(*proposal.event_posterior) == cond.target &&
             target_posterior(cond, proposal) >= cond.min_posterior;
  }
  return false;
}

void annotate_proposals(RankedRecommendation& rec, const MemoryStore& store,
                        const ColorHistogram& query_top,
                        const Classifiers& classifiers) {
  if (!classifiers.lexicon) throw ConfigError("classifiers need a lexicon");
  std::vector<Proposal> kept;
  for (auto& p : rec.proposals) {
    const ColorHistogram outfit = query_top + store.entries().at(p.entry).bottom_histogram;
    try {
      if (classifiers.style.theta > 0.0) {
        p.style = classify_style(outfit, *classifiers.lexicon, classifiers.style);
      }
      if (classifiers.event_model) {
        p.event_posterior = classify_event(outfit, *classifiers.event_model,
                                           *classifiers.lexicon, classifiers.num_events);
      }
    } catch (const Error& e) {
      rec.warnings.push_back("dropped " + p.bottom_id + ": " + e.what());
      continue;
    }
    kept.push_back(std::move(p));
  }
  rec.proposals = std::move(kept);
}

RankedRecommendation recommend_conditioned(const MemoryStore& store,
                                           const ColorHistogram& query_top,
                                           std::size_t k, const Condition& cond,
                                           const Classifiers& classifiers,
                                           const ConditionOptions& options) {
  cond.validate();
  if (!classifiers.lexicon) throw ConfigError("classifiers need a lexicon");
  const CisLexicon& lexicon = *classifiers.lexicon;
  if (cond.kind == ConditionKind::none) return recommend(store, query_top, k, lexicon);
  if (cond.kind == ConditionKind::style) {
    classifiers.style.validate();
    if (!lexicon.has_pattern(cond.target)) {
      throw ConfigError("unknown style pattern id " + std::to_string(cond.target));
    }
  }
  if (cond.kind == ConditionKind::event) {
    if (!classifiers.event_model) throw ConfigError("no event model loaded");
    if (std::size_t(cond.target) >= classifiers.num_events) {
      throw ConfigError("unknown event category id " + std::to_string(cond.target));
    }
  }

  const std::size_t fetch = k * std::max<std::size_t>(1, options.over_fetch);
  RankedRecommendation candidates = recommend(store, query_top, fetch, lexicon);

  annotate_proposals(candidates, store, query_top, classifiers);
  std::vector<Proposal> classified = std::move(candidates.proposals);

  RankedRecommendation out = apply_condition(std::move(classified), cond, k);
  out.query_id = candidates.query_id;
  out.warnings = std::move(candidates.warnings);
  return out;
}

RankedRecommendation apply_condition(std::vector<Proposal> classified,
                                     const Condition& cond, std::size_t k) {
  RankedRecommendation out;
  out.requested = k;
  if (cond.mode == ConditionMode::filter) {
    for (auto& p : classified) {
      if (out.proposals.size() == k) break;
      if (satisfies(cond, p)) out.proposals.push_back(std::move(p));
    }
  } else {
    for (auto& p : classified) p.score = p.retrieval_score * target_posterior(cond, p);
    std::stable_sort(classified.begin(), classified.end(),
                     [](const Proposal& a, const Proposal& b) { return a.score > b.score; });
    if (classified.size() > k) classified.resize(k);
    out.proposals = std::move(classified);
  }
  return out;
}

}  // namespace outfitrec
