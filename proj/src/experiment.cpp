#include "outfitrec/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "outfitrec/error.hpp"
#include "outfitrec/evaluation.hpp"
#include "outfitrec/preprocess.hpp"

namespace outfitrec {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

void require_file(const fs::path& p, const std::string& key) {
  if (!fs::is_regular_file(p)) {
    throw ConfigError("missing resource '" + key + "' (" + p.filename().string() + ")");
  }
}

std::optional<fs::path> optional_path(const nlohmann::json& j, const char* key,
                                      const fs::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return resolve(base, j.at(key).get<std::string>());
}

// Per-query pieces shared by the filtered protocols.
struct FilteredRun {
  std::vector<std::vector<int>> labels;
  std::vector<int> targets;
  std::vector<std::vector<GarmentAnnotation>> annotations;
  std::vector<GarmentAnnotation> ground_truth;
  std::vector<std::vector<bool>> relevance;
  std::size_t shortfalls = 0;
};

std::vector<double> empirical_prior(std::span<const int> targets, int n) {
  std::vector<double> prior(std::size_t(n), 0.0);
  for (int t : targets) prior[std::size_t(t)] += 1.0;
  for (double& p : prior) p /= double(targets.size());
  return prior;
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag, int k) {
  std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
  for (unsigned char c : tag) h = (h ^ c) * 1099511628211ULL;
  return (h ^ std::uint64_t(k)) * 0xff51afd7ed558ccdULL;
}

// Lists that came back empty count as misses.
std::vector<std::vector<int>> padded(const std::vector<std::vector<int>>& lists) {
  auto out = lists;
  for (auto& l : out) {
    if (l.empty()) l.push_back(-1);
  }
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const fs::path& base) {
  try {
    ExperimentConfig cfg;
    cfg.base_dir = base;
    if (j.contains("k_values")) cfg.k_values = j.at("k_values").get<std::vector<int>>();
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.style.theta = j.at("theta").get<double>();
    cfg.style.distance_variant =
        distance_variant_from_string(j.value("distance_variant", std::string("l2")));
    cfg.style.preprocess.background_tolerance = j.value("background_tolerance", 0);
    if (j.contains("exclude_patterns")) {
      for (const auto& p : j.at("exclude_patterns")) cfg.exclude_patterns.insert(p.get<std::string>());
    }
    cfg.over_fetch = j.value("over_fetch", std::size_t{4});
    cfg.event_k = j.value("event_k", 5);
    cfg.random_queries = j.value("random_queries", std::size_t{10000});
    cfg.lexicon = resolve(base, j.at("lexicon").get<std::string>());
    cfg.query_manifest = resolve(base, j.at("query_manifest").get<std::string>());
    cfg.memory_manifest = optional_path(j, "memory_manifest", base);
    cfg.store = optional_path(j, "store", base);
    cfg.event_manifest = optional_path(j, "event_manifest", base);
    cfg.tau = j.value("tau", 0.0);
    if (j.contains("capacity") && !j.at("capacity").is_null()) {
      cfg.capacity = j.at("capacity").get<std::size_t>();
    }
    cfg.out_dir = optional_path(j, "out_dir", base);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open experiment config " + path.filename().string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("experiment config: ") + e.what());
  }
  return from_json(j, path.parent_path());
}

void ExperimentConfig::validate() const {
  if (k_values.empty()) throw ConfigError("k_values is empty");
  for (int k : k_values) {
    if (k < 1) throw ConfigError("every k must be at least 1");
  }
  style.validate();
  if (over_fetch < 1) throw ConfigError("over_fetch must be at least 1");
  if (event_k < 1) throw ConfigError("event_k must be at least 1");
  if (random_queries < 1) throw ConfigError("random_queries must be at least 1");
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["k_values"] = k_values;
  j["protocols"] = protocols;
  j["info"] = info;
  return j;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "metric";
  for (int k : k_values) out << ',' << k;
  out << '\n' << std::setprecision(10);
  for (const auto& [protocol, metrics] : protocols) {
    for (const auto& [metric, values] : metrics) {
      out << protocol << '.' << metric;
      for (double v : values) out << ',' << v;
      out << '\n';
    }
  }
  return out.str();
}

void write_report(const EvalReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "report.csv");
  std::ofstream json(out_dir / "report.json");
  if (!csv || !json) throw IoError("cannot write report into " + out_dir.string());
  csv << report.to_csv();
  json << report.to_json().dump(2) << '\n';
}

EvalReport run_experiment(const ExperimentData& data, const ExperimentConfig& cfg) {
  cfg.validate();
  if (!data.lexicon || !data.store) throw ConfigError("experiment needs a lexicon and a store");
  if (data.queries.empty()) throw ConfigError("experiment has no queries");
  if (data.store->empty()) throw ConfigError("memory store is empty");
  const CisLexicon& lexicon = *data.lexicon;

  std::map<int, int> style_index;
  for (const auto& p : lexicon.patterns()) {
    if (!cfg.exclude_patterns.contains(p.name)) {
      style_index.emplace(p.id, int(style_index.size()));
    }
  }
  const int n_style = int(style_index.size());
  const int n_event = int(data.events.size());
  const bool with_events = data.event_model != nullptr && !data.event_model->empty();

  const int kmax = *std::max_element(cfg.k_values.begin(), cfg.k_values.end());
  const Classifiers classifiers{&lexicon, cfg.style, with_events ? data.event_model : nullptr,
                                data.events.size()};
  auto style_label = [&](const Proposal& p) {
    if (!p.style || !p.style->accepted) return -1;
    auto it = style_index.find(p.style->pattern);
    return it == style_index.end() ? -1 : it->second;
  };
  auto event_label = [](const Proposal& p) {
    return p.event_posterior ? argmax(*p.event_posterior) : -1;
  };

  struct QueryResult {
    int style_target = -1;
    int event_target = -1;
    GarmentAnnotation truth;
    std::vector<Proposal> candidates;
  };
  std::vector<QueryResult> results;
  std::size_t skipped = 0;
  for (const auto& q : data.queries) {
    QueryResult r;
    ColorHistogram top_hist;
    try {
      top_hist = garment_histogram(q.top, lexicon, cfg.style.preprocess);
      const ColorHistogram bottom_hist = garment_histogram(q.bottom, lexicon, cfg.style.preprocess);
      const StyleMatch gt = classify_style(top_hist + bottom_hist, lexicon, cfg.style);
      if (gt.accepted) {
        if (auto it = style_index.find(gt.pattern); it != style_index.end()) {
          r.style_target = it->second;
        }
      }
      r.truth = {q.labels.bottom_category, dominant_color(bottom_hist)};
    } catch (const Error&) {
      ++skipped;
      continue;
    }
    if (q.labels.event) {
      if (auto id = data.events.find(*q.labels.event)) r.event_target = *id;
    }
    auto rec = recommend(*data.store, top_hist, std::size_t(kmax) * cfg.over_fetch, lexicon);
    annotate_proposals(rec, *data.store, top_hist, classifiers);
    r.candidates = std::move(rec.proposals);
    results.push_back(std::move(r));
  }

  EvalReport report;
  report.k_values = cfg.k_values;

  auto annotation = [&](const Proposal& p) {
    const auto& e = data.store->entries()[p.entry];
    return GarmentAnnotation{e.labels.bottom_category, dominant_color(e.bottom_histogram)};
  };

  auto run_protocols = [&](const std::string& name, int n_classes, auto target_of,
                           auto label_of, ConditionKind kind, auto condition_target) {
    std::vector<const QueryResult*> usable;
    for (const auto& r : results) {
      if (target_of(r) >= 0) usable.push_back(&r);
    }
    report.info[name + "_queries"] = double(usable.size());
    if (usable.empty() || n_classes < 2) return;

    std::vector<int> targets;
    std::vector<std::vector<int>> labels;
    for (const auto* r : usable) {
      targets.push_back(target_of(*r));
      std::vector<int> l;
      for (std::size_t i = 0; i < r->candidates.size() && i < std::size_t(kmax); ++i) {
        l.push_back(label_of(r->candidates[i]));
      }
      labels.push_back(std::move(l));
    }
    const auto prior = empirical_prior(targets, n_classes);
    auto& retrieval = report.protocols[name + "_retrieval"];
    auto& filtered = report.protocols[name + "_filtered"];
    auto& entropy = report.protocols["entropy"];

    for (int k : cfg.k_values) {
      std::vector<std::vector<bool>> relevance;
      for (std::size_t q = 0; q < labels.size(); ++q) {
        std::vector<bool> flags;
        for (int l : labels[q]) flags.push_back(l == targets[q]);
        relevance.push_back(std::move(flags));
      }
      const RandomBaseline random = random_baseline(
          n_classes, k, cfg.random_queries, mix_seed(cfg.seed, name, k), prior);
      retrieval["accuracy"].push_back(accuracy_at_k(padded(labels), targets, k));
      retrieval["map"].push_back(mean_average_precision(relevance, k));
      retrieval["random_accuracy"].push_back(random.accuracy);
      retrieval["random_map"].push_back(random.map);
      entropy[name + "_entropy"].push_back(recommendation_entropy(labels, n_classes, k));
      entropy[name + "_random_entropy"].push_back(random.entropy);

      FilteredRun run;
      for (const auto* r : usable) {
        const Condition cond{kind, condition_target(*r), ConditionMode::filter, 0.0};
        const std::size_t fetch =
            std::min(r->candidates.size(), std::size_t(k) * cfg.over_fetch);
        std::vector<Proposal> prefix(r->candidates.begin(),
                                     r->candidates.begin() + std::ptrdiff_t(fetch));
        const auto selected = apply_condition(std::move(prefix), cond, std::size_t(k));
        const GarmentAnnotation& truth = r->truth;
        std::vector<int> l;
        std::vector<GarmentAnnotation> ann;
        std::vector<bool> rel;
        for (const auto& p : selected.proposals) {
          l.push_back(label_of(p));
          ann.push_back(annotation(p));
          rel.push_back(ann.back().category == truth.category && ann.back().color == truth.color);
        }
        run.shortfalls += selected.shortfall();
        run.labels.push_back(std::move(l));
        run.targets.push_back(target_of(*r));
        run.annotations.push_back(std::move(ann));
        run.ground_truth.push_back(truth);
        run.relevance.push_back(std::move(rel));
      }
      const auto cc = category_color_accuracy(run.annotations, run.ground_truth, k);
      filtered["category_accuracy"].push_back(cc.category);
      filtered["color_accuracy"].push_back(cc.color);
      filtered["joint_accuracy"].push_back(cc.joint);
      filtered["accuracy"].push_back(accuracy_at_k(padded(run.labels), run.targets, k));
      filtered["map"].push_back(mean_average_precision(run.relevance, k));
      filtered["shortfall_rate"].push_back(double(run.shortfalls) / double(usable.size()));
    }
  };

  run_protocols(
      "style", n_style, [](const QueryResult& r) { return r.style_target; }, style_label,
      ConditionKind::style, [&](const QueryResult& r) {
        for (const auto& [pattern, idx] : style_index) {
          if (idx == r.style_target) return pattern;
        }
        return -1;
      });
  if (with_events) {
    run_protocols(
        "event", n_event, [](const QueryResult& r) { return r.event_target; }, event_label,
        ConditionKind::event, [](const QueryResult& r) { return r.event_target; });
  }

  if (report.protocols.empty()) throw ConfigError("no query carries a usable target");
  report.info["queries"] = double(data.queries.size());
  report.info["skipped_queries"] = double(skipped);
  report.info["store_size"] = double(data.store->size());
  report.info["style_categories"] = double(n_style);
  report.info["event_categories"] = double(n_event);
  return report;
}

EvalReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  require_file(cfg.lexicon, "lexicon");
  require_file(cfg.query_manifest, "query_manifest");
  const CisLexicon lexicon = load_lexicon(cfg.lexicon);

  std::vector<OutfitSample> queries;
  std::size_t load_failures = 0;
  for (const auto& r : read_outfit_manifest(cfg.query_manifest)) {
    try {
      queries.push_back(load_outfit(r));
    } catch (const Error&) {
      ++load_failures;
    }
  }

  std::vector<OutfitSample> memory_outfits;
  if (cfg.memory_manifest) {
    require_file(*cfg.memory_manifest, "memory_manifest");
    for (const auto& r : read_outfit_manifest(*cfg.memory_manifest)) {
      try {
        memory_outfits.push_back(load_outfit(r));
      } catch (const Error&) {
        ++load_failures;
      }
    }
  }

  MemoryStore store;
  if (cfg.store) {
    require_file(*cfg.store, "store");
    store = load_memory(*cfg.store);
  } else if (cfg.memory_manifest) {
    store = build_memory(memory_outfits, cfg.tau, cfg.capacity, lexicon,
                         cfg.style.preprocess).store;
  } else {
    throw ConfigError("missing resource 'store' or 'memory_manifest'");
  }

  const EventCatalog events;
  LabeledFeatureSet event_model(cfg.event_k);
  if (cfg.event_manifest) {
    require_file(*cfg.event_manifest, "event_manifest");
    const auto records = read_garment_manifest(*cfg.event_manifest);
    event_model = build_event_model(records, lexicon, events, cfg.event_k, true,
                                    cfg.style.preprocess);
  } else if (!memory_outfits.empty()) {
    event_model = build_event_model(memory_outfits, lexicon, events, cfg.event_k,
                                    cfg.style.preprocess);
  }
  if (!event_model.empty()) {
    event_model.set_k(std::min<int>(cfg.event_k, int(event_model.size())));
  }

  ExperimentData data{&lexicon, &store, event_model.empty() ? nullptr : &event_model, events,
                      queries};
  EvalReport report = run_experiment(data, cfg);
  report.info["load_failures"] = double(load_failures);
  if (cfg.out_dir) write_report(report, *cfg.out_dir);
  return report;
}

}  // namespace outfitrec
