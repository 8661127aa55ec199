#include "outfitrec/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "outfitrec/error.hpp"
#include "outfitrec/event_pipeline.hpp"
#include "outfitrec/experiment.hpp"
#include "outfitrec/manifest.hpp"
#include "outfitrec/memory.hpp"
#include "outfitrec/service.hpp"
#include "outfitrec/style_classifier.hpp"

namespace outfitrec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// A flag combination CLI11 cannot express; reported like a parse failure.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StyleFlags {
  double theta = 0.0;
  std::string distance_variant = "l2";
  int background_tolerance = 0;

  void add_to(CLI::App& cmd, bool theta_required) {
    auto* t = cmd.add_option("--theta", theta, "Acceptance threshold on d_star");
    if (theta_required) t->required();
    cmd.add_option("--distance-variant", distance_variant, "l2 or sqrt_l2")
        ->check(CLI::IsMember({"l2", "sqrt_l2"}));
    cmd.add_option("--background-tolerance", background_tolerance,
                   "Channel value at or below which unmasked pixels are background")
        ->check(CLI::Range(0, 255));
  }

  StyleClassifierConfig config() const {
    StyleClassifierConfig cfg;
    cfg.theta = theta;
    cfg.distance_variant = distance_variant_from_string(distance_variant);
    cfg.preprocess.background_tolerance = background_tolerance;
    return cfg;
  }
};

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// label-styles
struct LabelStylesCmd {
  fs::path lexicon;
  fs::path manifest;
  StyleFlags style;
  std::vector<std::string> exclude{"casual"};
  unsigned workers = 1;
  std::optional<fs::path> out;
  std::optional<fs::path> labeled;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("label-styles",
                                   "Label outfits with style patterns through the color scale");
    cmd->add_option("--lexicon", lexicon, "Color scale lexicon (JSON)")->required();
    cmd->add_option("--manifest", manifest, "Outfit manifest (JSON lines)")->required();
    style.add_to(*cmd, true);
    cmd->add_option("--exclude-pattern", exclude,
                    "Pattern name to drop; repeatable (default: casual)");
    cmd->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out", out, "Write one JSON line per outfit");
    cmd->add_option("--labeled-manifest", labeled,
                    "Write retained outfits as an outfit manifest with style labels");
  }

  void run(bool as_json, std::ostream& os) const {
    const CisLexicon lex = load_lexicon(lexicon);
    const auto records = read_outfit_manifest(manifest);
    LabelDatasetOptions options;
    options.exclude_patterns = {exclude.begin(), exclude.end()};
    options.workers = workers;
    const auto result = build_label_dataset(records, lex, style.config(), options);

    if (labeled) {
      std::map<std::string, const OutfitRecord*> by_id;
      for (const auto& r : records) by_id[r.source_id] = &r;
      std::vector<OutfitRecord> kept;
      for (const auto& l : result.labels) {
        if (!l.retained()) continue;
        OutfitRecord r = *by_id.at(l.source_id);
        r.labels.style = lex.pattern(l.match->pattern).name;
        kept.push_back(std::move(r));
      }
      if (labeled->has_parent_path()) fs::create_directories(labeled->parent_path());
      write_outfit_manifest(kept, *labeled);
    }
    if (out) {
      if (out->has_parent_path()) fs::create_directories(out->parent_path());
      std::ofstream rep(*out);
      if (!rep) throw IoError("cannot write " + out->string());
      for (const auto& l : result.labels) {
        json j{{"source_id", l.source_id}, {"retained", l.retained()}, {"excluded", l.excluded}};
        if (l.match) {
          j["d_star"] = l.match->d_star;
          j["accepted"] = l.match->accepted;
          j["matched_triplet"] = l.match->matched_triplet;
          j["permutation"] = l.match->permutation;
          j["pattern"] = lex.pattern(l.match->pattern).name;
        }
        if (!l.error.empty()) j["error"] = l.error;
        rep << j.dump() << '\n';
      }
    }

    if (as_json) {
      os << json{{"total", result.labels.size()},
                 {"retained", result.retained},
                 {"rejected", result.rejected},
                 {"failed", result.failed},
                 {"excluded", result.excluded},
                 {"distribution", result.distribution}}
                .dump()
         << '\n';
      return;
    }
    os << "outfits:  " << result.labels.size() << '\n'
       << "retained: " << result.retained << '\n'
       << "rejected: " << result.rejected << '\n'
       << "failed:   " << result.failed << '\n';
    for (const auto& [name, n] : result.excluded) os << "excluded " << name << ": " << n << '\n';
    for (const auto& [name, n] : result.distribution) os << name << '\t' << n << '\n';
  }
};

// build-events
struct BuildEventsCmd {
  fs::path detections;
  fs::path images;
  fs::path out;
  double threshold = 0.8;
  double split = 0.77;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "build-events", "Composite detected garments into a labeled event dataset");
    cmd->add_option("--detections", detections, "Detection records (JSON lines)")->required();
    cmd->add_option("--images", images, "Directory holding the source images")->required();
    cmd->add_option("--out", out, "Output directory")->required();
    cmd->add_option("--threshold", threshold, "Keep detections scoring above this")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--split", split, "Fraction of source images assigned to train")
        ->check(CLI::Range(0.0, 1.0));
  }

  void run(bool as_json, std::ostream& os) const {
    const EventCatalog catalog;
    const auto dets = read_detections(detections, catalog);
    const auto dataset =
        build_event_dataset(dets, directory_image_source(images), threshold, split, catalog);
    write_event_dataset(dataset, out, catalog);
    if (as_json) {
      os << dataset.stats.to_json(catalog).dump() << '\n';
      return;
    }
    os << "garments: " << dataset.stats.total << " (train " << dataset.stats.train
       << ", test " << dataset.stats.test << ")\n"
       << "below threshold: " << dataset.stats.below_threshold << '\n'
       << "skipped: " << dataset.stats.skipped << '\n';
    for (std::size_t i = 0; i < catalog.size(); ++i) {
      os << catalog.name(int(i)) << '\t' << dataset.stats.per_category[i] << '\n';
    }
  }
};

// build-memory
struct BuildMemoryCmd {
  fs::path lexicon;
  fs::path manifest;
  fs::path out;
  double tau = 0.0;
  std::optional<std::size_t> capacity;
  int background_tolerance = 0;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("build-memory", "Write outfits into a recommendation memory");
    cmd->add_option("--lexicon", lexicon, "Color scale lexicon (JSON)")->required();
    cmd->add_option("--manifest", manifest, "Outfit manifest (JSON lines)")->required();
    cmd->add_option("--out", out, "Store file to write")->required();
    cmd->add_option("--tau", tau, "Minimum joint distance between stored entries")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--capacity", capacity, "Maximum number of entries")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--background-tolerance", background_tolerance)->check(CLI::Range(0, 255));
  }

  void run(bool as_json, std::ostream& os) const {
    const CisLexicon lex = load_lexicon(lexicon);
    std::vector<OutfitSample> outfits;
    std::size_t unreadable = 0;
    std::vector<std::string> log;
    for (const auto& r : read_outfit_manifest(manifest)) {
      try {
        outfits.push_back(load_outfit(r));
      } catch (const Error& e) {
        ++unreadable;
        log.push_back(r.source_id + ": " + e.what());
      }
    }
    PreprocessConfig pre;
    pre.background_tolerance = background_tolerance;
    const auto result = build_memory(outfits, tau, capacity, lex, pre);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_memory(result.store, out);
    const auto& st = result.stats;
    if (as_json) {
      os << json{{"entries", result.store.size()},
                 {"stored", st.stored},
                 {"rejected", st.rejected},
                 {"evicted", st.evicted},
                 {"skipped", st.skipped + unreadable}}
                .dump()
         << '\n';
      return;
    }
    os << "entries:  " << result.store.size() << '\n'
       << "stored:   " << st.stored << '\n'
       << "rejected: " << st.rejected << '\n'
       << "evicted:  " << st.evicted << '\n'
       << "skipped:  " << st.skipped + unreadable << '\n';
  }
};

// recommend
struct RecommendCmd {
  fs::path lexicon;
  fs::path store;
  fs::path top;
  std::optional<fs::path> top_mask;
  std::size_t k = 10;
  std::optional<std::string> style_target;
  std::optional<std::string> event_target;
  std::string mode = "filter";
  double min_posterior = 0.0;
  StyleFlags style;
  std::optional<fs::path> event_manifest;
  std::optional<fs::path> event_outfits;
  int event_k = 5;
  std::size_t over_fetch = 4;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("recommend", "Recommend bottoms for a top");
    cmd->add_option("--lexicon", lexicon, "Color scale lexicon (JSON)")->required();
    cmd->add_option("--store", store, "Memory store file")->required();
    cmd->add_option("--top", top, "Query top image (PNG)")->required();
    cmd->add_option("--top-mask", top_mask, "Foreground mask for the top");
    cmd->add_option("--k", k, "Number of proposals")->check(CLI::PositiveNumber);
    auto* s = cmd->add_option("--style", style_target, "Target style pattern (name or id)");
    auto* e = cmd->add_option("--event", event_target, "Target event category (name or id)");
    s->excludes(e);
    cmd->add_option("--mode", mode, "filter or rerank")->check(CLI::IsMember({"filter", "rerank"}));
    cmd->add_option("--min-posterior", min_posterior, "Minimum posterior of the target")
        ->check(CLI::Range(0.0, 1.0));
    style.add_to(*cmd, false);
    cmd->add_option("--event-manifest", event_manifest, "Garment manifest for the event model");
    cmd->add_option("--event-outfits", event_outfits, "Outfit manifest for the event model");
    cmd->add_option("--event-k", event_k, "Neighbours of the event model")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--over-fetch", over_fetch, "Candidates fetched per requested proposal")
        ->check(CLI::PositiveNumber);
  }

  void run(bool as_json, std::ostream& os, std::ostream& es) const {
    if (style_target && style.theta <= 0.0) throw UsageError("--style requires --theta");
    if (event_target && !event_manifest && !event_outfits) {
      throw UsageError("--event requires --event-manifest or --event-outfits");
    }
    const CisLexicon lex = load_lexicon(lexicon);
    const MemoryStore mem = load_memory(store);
    const EventCatalog catalog;
    const PreprocessConfig pre = style.config().preprocess;

    std::optional<LabeledFeatureSet> model;
    if (event_manifest) {
      model = build_event_model(read_garment_manifest(*event_manifest), lex, catalog, event_k,
                                true, pre);
    } else if (event_outfits) {
      std::vector<OutfitSample> outfits;
      for (const auto& r : read_outfit_manifest(*event_outfits)) outfits.push_back(load_outfit(r));
      model = build_event_model(outfits, lex, catalog, event_k, pre);
    }
    if (model) model->validate();

    Condition cond;
    cond.mode = condition_mode_from_string(mode);
    cond.min_posterior = min_posterior;
    if (style_target) {
      cond.kind = ConditionKind::style;
      if (const StylePattern* p = lex.find_pattern(*style_target)) {
        cond.target = p->id;
      } else {
        try {
          cond.target = std::stoi(*style_target);
        } catch (const std::exception&) {
          throw ConfigError("unknown style pattern '" + *style_target + "'");
        }
      }
    } else if (event_target) {
      cond.kind = ConditionKind::event;
      const bool numeric = !event_target->empty() &&
                           event_target->find_first_not_of("0123456789") == std::string::npos;
      cond.target = catalog.resolve(numeric ? json(std::stoi(*event_target)) : json(*event_target));
    }

    Classifiers classifiers;
    classifiers.lexicon = &lex;
    classifiers.style = style.config();
    classifiers.event_model = model ? &*model : nullptr;
    classifiers.num_events = catalog.size();

    const GarmentImage image = load_garment(top, top_mask, top.filename().string());
    const ColorHistogram hist = garment_histogram(image, lex, pre);
    RankedRecommendation rec;
    if (cond.kind == ConditionKind::none) {
      rec = outfitrec::recommend(mem, hist, k, lex);
      if (style.theta > 0.0 || model) annotate_proposals(rec, mem, hist, classifiers);
    } else {
      rec = recommend_conditioned(mem, hist, k, cond, classifiers, ConditionOptions{over_fetch});
    }
    rec.query_id = image.source_id;

    for (const auto& w : rec.warnings) es << "warning: " << w << '\n';
    if (as_json) {
      os << recommendation_to_json(rec, mem, lex, catalog).dump() << '\n';
      return;
    }
    for (std::size_t i = 0; i < rec.proposals.size(); ++i) {
      const Proposal& p = rec.proposals[i];
      os << i + 1 << '\t' << p.bottom_id << '\t' << fixed(p.score);
      if (p.style) {
        os << "\td_star=" << fixed(p.style->d_star) << '\t'
           << lex.pattern(p.style->pattern).name << (p.style->accepted ? "" : "(rejected)");
      }
      if (p.event_posterior) {
        const int best = argmax(*p.event_posterior);
        os << '\t' << catalog.name(best) << '=' << fixed((*p.event_posterior)[std::size_t(best)], 2);
      }
      os << '\n';
    }
    if (rec.shortfall()) {
      es << "warning: only " << rec.proposals.size() << " of " << rec.requested
         << " proposals satisfy the condition\n";
    }
  }
};

// evaluate
struct EvaluateCmd {
  fs::path config;
  std::optional<fs::path> out;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("evaluate", "Run the evaluation experiment");
    cmd->add_option("--config", config, "Experiment config (JSON)")->required();
    cmd->add_option("--out", out, "Directory for report.csv and report.json");
  }

  void run(bool as_json, std::ostream& os) const {
    ExperimentConfig cfg = ExperimentConfig::load(config);
    if (out) cfg.out_dir = *out;
    const EvalReport report = run_experiment(cfg);
    if (as_json) {
      os << report.to_json().dump() << '\n';
      return;
    }
    os << report.to_csv();
    if (cfg.out_dir) os << "report written to " << cfg.out_dir->string() << '\n';
  }
};

// serve
struct ServeCmd {
  std::optional<fs::path> config;
  std::optional<std::string> listen;
  std::optional<fs::path> lexicon;
  std::optional<fs::path> store;
  std::optional<double> theta;
  std::optional<fs::path> event_manifest;
  std::optional<fs::path> event_outfits;
  std::optional<fs::path> catalog;
  std::optional<fs::path> assets;
  std::optional<fs::path> image_root;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("serve", "Serve the HTTP API");
    cmd->add_option("--config", config, "Service config (JSON)");
    cmd->add_option("--listen", listen, "host:port");
    cmd->add_option("--lexicon", lexicon, "Color scale lexicon (JSON)");
    cmd->add_option("--store", store, "Memory store file");
    cmd->add_option("--theta", theta, "Acceptance threshold on d_star");
    cmd->add_option("--event-manifest", event_manifest, "Garment manifest for the event model");
    cmd->add_option("--event-outfits", event_outfits, "Outfit manifest for the event model");
    cmd->add_option("--catalog", catalog, "Outfit manifest used for bottom thumbnails");
    cmd->add_option("--assets", assets, "Static asset directory");
    cmd->add_option("--image-root", image_root, "Root for image references in requests");
  }

  void run(bool as_json, std::ostream& os) const {
    ServiceConfig cfg;
    if (config) {
      cfg = ServiceConfig::load(*config);
    } else {
      if (!lexicon && !std::getenv("OUTFITREC_LEXICON")) throw UsageError("--lexicon is required");
      if (!store && !std::getenv("OUTFITREC_STORE")) throw UsageError("--store is required");
      if (!theta) throw UsageError("--theta is required");
    }
    cfg.apply_env();
    if (listen) {
      const auto colon = listen->rfind(':');
      if (colon == std::string::npos) throw UsageError("--listen must be host:port");
      cfg.host = listen->substr(0, colon);
      try {
        cfg.port = std::stoi(listen->substr(colon + 1));
      } catch (const std::exception&) {
        throw UsageError("--listen port is not a number");
      }
    }
    if (lexicon) cfg.lexicon = *lexicon;
    if (store) cfg.store = *store;
    if (theta) cfg.style.theta = *theta;
    if (event_manifest) cfg.event_manifest = *event_manifest;
    if (event_outfits) cfg.event_outfits = *event_outfits;
    if (catalog) cfg.catalog_manifest = *catalog;
    if (assets) cfg.asset_dir = *assets;
    if (image_root) cfg.image_root = *image_root;

    Service service(cfg);
    const int port = service.bind();
    if (as_json) {
      os << json{{"host", cfg.host}, {"port", port}, {"entries", service.store().size()}}.dump()
         << std::endl;
    } else {
      os << "listening on " << cfg.host << ':' << port << " (" << service.store().size()
         << " entries)" << std::endl;
    }
    service.listen();
  }
};

std::string single_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Color-scale outfit styling and conditioned bottom recommendation", "outfitrec"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "Print machine-readable JSON");

  LabelStylesCmd label_styles;
  BuildEventsCmd build_events;
  BuildMemoryCmd build_memory_cmd;
  RecommendCmd recommend_cmd;
  EvaluateCmd evaluate_cmd;
  ServeCmd serve;
  label_styles.add(app);
  build_events.add(app);
  build_memory_cmd.add(app);
  recommend_cmd.add(app);
  evaluate_cmd.add(app);
  serve.add(app);
  // Accept --json after the subcommand as well.
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << single_line(e.what()) << '\n' << app.help();
    return 2;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "label-styles") label_styles.run(as_json, out);
    else if (name == "build-events") build_events.run(as_json, out);
    else if (name == "build-memory") build_memory_cmd.run(as_json, out);
    else if (name == "recommend") recommend_cmd.run(as_json, out, err);
    else if (name == "evaluate") evaluate_cmd.run(as_json, out);
    else if (name == "serve") serve.run(as_json, out);
  } catch (const UsageError& e) {
    err << "error: usage: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << single_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << single_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}

}  // namespace outfitrec
