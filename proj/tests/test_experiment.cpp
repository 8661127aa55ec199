#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "outfitrec/error.hpp"
#include "outfitrec/experiment.hpp"
#include "outfitrec/synthetic.hpp"

using namespace outfitrec;

namespace {

struct Desk {
  CisLexicon lexicon;
  std::vector<OutfitSample> memory;
  std::vector<OutfitSample> queries;
};

Desk make_desk(int memory, int queries, std::uint64_t seed = 3) {
  synthetic::LexiconSpec ls;
  ls.num_patterns = 14;
  ls.seed = seed;
  Desk d{synthetic::make_lexicon(ls), {}, {}};
  synthetic::OutfitSpec ms;
  ms.count = memory;
  ms.seed = seed + 1;
  ms.skip_patterns.clear();
  d.memory = synthetic::make_outfits(d.lexicon, ms);
  synthetic::OutfitSpec qs = ms;
  qs.count = queries;
  qs.seed = seed + 2;
  d.queries = synthetic::make_outfits(d.lexicon, qs);
  return d;
}

ExperimentConfig base_config() {
  ExperimentConfig cfg;
  cfg.style.theta = 20.0;
  cfg.seed = 11;
  cfg.random_queries = 2000;
  return cfg;
}

EvalReport run_in_memory(const Desk& d, const ExperimentConfig& cfg) {
  const auto store = build_memory(d.memory, 0.0, std::nullopt, d.lexicon).store;
  const EventCatalog events;
  const auto model = build_event_model(d.memory, d.lexicon, events, cfg.event_k);
  return run_experiment(ExperimentData{&d.lexicon, &store, &model, events, d.queries}, cfg);
}

}  // namespace

TEST(RunExperiment, EmitsFullGridOverEveryK) {
  const auto desk = make_desk(150, 40);
  const auto cfg = base_config();
  const auto report = run_in_memory(desk, cfg);
  EXPECT_EQ(report.k_values, (std::vector<int>{5, 10, 20, 30, 40, 50, 60}));
  for (const char* protocol :
       {"style_retrieval", "style_filtered", "event_retrieval", "event_filtered", "entropy"}) {
    ASSERT_TRUE(report.protocols.contains(protocol)) << protocol;
  }
  const std::map<std::string, std::vector<std::string>> metrics{
      {"style_retrieval", {"accuracy", "map", "random_accuracy", "random_map"}},
      {"event_retrieval", {"accuracy", "map", "random_accuracy", "random_map"}},
      {"style_filtered",
       {"accuracy", "map", "category_accuracy", "color_accuracy", "joint_accuracy",
        "shortfall_rate"}},
      {"event_filtered",
       {"accuracy", "map", "category_accuracy", "color_accuracy", "joint_accuracy",
        "shortfall_rate"}},
      {"entropy",
       {"style_entropy", "style_random_entropy", "event_entropy", "event_random_entropy"}}};
  for (const auto& [protocol, names] : metrics) {
    for (const auto& m : names) {
      ASSERT_TRUE(report.protocols.at(protocol).contains(m)) << protocol << "." << m;
      const auto& values = report.protocols.at(protocol).at(m);
      ASSERT_EQ(values.size(), 7u) << protocol << "." << m;
      for (double v : values) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, 0.0);
      }
    }
  }
  for (const char* p : {"style_retrieval", "event_retrieval", "style_filtered", "event_filtered"}) {
    const auto& acc = report.protocols.at(p).at("accuracy");
    EXPECT_TRUE(std::is_sorted(acc.begin(), acc.end())) << p;
  }
  for (const char* p : {"style_filtered", "event_filtered"}) {
    const auto& m = report.protocols.at(p);
    for (std::size_t i = 0; i < 7; ++i) {
      EXPECT_LE(m.at("joint_accuracy")[i],
                std::min(m.at("category_accuracy")[i], m.at("color_accuracy")[i]));
    }
  }
  const double ln14 = std::log(14.0);
  for (const auto& [name, values] : report.protocols.at("entropy")) {
    for (double v : values) EXPECT_LE(v, ln14 + 1e-9) << name;
  }
  EXPECT_EQ(report.info.at("queries"), 40.0);
  EXPECT_EQ(report.info.at("style_categories"), 14.0);
}

TEST(RunExperiment, FilteringNeverLowersStyleAccuracy) {
  const auto desk = make_desk(200, 50);
  const auto report = run_in_memory(desk, base_config());
  const auto& plain = report.protocols.at("style_retrieval").at("accuracy");
  const auto& filtered = report.protocols.at("style_filtered").at("accuracy");
  for (std::size_t i = 0; i < plain.size(); ++i) EXPECT_GE(filtered[i], plain[i]);
}

TEST(RunExperiment, DeterministicUnderFixedSeed) {
  const auto desk = make_desk(120, 30);
  const auto cfg = base_config();
  EXPECT_EQ(run_in_memory(desk, cfg), run_in_memory(desk, cfg));
  auto other = cfg;
  other.seed = 12;
  const auto a = run_in_memory(desk, cfg);
  const auto b = run_in_memory(desk, other);
  EXPECT_EQ(a.protocols.at("style_retrieval").at("accuracy"),
            b.protocols.at("style_retrieval").at("accuracy"));
}

TEST(RunExperiment, ExcludedPatternsLeaveTheLabelSpace) {
  const auto desk = make_desk(120, 30);
  auto cfg = base_config();
  cfg.exclude_patterns = {desk.lexicon.patterns()[0].name, desk.lexicon.patterns()[1].name};
  const auto report = run_in_memory(desk, cfg);
  EXPECT_EQ(report.info.at("style_categories"), 12.0);
  for (double v : report.protocols.at("entropy").at("style_entropy")) {
    EXPECT_LE(v, std::log(12.0) + 1e-9);
  }
}

TEST(RunExperiment, EmptyQueriesAndBadConfigThrow) {
  const auto desk = make_desk(30, 5);
  const auto store = build_memory(desk.memory, 0.0, std::nullopt, desk.lexicon).store;
  const std::vector<OutfitSample> none;
  EXPECT_THROW(run_experiment(ExperimentData{&desk.lexicon, &store, nullptr, {}, none},
                              base_config()),
               ConfigError);
  auto cfg = base_config();
  cfg.k_values = {5, 0};
  EXPECT_THROW(run_in_memory(desk, cfg), ConfigError);
  cfg = base_config();
  cfg.style.theta = 0.0;
  EXPECT_THROW(run_in_memory(desk, cfg), ConfigError);
}

TEST(RunExperiment, ReportCsvAndJsonRoundTrip) {
  const auto desk = make_desk(100, 20);
  const auto report = run_in_memory(desk, base_config());
  fixtures::TempDir dir;
  write_report(report, dir.path());

  std::ifstream json_in(dir / "report.json");
  const auto j = nlohmann::json::parse(json_in);
  EvalReport back;
  back.k_values = j.at("k_values").get<std::vector<int>>();
  back.protocols = j.at("protocols").get<decltype(back.protocols)>();
  back.info = j.at("info").get<decltype(back.info)>();
  EXPECT_EQ(back, report);

  std::ifstream csv_in(dir / "report.csv");
  std::string header;
  std::getline(csv_in, header);
  EXPECT_EQ(header, "metric,5,10,20,30,40,50,60");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(csv_in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    const auto dot = cell.find('.');
    ASSERT_NE(dot, std::string::npos);
    const auto& values = report.protocols.at(cell.substr(0, dot)).at(cell.substr(dot + 1));
    for (double v : values) {
      ASSERT_TRUE(std::getline(ss, cell, ','));
      EXPECT_NEAR(std::stod(cell), v, 1e-9);
    }
    ++rows;
  }
  std::size_t expected_rows = 0;
  for (const auto& [p, m] : report.protocols) expected_rows += m.size();
  EXPECT_EQ(rows, expected_rows);
}

TEST(RunExperiment, FileDrivenConfigWritesReport) {
  fixtures::TempDir dir;
  const auto desk = make_desk(80, 20);
  save_lexicon(desk.lexicon, dir / "lexicon.json");
  synthetic::write_outfits(desk.memory, dir / "memory");
  synthetic::write_outfits(desk.queries, dir / "queries");
  const nlohmann::json doc{{"theta", 20.0},
                           {"seed", 4},
                           {"k_values", {5, 10}},
                           {"random_queries", 500},
                           {"lexicon", "lexicon.json"},
                           {"memory_manifest", "memory/outfits.jsonl"},
                           {"query_manifest", "queries/outfits.jsonl"},
                           {"out_dir", "report"}};
  {
    std::ofstream out(dir / "experiment.json");
    out << doc.dump(2);
  }
  const auto cfg = ExperimentConfig::load(dir / "experiment.json");
  const auto report = run_experiment(cfg);
  EXPECT_EQ(report.k_values, (std::vector<int>{5, 10}));
  EXPECT_TRUE(std::filesystem::exists(dir / "report/report.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "report/report.json"));
  EXPECT_EQ(report.info.at("load_failures"), 0.0);
  EXPECT_EQ(run_experiment(cfg), report);
}

TEST(RunExperiment, MissingResourceNamesItsKey) {
  fixtures::TempDir dir;
  const auto desk = make_desk(20, 5);
  save_lexicon(desk.lexicon, dir / "lexicon.json");
  const nlohmann::json doc{{"theta", 20.0},
                           {"lexicon", "lexicon.json"},
                           {"memory_manifest", "memory/outfits.jsonl"},
                           {"query_manifest", "queries/outfits.jsonl"}};
  const auto cfg = ExperimentConfig::from_json(doc, dir.path());
  try {
    run_experiment(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("query_manifest"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ExperimentConfig::from_json({{"lexicon", "x"}}), ConfigError);
}
