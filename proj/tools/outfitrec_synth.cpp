// Writes a self-contained desk dataset: lexicon, memory and query outfits,
// street-scene detections, and ready-to-run experiment and service configs.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "outfitrec/error.hpp"
#include "outfitrec/style_classifier.hpp"
#include "outfitrec/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace outfitrec;

namespace {

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic desk dataset", "outfitrec_synth"};
  fs::path out = "data/desk";
  std::uint64_t seed = 7;
  int memory_outfits = 400;
  int query_outfits = 100;
  int scenes = 20;
  synthetic::LexiconSpec lex_spec;
  double theta = 15.0;
  app.add_option("--out", out, "Output directory");
  app.add_option("--seed", seed, "Base seed");
  app.add_option("--memory", memory_outfits, "Outfits written to the memory manifest")
      ->check(CLI::PositiveNumber);
  app.add_option("--queries", query_outfits, "Outfits written to the query manifest")
      ->check(CLI::PositiveNumber);
  app.add_option("--scenes", scenes, "Street scenes with detections")->check(CLI::NonNegativeNumber);
  app.add_option("--colors", lex_spec.num_colors, "Palette size")->check(CLI::PositiveNumber);
  app.add_option("--triplets", lex_spec.num_triplets, "Lexicon triplets")->check(CLI::PositiveNumber);
  app.add_option("--patterns", lex_spec.num_patterns, "Style patterns")->check(CLI::Range(1, 15));
  app.add_option("--theta", theta, "Acceptance threshold written into the configs")
      ->check(CLI::PositiveNumber);
  double unclear = 0.0;
  app.add_option("--unclear", unclear, "Fraction of outfits drawn from random colors")
      ->check(CLI::Range(0.0, 1.0));
  std::optional<double> quantile;
  app.add_option("--calibrate", quantile,
                 "Set theta to this quantile of d_star over the memory outfits")
      ->check(CLI::Range(0.0, 1.0));
  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(out);
    lex_spec.seed = seed;
    const CisLexicon lexicon = synthetic::make_lexicon(lex_spec);
    save_lexicon(lexicon, out / "lexicon.json");

    synthetic::OutfitSpec memory_spec;
    memory_spec.count = memory_outfits;
    memory_spec.seed = seed + 1;
    memory_spec.unclear_fraction = unclear;
    const auto memory = synthetic::make_outfits(lexicon, memory_spec);
    synthetic::write_outfits(memory, out / "memory");
    if (quantile) theta = calibrate_theta(memory, lexicon, DistanceVariant::l2, *quantile);

    synthetic::OutfitSpec query_spec;
    query_spec.count = query_outfits;
    query_spec.seed = seed + 2;
    query_spec.unclear_fraction = unclear;
    synthetic::write_outfits(synthetic::make_outfits(lexicon, query_spec), out / "queries");

    if (scenes > 0) {
      synthetic::SceneSpec scene_spec;
      scene_spec.scenes = scenes;
      scene_spec.seed = seed + 3;
      synthetic::write_scenes(synthetic::make_scenes(lexicon, scene_spec), out / "scenes",
                              out / "detections.jsonl");
    }

    write_json(json{{"theta", theta},
                    {"seed", seed},
                    {"lexicon", "lexicon.json"},
                    {"memory_manifest", "memory/outfits.jsonl"},
                    {"query_manifest", "queries/outfits.jsonl"},
                    {"exclude_patterns", {"casual"}},
                    {"tau", 0.0},
                    {"event_k", 5},
                    {"out_dir", "report"}},
               out / "experiment.json");
    write_json(json{{"listen", "127.0.0.1:8080"},
                    {"lexicon", "lexicon.json"},
                    {"store", "store.json"},
                    {"theta", theta},
                    {"event_outfits", "memory/outfits.jsonl"},
                    {"catalog_manifest", "memory/outfits.jsonl"},
                    {"image_root", "."}},
               out / "service.json");
    std::cout << "wrote desk dataset to " << out.string() << " (theta " << theta << ")\n";
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
