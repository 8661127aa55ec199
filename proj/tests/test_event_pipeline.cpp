#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "outfitrec/error.hpp"
#include "outfitrec/event_pipeline.hpp"
#include "outfitrec/preprocess.hpp"

using namespace outfitrec;

namespace {

Detection detection(std::string source, double score, BoundingBox box,
                    std::vector<Vertex> polygon = {}, int event = 0) {
  if (polygon.empty()) {
    polygon = {{double(box.x), double(box.y)},
               {double(box.x + box.w), double(box.y)},
               {double(box.x + box.w), double(box.y + box.h)},
               {double(box.x), double(box.y + box.h)}};
  }
  return {std::move(source), score, box, std::move(polygon), "top", event};
}

// Source image whose every pixel has at least one non-zero channel.
GarmentImage noisy_source(std::mt19937_64& rng, int w, int h) {
  std::uniform_int_distribution<int> ch(0, 255);
  GarmentImage img(w, h);
  for (auto& p : img.pixels) {
    p = {std::uint8_t(ch(rng)), std::uint8_t(ch(rng)), std::uint8_t(ch(rng))};
    if (p.r == 0 && p.g == 0 && p.b == 0) p.g = 1;
  }
  return img;
}

// Star-shaped polygon around a pixel centre inside the box, so it always
// covers at least that centre.
std::vector<Vertex> random_polygon(std::mt19937_64& rng, const BoundingBox& b) {
  std::uniform_int_distribution<int> nv(3, 12);
  const int n = nv(rng);
  const double cx = b.x + b.w / 2 + 0.5;
  const double cy = b.y + b.h / 2 + 0.5;
  const double rmax = std::min({cx - b.x, b.x + b.w - cx, cy - b.y, b.y + b.h - cy});
  std::uniform_real_distribution<double> r(0.6, 1.0), jitter(0.0, 1.0);
  std::vector<double> angles;
  for (int i = 0; i < n; ++i) angles.push_back((i + 0.8 * jitter(rng)) * 2 * std::numbers::pi / n);
  std::vector<Vertex> poly;
  for (double a : angles) {
    const double rad = rmax * r(rng);
    poly.push_back({cx + rad * std::cos(a), cy + rad * std::sin(a)});
  }
  return poly;
}

ImageSource map_source(std::map<std::string, GarmentImage> images) {
  return [images = std::move(images)](const std::string& id) -> std::optional<GarmentImage> {
    auto it = images.find(id);
    if (it == images.end()) return std::nullopt;
    return it->second;
  };
}

}  // namespace

TEST(EventCatalog, HasFourteenCategoriesInOrder) {
  const EventCatalog catalog;
  ASSERT_EQ(catalog.size(), 14u);
  EXPECT_EQ(catalog.name(0), "concert");
  EXPECT_EQ(catalog.name(7), "wedding");
  EXPECT_EQ(catalog.name(13), "theater-dance");
  EXPECT_EQ(catalog.find("sport"), 12);
  EXPECT_FALSE(catalog.find("brunch"));
  EXPECT_EQ(catalog.resolve(nlohmann::json("picnic")), 4);
  EXPECT_EQ(catalog.resolve(nlohmann::json(3)), 3);
  EXPECT_THROW(catalog.resolve(nlohmann::json(14)), ParseError);
  EXPECT_THROW(catalog.resolve(nlohmann::json("brunch")), ParseError);
  EXPECT_THROW(EventCatalog({"a", "a"}), ConfigError);
}

TEST(FilterDetections, KeepsOnlyScoresStrictlyAboveThreshold) {
  const std::vector<Detection> dets{detection("a", 0.79, {0, 0, 2, 2}),
                                    detection("b", 0.80, {0, 0, 2, 2}),
                                    detection("c", 0.81, {0, 0, 2, 2})};
  const auto kept = filter_detections(dets, 0.8);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].score, 0.81);
  EXPECT_EQ(kept[0].source_image, "c");
}

TEST(FilterDetections, ThresholdZeroDropsOnlyZeroScores) {
  const std::vector<Detection> dets{detection("a", 0.0, {0, 0, 1, 1}),
                                    detection("b", 1e-12, {0, 0, 1, 1}),
                                    detection("c", 1.0, {0, 0, 1, 1})};
  EXPECT_EQ(filter_detections(dets, 0.0).size(), 2u);
  EXPECT_TRUE(filter_detections(dets, 1.0).empty());
  EXPECT_THROW(filter_detections(dets, 1.5), ConfigError);
  EXPECT_THROW(filter_detections(dets, -0.1), ConfigError);
}

TEST(FilterDetections, MatchesPredicateAndIsIdempotent) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::vector<Detection> dets;
  for (int i = 0; i < 1000; ++i) {
    // A quarter of the scores land exactly on a round value.
    const double s = i % 4 == 0 ? std::round(score(rng) * 10) / 10 : score(rng);
    dets.push_back(detection("s" + std::to_string(i), s, {0, 0, 1, 1}));
  }
  for (double t : {0.0, 0.3, 0.5, 0.8, 1.0}) {
    const auto kept = filter_detections(dets, t);
    std::vector<std::string> expected;
    for (const auto& d : dets) {
      if (d.score > t) expected.push_back(d.source_image);
    }
    ASSERT_EQ(kept.size(), expected.size());
    for (std::size_t i = 0; i < kept.size(); ++i) EXPECT_EQ(kept[i].source_image, expected[i]);
    EXPECT_EQ(filter_detections(kept, t).size(), kept.size());
  }
}

TEST(Detection, JsonRoundTrip) {
  const EventCatalog catalog;
  const auto d = detection("scene.png", 0.9, {1, 2, 3, 4}, {}, 7);
  const auto back = detection_from_json(to_json(d, catalog), catalog);
  EXPECT_EQ(back.source_image, d.source_image);
  EXPECT_EQ(back.bbox, d.bbox);
  EXPECT_EQ(back.polygon, d.polygon);
  EXPECT_EQ(back.event_label, 7);
  EXPECT_EQ(to_json(d, catalog)["event_label"], "wedding");

  auto bad = to_json(d, catalog);
  bad["score"] = 1.2;
  EXPECT_THROW(detection_from_json(bad, catalog), ParseError);
  bad = to_json(d, catalog);
  bad["bbox"] = {1, 2, 3};
  EXPECT_THROW(detection_from_json(bad, catalog), ParseError);
}

TEST(RasterizePolygon, HandBuiltSquareCoversCentresInside) {
  // Square from (1,1) to (3,3) inside a 4x4 window: centres at 1.5 and 2.5.
  const std::vector<Vertex> square{{1, 1}, {3, 1}, {3, 3}, {1, 3}};
  const auto mask = rasterize_polygon(square, {0, 0, 4, 4});
  const std::vector<std::uint8_t> expected{0, 0, 0, 0,  //
                                           0, 1, 1, 0,  //
                                           0, 1, 1, 0,  //
                                           0, 0, 0, 0};
  EXPECT_EQ(mask, expected);
}

TEST(RasterizePolygon, MatchesEvenOddOracle) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> coord(0.0, 20.0);
  std::uniform_int_distribution<int> nv(3, 9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Vertex> poly(std::size_t(nv(rng)));
    for (auto& v : poly) v = {coord(rng), coord(rng)};
    const BoundingBox box{2, 3, 15, 14};
    const auto mask = rasterize_polygon(poly, box);
    for (int y = 0; y < box.h; ++y) {
      for (int x = 0; x < box.w; ++x) {
        ASSERT_EQ(mask[std::size_t(y * box.w + x)] != 0,
                  oracle::inside(poly, box.x + x + 0.5, box.y + y + 0.5));
      }
    }
  }
}

TEST(CompositeGarment, FullImagePolygonKeepsEverything) {
  std::mt19937_64 rng(33);
  const auto src = noisy_source(rng, 8, 6);
  const auto g = composite_garment(detection("s", 0.9, {0, 0, 8, 6}), src);
  EXPECT_EQ(g.pixels, src.pixels);
  ASSERT_TRUE(g.mask);
  EXPECT_TRUE(std::all_of(g.mask->begin(), g.mask->end(), [](auto m) { return m == 1; }));
}

TEST(CompositeGarment, OutsidePixelsArePaintedBlack) {
  GarmentImage src(4, 4, Rgb{200, 100, 50});
  const auto g = composite_garment(
      detection("s", 0.9, {0, 0, 4, 4}, {{1, 1}, {3, 1}, {3, 3}, {1, 3}}), src);
  EXPECT_EQ(g.at(0, 0), (Rgb{0, 0, 0}));
  EXPECT_EQ(g.at(1, 1), (Rgb{200, 100, 50}));
  EXPECT_EQ(extract_foreground(g, PreprocessConfig{0}).size(), 4u);
}

TEST(CompositeGarment, CropsToBoundingBox) {
  GarmentImage src(6, 5);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 6; ++x) src.at(x, y) = {std::uint8_t(10 * x + 1), std::uint8_t(10 * y + 1), 9};
  }
  const auto g = composite_garment(detection("s", 0.9, {2, 1, 3, 2}), src);
  EXPECT_EQ(g.width, 3);
  EXPECT_EQ(g.height, 2);
  EXPECT_EQ(g.at(0, 0), src.at(2, 1));
  EXPECT_EQ(g.at(2, 1), src.at(4, 2));
}

TEST(CompositeGarment, GeometryErrors) {
  const GarmentImage src(10, 10, Rgb{5, 5, 5});
  EXPECT_THROW(composite_garment(detection("s", 0.9, {0, 0, 3, 3}, {{1, 1}, {2, 2}, {3, 3}}), src),
               GeometryError);
  EXPECT_THROW(composite_garment(detection("s", 0.9, {0, 0, 3, 3}, {{1, 1}, {2, 2}}), src),
               GeometryError);
  EXPECT_THROW(composite_garment(detection("s", 0.9, {8, 8, 5, 5}), src), GeometryError);
  EXPECT_THROW(composite_garment(detection("s", 0.9, {0, 0, 3, 3}, {{0, 0}, {5, 0}, {0, 3}}), src),
               GeometryError);
  // Thin sliver between pixel centres.
  EXPECT_THROW(
      composite_garment(detection("s", 0.9, {0, 0, 4, 4}, {{0, 0.1}, {4, 0.1}, {4, 0.2}}), src),
      GeometryError);
}

TEST(CompositeGarment, ForegroundRecoversPolygonInteriorExactly) {
  std::mt19937_64 rng(34);
  std::uniform_int_distribution<int> size(8, 40);
  for (int trial = 0; trial < 100; ++trial) {
    const auto src = noisy_source(rng, 48, 48);
    const int w = size(rng), h = size(rng);
    std::uniform_int_distribution<int> ox(0, 48 - w), oy(0, 48 - h);
    const BoundingBox box{ox(rng), oy(rng), w, h};
    const auto poly = random_polygon(rng, box);
    const auto g = composite_garment(detection("s", 0.9, box, poly), src);

    std::vector<Rgb> interior;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (oracle::inside(poly, box.x + x + 0.5, box.y + y + 0.5)) {
          interior.push_back(src.at(box.x + x, box.y + y));
        }
      }
    }
    ASSERT_FALSE(interior.empty());
    EXPECT_EQ(extract_foreground(g, PreprocessConfig{0}), interior);
    GarmentImage unmasked = g;
    unmasked.mask.reset();
    EXPECT_EQ(extract_foreground(unmasked, PreprocessConfig{0}), interior);
  }
}

TEST(Split, IsDeterministicAndPartitions) {
  EXPECT_EQ(split_hash("street-001.png"), split_hash("street-001.png"));
  std::size_t train = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto key = "scene-" + std::to_string(i) + ".png";
    const double h = split_hash(key);
    ASSERT_GE(h, 0.0);
    ASSERT_LT(h, 1.0);
    const bool t = in_train_split(key, 0.77);
    EXPECT_EQ(t, h < 0.77);
    train += t;
    EXPECT_TRUE(in_train_split(key, 1.0));
    EXPECT_FALSE(in_train_split(key, 0.0));
  }
  EXPECT_NEAR(double(train) / n, 0.77, 0.01);
}

TEST(BuildEventDataset, FiltersCompositesAndTallies) {
  std::mt19937_64 rng(35);
  std::map<std::string, GarmentImage> images{{"a.png", noisy_source(rng, 20, 20)},
                                             {"b.png", noisy_source(rng, 20, 20)}};
  std::vector<Detection> dets;
  const double scores[] = {0.95, 0.5, 0.85, 0.8, 0.99, 0.3, 0.81, 0.9, 0.1, 0.88};
  for (int i = 0; i < 10; ++i) {
    dets.push_back(detection(i % 2 ? "a.png" : "b.png", scores[i], {i, i, 5, 5}, {}, i % 3));
  }
  const EventCatalog catalog;
  const auto ds = build_event_dataset(dets, map_source(images), 0.8, 0.5, catalog);
  EXPECT_EQ(ds.stats.below_threshold, 4u);
  EXPECT_EQ(ds.stats.total, 6u);
  EXPECT_EQ(ds.garments.size(), 6u);
  EXPECT_EQ(ds.stats.train + ds.stats.test, 6u);
  std::size_t per = 0;
  for (auto n : ds.stats.per_category) per += n;
  EXPECT_EQ(per, 6u);
  for (std::size_t i = 1; i < ds.garments.size(); ++i) {
    const auto& p = ds.garments[i - 1].detection;
    const auto& q = ds.garments[i].detection;
    EXPECT_TRUE(p.source_image < q.source_image ||
                (p.source_image == q.source_image && p.bbox < q.bbox));
  }
  for (const auto& g : ds.garments) {
    EXPECT_GT(g.detection.score, 0.8);
    EXPECT_EQ(g.train, in_train_split(g.detection.source_image, 0.5));
    EXPECT_EQ(g.image.width, 5);
  }
  const auto again = build_event_dataset(dets, map_source(images), 0.8, 0.5, catalog);
  ASSERT_EQ(again.garments.size(), ds.garments.size());
  for (std::size_t i = 0; i < ds.garments.size(); ++i) {
    EXPECT_EQ(again.garments[i].id, ds.garments[i].id);
    EXPECT_EQ(again.garments[i].image.pixels, ds.garments[i].image.pixels);
  }
}

TEST(BuildEventDataset, MissingImagesAndBadGeometryAreSkipped) {
  std::mt19937_64 rng(36);
  std::map<std::string, GarmentImage> images{{"a.png", noisy_source(rng, 10, 10)}};
  const std::vector<Detection> dets{detection("a.png", 0.9, {0, 0, 4, 4}),
                                    detection("gone.png", 0.9, {0, 0, 4, 4}),
                                    detection("a.png", 0.9, {8, 8, 4, 4})};
  const auto ds = build_event_dataset(dets, map_source(images), 0.8, 0.77);
  EXPECT_EQ(ds.stats.total, 1u);
  EXPECT_EQ(ds.stats.skipped, 2u);
  EXPECT_EQ(ds.log.size(), 2u);
}

TEST(BuildEventDataset, WritesManifestAndStats) {
  std::mt19937_64 rng(37);
  fixtures::TempDir dir;
  std::map<std::string, GarmentImage> images{{"a.png", noisy_source(rng, 10, 10)}};
  const std::vector<Detection> dets{detection("a.png", 0.9, {0, 0, 4, 4}, {}, 7),
                                    detection("a.png", 0.9, {2, 2, 6, 5}, {}, 12)};
  const EventCatalog catalog;
  const auto ds = build_event_dataset(dets, map_source(images), 0.8, 1.0, catalog);
  write_event_dataset(ds, dir.path(), catalog);
  const auto records = read_garment_manifest(dir / "manifest.jsonl");
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].labels["event"], "wedding");
  EXPECT_EQ(records[1].labels["split"], "train");
  const auto loaded = load_garment(records[0].image_path, records[0].mask_path, records[0].source_id);
  EXPECT_EQ(loaded.pixels, ds.garments[0].image.pixels);
  EXPECT_EQ(*loaded.mask, *ds.garments[0].image.mask);
  std::ifstream stats(dir / "stats.json");
  const auto j = nlohmann::json::parse(stats);
  EXPECT_EQ(j["total"], 2);
  EXPECT_EQ(j["per_category"]["sport"], 1);
}

namespace {

LabeledFeatureSet model_from(const std::vector<std::pair<std::vector<double>, int>>& rows, int k) {
  LabeledFeatureSet set(k);
  for (const auto& [f, label] : rows) set.add(f, label);
  return set;
}

ColorHistogram hist(std::vector<std::pair<int, int>> counts) {
  ColorHistogram h;
  for (auto [id, n] : counts) h.add(id, n);
  return h;
}

}  // namespace

TEST(ClassifyEvent, OneNearestIsOneHot) {
  const auto lex = fixtures::primary_lexicon();
  const auto model = model_from({{histogram_feature(hist({{1, 5}}), lex), 3},
                                 {histogram_feature(hist({{2, 5}}), lex), 9}},
                                1);
  const auto p = classify_event(hist({{1, 4}, {2, 1}}), model, lex, 14);
  ASSERT_EQ(p.size(), 14u);
  EXPECT_EQ(p[3], 1.0);
  EXPECT_EQ(std::count(p.begin(), p.end(), 0.0), 13);
  EXPECT_EQ(argmax(p), 3);
}

TEST(ClassifyEvent, VoteFractionsOverFourNeighbours) {
  const auto lex = fixtures::primary_lexicon();
  const EventCatalog catalog;
  const int wedding = *catalog.find("wedding");
  const int sport = *catalog.find("sport");
  const int meeting = *catalog.find("meeting");
  const auto model = model_from({{histogram_feature(hist({{1, 10}}), lex), wedding},
                                 {histogram_feature(hist({{1, 9}, {2, 1}}), lex), wedding},
                                 {histogram_feature(hist({{1, 8}, {2, 2}}), lex), sport},
                                 {histogram_feature(hist({{1, 7}, {2, 3}}), lex), meeting},
                                 {histogram_feature(hist({{4, 10}}), lex), 0}},
                                4);
  const auto p = classify_event(hist({{1, 10}}), model, lex, catalog.size());
  EXPECT_DOUBLE_EQ(p[std::size_t(wedding)], 0.5);
  EXPECT_DOUBLE_EQ(p[std::size_t(sport)], 0.25);
  EXPECT_DOUBLE_EQ(p[std::size_t(meeting)], 0.25);
  EXPECT_EQ(p[0], 0.0);
  EXPECT_EQ(argmax(p), wedding);
}

TEST(ClassifyEvent, PosteriorsSumToOne) {
  std::mt19937_64 rng(38);
  const auto lex = fixtures::random_lexicon(rng, 12, 6, 2);
  std::uniform_int_distribution<int> color(0, 11), count(1, 20), label(0, 13);
  LabeledFeatureSet model(7);
  for (int i = 0; i < 60; ++i) {
    ColorHistogram h;
    for (int c = 0; c < 3; ++c) h.add(lex.palette()[std::size_t(color(rng))].id, count(rng));
    model.add(histogram_feature(h, lex), label(rng));
  }
  for (int q = 0; q < 100; ++q) {
    ColorHistogram h;
    for (int c = 0; c < 3; ++c) h.add(lex.palette()[std::size_t(color(rng))].id, count(rng));
    const auto p = classify_event(h, model, lex, 14);
    double sum = 0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(ClassifyEvent, SeparableClustersAreAlwaysRight) {
  const auto lex = fixtures::primary_lexicon();
  LabeledFeatureSet model(3);
  for (int e = 0; e < 6; ++e) {
    for (int j = 0; j < 4; ++j) {
      model.add(histogram_feature(hist({{e + 1, 20 + j}, {(e + 1) % 6 + 1, 1}}), lex), e);
    }
  }
  for (int e = 0; e < 6; ++e) {
    const auto p = classify_event(hist({{e + 1, 30}}), model, lex, 14);
    EXPECT_EQ(argmax(p), e);
  }
}

TEST(ClassifyEvent, LabelOutsideCatalogIsIntegrityError) {
  const auto lex = fixtures::primary_lexicon();
  const auto model = model_from({{histogram_feature(hist({{1, 5}}), lex), 20}}, 1);
  EXPECT_THROW(classify_event(hist({{1, 1}}), model, lex, 14), IntegrityError);
}
