#include "outfitrec/style_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>

#include "outfitrec/error.hpp"

namespace outfitrec {

DistanceVariant distance_variant_from_string(std::string_view name) {
  if (name == "l2") return DistanceVariant::l2;
  if (name == "sqrt_l2") return DistanceVariant::sqrt_l2;
  throw ConfigError("unknown distance variant '" + std::string(name) + "'");
}

std::string_view to_string(DistanceVariant variant) {
  return variant == DistanceVariant::sqrt_l2 ? "sqrt_l2" : "l2";
}

void StyleClassifierConfig::validate() const {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    throw ConfigError("theta must be a positive finite number");
  }
}

StyleMatch style_distance(const OutfitTriple& outfit, const CisLexicon& lexicon,
                          const StyleClassifierConfig& cfg) {
  if (lexicon.triplets().empty()) {
    throw IntegrityError("lexicon has no triplets");
  }
  std::array<const ColorCoords*, 3> o{};
  for (int i = 0; i < 3; ++i) o[i] = &lexicon.coords(outfit.colors[i]);

  // Arg-min over squared distances; the reported distance is a monotone
  // transform of it, so both variants share the same arg-min.
  double best = std::numeric_limits<double>::infinity();
  StyleMatch match;
  for (const auto& t : lexicon.triplets()) {
    std::array<const ColorCoords*, 3> c{};
    for (int i = 0; i < 3; ++i) c[i] = &lexicon.coords(t.color_ids[i]);
    for (int p = 0; p < int(kPermutations.size()); ++p) {
      double s = 0.0;
      for (int slot = 0; slot < 3; ++slot) {
        const ColorCoords& a = *o[kPermutations[p][slot]];
        const ColorCoords& b = *c[slot];
        for (int ch = 0; ch < 3; ++ch) {
          const double d = a[ch] - b[ch];
          s += d * d;
        }
      }
      if (s < best) {
        best = s;
        match.matched_triplet = t.id;
        match.permutation = p;
        match.pattern = t.pattern_id;
      }
    }
  }
  match.d_star = std::sqrt(best);
  if (cfg.distance_variant == DistanceVariant::sqrt_l2) {
    match.d_star = std::sqrt(match.d_star);
  }
  match.accepted = match.d_star < cfg.theta;
  return match;
}

StyleMatch classify_style(const ColorHistogram& outfit_histogram,
                          const CisLexicon& lexicon,
                          const StyleClassifierConfig& cfg) {
  return style_distance(top3(outfit_histogram), lexicon, cfg);
}

StyleMatch classify_style(const GarmentImage& top, const GarmentImage& bottom,
                          const CisLexicon& lexicon,
                          const StyleClassifierConfig& cfg) {
  return classify_style(outfit_concat_features(top, bottom, lexicon, cfg.preprocess),
                        lexicon, cfg);
}

namespace {

void parallel_for(std::size_t n, unsigned workers,
                  const std::function<void(std::size_t)>& body) {
  workers = std::max(1u, std::min<unsigned>(workers, unsigned(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

LabelDatasetResult tally(std::vector<StyleLabel> labels, const CisLexicon& lexicon,
                         const LabelDatasetOptions& options) {
  std::stable_sort(labels.begin(), labels.end(),
                   [](const StyleLabel& a, const StyleLabel& b) {
                     return a.source_id < b.source_id;
                   });
  LabelDatasetResult result;
  for (auto& label : labels) {
    if (!label.match) {
      ++result.failed;
      continue;
    }
    if (!label.match->accepted) {
      ++result.rejected;
      continue;
    }
    const std::string& name = lexicon.pattern(label.match->pattern).name;
    if (options.exclude_patterns.contains(name)) {
      label.excluded = true;
      ++result.excluded[name];
      continue;
    }
    ++result.retained;
    ++result.distribution[name];
  }
  result.labels = std::move(labels);
  return result;
}

}  // namespace

LabelDatasetResult build_label_dataset(std::span<const OutfitSample> outfits,
                                       const CisLexicon& lexicon,
                                       const StyleClassifierConfig& cfg,
                                       const LabelDatasetOptions& options) {
  cfg.validate();
  std::vector<StyleLabel> labels(outfits.size());
  parallel_for(outfits.size(), options.workers, [&](std::size_t i) {
    labels[i].source_id = outfits[i].source_id;
    try {
      labels[i].match = classify_style(outfits[i].top, outfits[i].bottom, lexicon, cfg);
    } catch (const Error& e) {
      labels[i].error = e.what();
    }
  });
  return tally(std::move(labels), lexicon, options);
}

LabelDatasetResult build_label_dataset(std::span<const OutfitRecord> records,
                                       const CisLexicon& lexicon,
                                       const StyleClassifierConfig& cfg,
                                       const LabelDatasetOptions& options) {
  cfg.validate();
  std::vector<StyleLabel> labels(records.size());
  parallel_for(records.size(), options.workers, [&](std::size_t i) {
    labels[i].source_id = records[i].source_id;
    try {
      const OutfitSample s = load_outfit(records[i]);
      labels[i].match = classify_style(s.top, s.bottom, lexicon, cfg);
    } catch (const Error& e) {
      labels[i].error = e.what();
    }
  });
  return tally(std::move(labels), lexicon, options);
}

double calibrate_theta(std::span<const OutfitSample> validation, const CisLexicon& lexicon,
                       DistanceVariant variant, double quantile, const PreprocessConfig& cfg) {
  if (!(quantile > 0.0 && quantile <= 1.0)) throw ConfigError("quantile must lie in (0, 1]");
  StyleClassifierConfig probe;
  probe.theta = std::numeric_limits<double>::infinity();
  probe.distance_variant = variant;
  probe.preprocess = cfg;
  std::vector<double> d;
  for (const auto& o : validation) {
    try {
      d.push_back(classify_style(o.top, o.bottom, lexicon, probe).d_star);
    } catch (const Error&) {
    }
  }
  if (d.empty()) throw ConfigError("no validation outfit could be classified");
  std::sort(d.begin(), d.end());
  const auto rank = std::size_t(std::ceil(quantile * double(d.size())));
  return std::nextafter(d[std::max<std::size_t>(rank, 1) - 1],
                        std::numeric_limits<double>::infinity());
}

LabeledFeatureSet build_style_feature_set(std::span<const OutfitSample> outfits,
                                          const CisLexicon& lexicon, int k,
                                          const PreprocessConfig& cfg) {
  LabeledFeatureSet set(k);
  for (const auto& o : outfits) {
    if (!o.labels.style) continue;
    const StylePattern* p = lexicon.find_pattern(*o.labels.style);
    if (!p) continue;
    const auto hist = outfit_concat_features(o.top, o.bottom, lexicon, cfg);
    set.add(histogram_feature(hist, lexicon), p->id, o.source_id);
  }
  return set;
}

}  // namespace outfitrec
