#include "polyprobe/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json_util.hpp"
#include "polyprobe/errors.hpp"

namespace polyprobe {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> centered(std::span<const double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  std::vector<double> c(v.begin(), v.end());
  for (auto& x : c) x -= mean;
  return c;
}

std::vector<double> json_numbers(std::span<const double> v) { return {v.begin(), v.end()}; }

}  // namespace

std::string_view to_string(Metric m) { return m == Metric::kCosine ? "cosine" : "pearson"; }

Metric parse_metric(std::string_view s) {
  if (s == "cosine") return Metric::kCosine;
  if (s == "pearson") return Metric::kPearson;
  throw ConfigError("unknown metric '" + std::string(s) + "' (expected cosine or pearson)");
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DimensionError("cosine_similarity: length mismatch");
  double uu = dot(u, u);
  double vv = dot(v, v);
  if (uu == 0.0 || vv == 0.0) throw DegenerateError("cosine similarity of a zero vector is undefined");
  double c = dot(u, v) / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(c, -1.0, 1.0);
}

double pearson_correlation(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DimensionError("pearson_correlation: length mismatch");
  if (u.size() < 2) throw DimensionError("pearson_correlation needs at least 2 entries");
  auto cu = centered(u);
  auto cv = centered(v);
  if (dot(cu, cu) == 0.0 || dot(cv, cv) == 0.0) {
    throw DegenerateError("correlation with a constant vector is undefined");
  }
  return cosine_similarity(cu, cv);
}

double similarity(Metric m, std::span<const double> u, std::span<const double> v) {
  return m == Metric::kCosine ? cosine_similarity(u, v) : pearson_correlation(u, v);
}

void ProbeSet::add(const LanguageTag& language, int layer, Probe probe) {
  validate_language(language);
  if (probe.weights.size() != hidden_dim_) {
    throw DimensionError("probe for '" + language.code + "' layer " + std::to_string(layer) +
                         " has " + std::to_string(probe.weights.size()) + " weights, expected " +
                         std::to_string(hidden_dim_));
  }
  if (layer < 0) throw DimensionError("negative layer index");
  tags_[language.code] = language;
  probes_[{language.code, layer}] = std::move(probe);
}

const Probe* ProbeSet::find(std::string_view code, int layer) const {
  auto it = probes_.find({std::string(code), layer});
  return it == probes_.end() ? nullptr : &it->second;
}

const Probe& ProbeSet::at(std::string_view code, int layer) const {
  if (const auto* p = find(code, layer)) return *p;
  throw IncompleteSetError("no probe for '" + std::string(code) + "' at layer " + std::to_string(layer));
}

std::vector<LanguageTag> ProbeSet::languages() const {
  std::vector<LanguageTag> out;
  for (const auto& [code, tag] : tags_) out.push_back(tag);
  sort_languages(out);
  return out;
}

std::vector<int> ProbeSet::layers() const {
  std::set<int> s;
  for (const auto& [key, probe] : probes_) s.insert(key.second);
  return {s.begin(), s.end()};
}

SimilarityMatrix similarity_matrix(const ProbeSet& probes, int layer, Metric metric) {
  SimilarityMatrix m;
  m.languages = probes.languages();
  m.layer = layer;
  m.metric = metric;
  const auto k = m.languages.size();
  std::vector<const Probe*> row(k);
  for (std::size_t i = 0; i < k; ++i) row[i] = &probes.at(m.languages[i].code, layer);
  m.values = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      double s = similarity(metric, row[i]->weights, row[j]->weights);
      m.values(i, j) = s;
      m.values(j, i) = s;
    }
  }
  return m;
}

std::vector<LayerCurve> similarity_to_reference(const ProbeSet& probes,
                                                     const LanguageTag& reference, Metric metric) {
  auto layers = probes.layers();
  for (int l : layers) (void)probes.at(reference.code, l);
  std::vector<LayerCurve> curves;
  for (const auto& lang : probes.languages()) {
    if (lang.code == reference.code) continue;
    LayerCurve c{lang, layers, {}};
    for (int l : layers) {
      c.values.push_back(similarity(metric, probes.at(lang.code, l).weights,
                                    probes.at(reference.code, l).weights));
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

void AccuracySurface::set(const LanguageTag& language, int layer, double accuracy) {
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
    throw DataError("accuracy " + format_number(accuracy) + " outside [0,1]");
  }
  validate_language(language);
  tags_[language.code] = language;
  values_[{language.code, layer}] = accuracy;
}

std::optional<double> AccuracySurface::find(std::string_view code, int layer) const {
  auto it = values_.find({std::string(code), layer});
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

double AccuracySurface::at(std::string_view code, int layer) const {
  if (auto v = find(code, layer)) return *v;
  throw LookupError("no accuracy for '" + std::string(code) + "' at layer " + std::to_string(layer));
}

std::vector<LanguageTag> AccuracySurface::languages() const {
  std::vector<LanguageTag> out;
  for (const auto& [code, tag] : tags_) out.push_back(tag);
  sort_languages(out);
  return out;
}

std::vector<int> AccuracySurface::layers() const {
  std::set<int> s;
  for (const auto& [key, v] : values_) s.insert(key.second);
  return {s.begin(), s.end()};
}

std::vector<std::pair<int, double>> AccuracySurface::curve(std::string_view code) const {
  std::vector<std::pair<int, double>> out;
  for (const auto& [key, v] : values_) {
    if (key.first == code) out.emplace_back(key.second, v);
  }
  if (out.empty()) throw LookupError("no accuracies for language '" + std::string(code) + "'");
  return out;
}

CsvTable AccuracySurface::to_table() const {
  CsvTable t;
  t.corner = "language";
  auto langs = languages();
  auto ls = layers();
  for (int l : ls) t.columns.push_back(std::to_string(l));
  t.values = Matrix(langs.size(), ls.size());
  for (std::size_t i = 0; i < langs.size(); ++i) {
    t.rows.push_back(langs[i].code);
    for (std::size_t j = 0; j < ls.size(); ++j) t.values(i, j) = at(langs[i].code, ls[j]);
  }
  return t;
}

std::string AccuracySurface::to_json() const {
  detail::json j;
  j["model_name"] = model_name;
  j["dataset_name"] = dataset_name;
  auto ls = layers();
  j["layers"] = ls;
  auto arr = detail::json::array();
  for (const auto& lang : languages()) {
    std::vector<double> acc;
    for (int l : ls) acc.push_back(at(lang.code, l));
    arr.push_back({{"language", detail::language_to_json(lang)}, {"accuracy", acc}});
  }
  j["languages"] = std::move(arr);
  return j.dump(2) + "\n";
}

AccuracySurface layerwise_accuracy(const ProbeSet& probes,
                                   const std::map<std::string, Archive, std::less<>>& test_archives) {
  AccuracySurface surface;
  bool named = false;
  for (const auto& lang : probes.languages()) {
    auto it = test_archives.find(lang.code);
    if (it == test_archives.end()) {
      throw IncompleteSetError("no test archive for language '" + lang.code + "'");
    }
    const auto& archive = it->second;
    if (archive.meta.hidden_dim != probes.hidden_dim()) {
      throw DimensionError("archive for '" + lang.code + "' has hidden_dim " +
                           std::to_string(archive.meta.hidden_dim) + ", probes have " +
                           std::to_string(probes.hidden_dim()));
    }
    if (!named) {
      surface.model_name = archive.meta.model_name;
      surface.dataset_name = archive.meta.dataset_name;
      named = true;
    }
    for (int l : probes.layers()) {
      const auto* probe = probes.find(lang.code, l);
      if (!probe) continue;
      if (static_cast<std::uint64_t>(l) >= archive.meta.num_layers) {
        throw DimensionError("layer " + std::to_string(l) + " beyond archive for '" + lang.code + "'");
      }
      auto pred = predict(*probe, archive.layer(static_cast<std::uint64_t>(l)), archive.meta.hidden_dim);
      surface.set(lang, l, accuracy(pred.labels, archive.labels));
    }
  }
  return surface;
}

GapSummary resource_gap(const AccuracySurface& surface, int layer,
                        std::optional<std::span<const LanguageTag>> subset) {
  std::vector<LanguageTag> langs;
  if (subset) {
    langs.assign(subset->begin(), subset->end());
  } else {
    auto builtin = builtin_languages();
    langs.assign(builtin.begin(), builtin.end());
  }
  sort_languages(langs);
  GapSummary g;
  g.layer = layer;
  double sums[2] = {0.0, 0.0};
  std::size_t counts[2] = {0, 0};
  for (const auto& lang : langs) {
    double a = surface.at(lang.code, layer);
    int k = lang.resource_class == ResourceClass::kHigh ? 0 : 1;
    sums[k] += a;
    ++counts[k];
    g.per_language.emplace_back(lang, a);
  }
  if (counts[0] == 0 || counts[1] == 0) {
    throw DegenerateError("resource gap needs at least one high- and one low-resource language");
  }
  g.high_mean = sums[0] / static_cast<double>(counts[0]);
  g.low_mean = sums[1] / static_cast<double>(counts[1]);
  g.gap = g.high_mean - g.low_mean;
  return g;
}

std::pair<int, double> peak_layer(const AccuracySurface& surface, const LanguageTag& language) {
  auto c = surface.curve(language.code);
  auto best = c.front();
  for (const auto& p : c) {
    if (p.second > best.second) best = p;
  }
  return best;
}

std::vector<LayerCurve> accuracy_curves(const AccuracySurface& surface) {
  std::vector<LayerCurve> out;
  for (const auto& lang : surface.languages()) {
    LayerCurve c{lang, {}, {}};
    for (const auto& [l, v] : surface.curve(lang.code)) {
      c.layers.push_back(l);
      c.values.push_back(v);
    }
    out.push_back(std::move(c));
  }
  return out;
}

CsvTable similarity_to_table(const SimilarityMatrix& m) {
  CsvTable t;
  t.corner = "language";
  for (const auto& l : m.languages) {
    t.columns.push_back(l.code);
    t.rows.push_back(l.code);
  }
  t.values = m.values;
  return t;
}

std::string similarity_to_json(const SimilarityMatrix& m) {
  detail::json j;
  j["layer"] = m.layer;
  j["metric"] = std::string(to_string(m.metric));
  auto langs = detail::json::array();
  for (const auto& l : m.languages) langs.push_back(detail::language_to_json(l));
  j["languages"] = std::move(langs);
  auto rows = detail::json::array();
  for (std::size_t i = 0; i < m.values.rows; ++i) rows.push_back(json_numbers(m.values.row(i)));
  j["values"] = std::move(rows);
  return j.dump(2) + "\n";
}

std::string curves_to_json(const std::vector<LayerCurve>& curves, const LanguageTag& reference,
                           Metric metric) {
  detail::json j;
  j["reference"] = detail::language_to_json(reference);
  j["metric"] = std::string(to_string(metric));
  auto arr = detail::json::array();
  for (const auto& c : curves) {
    arr.push_back({{"language", detail::language_to_json(c.language)},
                   {"layers", c.layers},
                   {"values", c.values}});
  }
  j["curves"] = std::move(arr);
  return j.dump(2) + "\n";
}

}  // namespace polyprobe
