#pragma once

// Accuracy and probe-vector similarity analyses across languages and layers.
// Similarities use the weight part of each probe only; the intercept
// carries no direction.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "polyprobe/archive.hpp"
#include "polyprobe/csv.hpp"
#include "polyprobe/language.hpp"
#include "polyprobe/probe.hpp"

namespace polyprobe {

enum class Metric { kCosine, kPearson };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);

// (u.v) / (|u||v|), clamped to [-1, 1]. DegenerateError on a zero vector.
double cosine_similarity(std::span<const double> u, std::span<const double> v);
// Cosine of the mean-centered vectors. DegenerateError on a constant vector.
double pearson_correlation(std::span<const double> u, std::span<const double> v);
double similarity(Metric m, std::span<const double> u, std::span<const double> v);

class ProbeSet {
 public:
  explicit ProbeSet(std::size_t hidden_dim) : hidden_dim_(hidden_dim) {}

  // Replaces any probe already stored for (language, layer).
  void add(const LanguageTag& language, int layer, Probe probe);

  const Probe* find(std::string_view code, int layer) const;
  // IncompleteSetError when absent.
  const Probe& at(std::string_view code, int layer) const;

  // Reporting order.
  std::vector<LanguageTag> languages() const;
  // Sorted union of layers over all languages.
  std::vector<int> layers() const;
  std::size_t hidden_dim() const { return hidden_dim_; }
  std::size_t size() const { return probes_.size(); }

 private:
  std::size_t hidden_dim_;
  std::map<std::string, LanguageTag, std::less<>> tags_;
  std::map<std::pair<std::string, int>, Probe> probes_;
};

struct SimilarityMatrix {
  std::vector<LanguageTag> languages;
  int layer = 0;
  Metric metric = Metric::kPearson;
  Matrix values;
};

// Languages in reporting order (high-resource block first). Each entry is
// one call to similarity(); the lower triangle mirrors the upper.
SimilarityMatrix similarity_matrix(const ProbeSet& probes, int layer, Metric metric);

// A per-language quantity over layer indices.
struct LayerCurve {
  LanguageTag language;
  std::vector<int> layers;
  std::vector<double> values;
};

// One curve per non-reference language over every layer in the set.
std::vector<LayerCurve> similarity_to_reference(const ProbeSet& probes,
                                                     const LanguageTag& reference, Metric metric);

class AccuracySurface {
 public:
  std::string model_name;
  std::string dataset_name;

  // DataError unless accuracy lies in [0, 1].
  void set(const LanguageTag& language, int layer, double accuracy);
  std::optional<double> find(std::string_view code, int layer) const;
  double at(std::string_view code, int layer) const;

  std::vector<LanguageTag> languages() const;
  std::vector<int> layers() const;
  // (layer, accuracy) in layer order. LookupError if the language is absent.
  std::vector<std::pair<int, double>> curve(std::string_view code) const;
  std::size_t size() const { return values_.size(); }

  // Languages as rows, one column per layer ("language,0,1,..."). Missing
  // cells are an error.
  CsvTable to_table() const;
  std::string to_json() const;

 private:
  std::map<std::string, LanguageTag, std::less<>> tags_;
  std::map<std::pair<std::string, int>, double> values_;
};

// Accuracy of every probe on the archive of its language at the probe's layer.
AccuracySurface layerwise_accuracy(const ProbeSet& probes,
                                   const std::map<std::string, Archive, std::less<>>& test_archives);

struct GapSummary {
  double high_mean = 0.0;
  double low_mean = 0.0;
  double gap = 0.0;
  int layer = 0;
  std::vector<std::pair<LanguageTag, double>> per_language;
};

// Unweighted group means at one layer. Without a subset, all sixteen
// built-in languages must be present; with one, exactly those languages are
// used and grouped by their resource class.
GapSummary resource_gap(const AccuracySurface& surface, int layer,
                        std::optional<std::span<const LanguageTag>> subset = std::nullopt);

// Argmax over layers; ties go to the shallowest layer.
std::pair<int, double> peak_layer(const AccuracySurface& surface, const LanguageTag& language);

// One accuracy curve per language, in reporting order.
std::vector<LayerCurve> accuracy_curves(const AccuracySurface& surface);

CsvTable similarity_to_table(const SimilarityMatrix& m);
std::string similarity_to_json(const SimilarityMatrix& m);

std::string curves_to_json(const std::vector<LayerCurve>& curves, const LanguageTag& reference,
                           Metric metric);

}  // namespace polyprobe
