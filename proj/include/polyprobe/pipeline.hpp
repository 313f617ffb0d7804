#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "polyprobe/analysis.hpp"
#include "polyprobe/csv.hpp"
#include "polyprobe/dataset.hpp"
#include "polyprobe/probe.hpp"

namespace polyprobe {

struct ExperimentConfig {
  std::vector<std::pair<LanguageTag, std::filesystem::path>> archives;
  std::string dataset_name;  // empty: taken from the archives
  std::string model_name;    // empty: taken from the archives
  ProbeConfig probe;
  SplitSpec split;
  // Explicit partition, e.g. from an earlier manifest. Takes precedence over
  // the seed; it must partition the archive ids exactly.
  std::optional<SplitResult> split_ids;
  std::filesystem::path output_dir = "polyprobe-out";
  std::optional<std::vector<int>> layers;  // nullopt: every slot
  std::optional<int> heatmap_layer;        // nullopt: deepest probed slot
  Metric heatmap_metric = Metric::kPearson;
  Metric curve_metric = Metric::kCosine;
  std::string reference = "en";
  unsigned workers = 1;  // never affects output bytes
};

// Relative archive and output paths resolve against base_dir.
ExperimentConfig config_from_json(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
// The manifest form: absolute paths, the split ids inline, no worker count.
std::string config_to_json(const ExperimentConfig& config);

struct ReportBundle {
  AccuracySurface accuracy;
  std::optional<SimilarityMatrix> heatmap;
  std::vector<LayerCurve> similarity_curves;
  std::vector<GapSummary> gaps;  // one per probed layer when both resource classes are present
  SplitResult split;
  std::size_t probes_trained = 0;
  std::vector<std::filesystem::path> files;
};

// Reads and cross-checks every archive, then trains one probe per
// (language, layer) on the training ids and scores it on the test ids, and
// writes the report files into output_dir. ConfigError is raised before any
// training when the inputs disagree.
ReportBundle run_experiment(const ExperimentConfig& config);

struct CellDifference {
  std::string row;
  std::string column;
  double got = 0.0;
  double want = 0.0;
  double abs_diff = 0.0;
};

struct ComparisonReport {
  bool pass = true;
  double max_abs_diff = 0.0;
  std::vector<CellDifference> failures;  // cells with abs_diff > tolerance
  // Resource gap per row (languages as columns) or per column (languages as
  // rows) of the reference table, labeled by that row or column.
  std::vector<std::pair<std::string, GapSummary>> gaps;

  std::string to_text() const;
};

// Cells are matched by (row label, column label). ComparisonError when the
// label sets differ.
ComparisonReport compare_tables(const CsvTable& got, const CsvTable& want, double tolerance);

// Gap summaries of a table whose columns (or rows) are language codes.
std::vector<std::pair<std::string, GapSummary>> table_gaps(const CsvTable& table);

}  // namespace polyprobe
