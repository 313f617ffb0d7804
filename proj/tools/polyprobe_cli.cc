// polyprobe: train per-layer probes on hidden-state archives and report
// accuracy and probe-vector similarity across languages.
//
// Exit codes: 0 success, 1 validation or comparison failure, 2 bad
// configuration.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "polyprobe/analysis.hpp"
#include "polyprobe/archive.hpp"
#include "polyprobe/dataset.hpp"
#include "polyprobe/errors.hpp"
#include "polyprobe/pipeline.hpp"
#include "polyprobe/svg.hpp"

namespace fs = std::filesystem;
using namespace polyprobe;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
}

// "linear:A:B", "const:V" or a comma-separated list of values.
std::vector<double> parse_schedule(const std::string& spec, std::size_t slots) {
  auto fields = [](const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string f; std::getline(ss, f, sep);) out.push_back(f);
    return out;
  };
  try {
    auto parts = fields(spec, ':');
    if (parts.size() == 3 && parts[0] == "linear") {
      return linear_schedule(slots, std::stod(parts[1]), std::stod(parts[2]));
    }
    if (parts.size() == 2 && parts[0] == "const") return constant_schedule(slots, std::stod(parts[1]));
    std::vector<double> v;
    for (const auto& f : fields(spec, ',')) v.push_back(std::stod(f));
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("cannot parse schedule '" + spec + "'");
  }
}

struct RunFlags {
  std::string config;
  std::optional<double> lambda;
  std::optional<std::uint64_t> seed;
  std::string layer;
  std::string metric;
  std::string out;
  std::optional<unsigned> workers;
  std::string reference;
};

int cmd_run(const RunFlags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (f.lambda) cfg.probe.lambda = *f.lambda;
  if (f.seed) {
    cfg.split.seed = *f.seed;
    cfg.split_ids.reset();
  }
  if (!f.layer.empty()) {
    if (f.layer == "all") {
      cfg.layers.reset();
    } else {
      try {
        cfg.layers = std::vector<int>{std::stoi(f.layer)};
      } catch (const std::logic_error&) {
        throw ConfigError("--layer expects an integer or 'all'");
      }
    }
  }
  if (!f.metric.empty()) cfg.heatmap_metric = parse_metric(f.metric);
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (f.workers) cfg.workers = *f.workers;
  if (!f.reference.empty()) cfg.reference = f.reference;

  auto bundle = run_experiment(cfg);
  std::cout << "trained " << bundle.probes_trained << " probes ("
            << bundle.accuracy.languages().size() << " languages x " << bundle.accuracy.layers().size()
            << " layers), wrote " << bundle.files.size() << " files to " << cfg.output_dir.string()
            << "\n";
  if (!bundle.gaps.empty()) {
    const auto& g = bundle.gaps.back();
    std::cout << "layer " << g.layer << ": high-resource mean " << g.high_mean << ", low-resource mean "
              << g.low_mean << ", gap " << g.gap << "\n";
  }
  return 0;
}

struct SynthFlags {
  std::string config;
  std::optional<std::uint64_t> layers, dim, samples, direction_seed, noise_seed;
  std::string schedule, lang, model, dataset, out;
};

int cmd_synth(const SynthFlags& f) {
  SyntheticConfig cfg;
  std::string schedule = "linear:0:6";
  if (!f.config.empty()) {
    try {
      auto j = nlohmann::json::parse(slurp(f.config));
      cfg.num_layers = j.value("num_layers", cfg.num_layers);
      cfg.hidden_dim = j.value("hidden_dim", cfg.hidden_dim);
      cfg.num_samples = j.value("num_samples", cfg.num_samples);
      cfg.direction_seed = j.value("direction_seed", cfg.direction_seed);
      cfg.noise_seed = j.value("noise_seed", cfg.noise_seed);
      cfg.model_name = j.value("model_name", cfg.model_name);
      cfg.dataset_name = j.value("dataset_name", cfg.dataset_name);
      if (j.contains("language")) cfg.language = language_from_code(j.at("language").get<std::string>());
      if (j.contains("separation_schedule")) {
        const auto& s = j.at("separation_schedule");
        if (s.is_string()) {
          schedule = s.get<std::string>();
        } else {
          cfg.separation_schedule = s.get<std::vector<double>>();
          schedule.clear();
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid synth config: ") + e.what());
    }
  }
  if (f.layers) cfg.num_layers = *f.layers;
  if (f.dim) cfg.hidden_dim = *f.dim;
  if (f.samples) cfg.num_samples = *f.samples;
  if (f.direction_seed) cfg.direction_seed = *f.direction_seed;
  if (f.noise_seed) cfg.noise_seed = *f.noise_seed;
  if (!f.lang.empty()) cfg.language = language_from_code(f.lang);
  if (!f.model.empty()) cfg.model_name = f.model;
  if (!f.dataset.empty()) cfg.dataset_name = f.dataset;
  if (!f.schedule.empty()) schedule = f.schedule;
  if (!schedule.empty()) cfg.separation_schedule = parse_schedule(schedule, cfg.num_layers);
  if (f.out.empty()) throw ConfigError("synth needs --out");

  auto archive = synthesize(cfg);
  auto bytes = write_archive_file(archive, f.out);
  std::cout << "wrote " << bytes << " bytes to " << f.out << "\n";
  return 0;
}

struct SimilarityFlags {
  std::string probes, reference = "en", metric = "cosine", heatmap_metric = "pearson", out;
  std::optional<int> layer;
};

int cmd_similarity(const SimilarityFlags& f) {
  if (!fs::is_directory(f.probes)) throw ConfigError("--probes must be a directory of probe JSON files");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(f.probes)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no probe files in '" + f.probes + "'");
  std::vector<ProbeRecord> records;
  for (const auto& p : files) records.push_back(probe_from_json(slurp(p)));
  ProbeSet set(records.front().probe.weights.size());
  for (auto& r : records) set.add(r.language, r.layer, std::move(r.probe));

  auto curve_metric = parse_metric(f.metric);
  auto heat_metric = parse_metric(f.heatmap_metric);
  int layer = f.layer.value_or(set.layers().back());
  auto matrix = similarity_matrix(set, layer, heat_metric);
  auto ref = language_from_code(f.reference);
  auto curves = similarity_to_reference(set, ref, curve_metric);

  if (f.out.empty()) {
    std::cout << similarity_to_table(matrix).to_string();
    std::cout << curves_to_json(curves, ref, curve_metric);
    return 0;
  }
  fs::create_directories(f.out);
  fs::path out(f.out);
  write_file(out / "heatmap.csv", similarity_to_table(matrix).to_string());
  write_file(out / "heatmap.json", similarity_to_json(matrix));
  write_file(out / "heatmap.svg", render_heatmap(matrix));
  write_file(out / "similarity_curves.json", curves_to_json(curves, ref, curve_metric));
  write_file(out / "similarity_curves.svg",
             render_curves(curves, CurveKind::kSimilarity, std::nullopt,
                           std::string(to_string(curve_metric)) + " similarity to " + ref.display_name));
  std::cout << "wrote similarity outputs to " << f.out << "\n";
  return 0;
}

int cmd_compare(const std::string& got, const std::string& want, double tol) {
  auto report = compare_tables(read_csv_table(got), read_csv_table(want), tol);
  std::cout << report.to_text();
  return report.pass ? 0 : kExitFailure;
}

int cmd_validate(const std::string& path) {
  Archive a;
  try {
    a = read_archive_file(path);
  } catch (const Error& e) {
    std::cout << "INVALID " << path << ": " << e.what() << "\n";
    return kExitFailure;
  }
  auto findings = validate_against_registry(a.meta);
  std::cout << (findings.empty() ? "OK " : "MISMATCH ") << path << ": model=" << a.meta.model_name
            << " dataset=" << a.meta.dataset_name << " language=" << a.meta.language.code
            << " num_layers=" << a.meta.num_layers << " hidden_dim=" << a.meta.hidden_dim
            << " num_samples=" << a.meta.num_samples << "\n";
  for (const auto& f : findings) std::cout << "  " << f.field << ": " << f.message << "\n";
  return findings.empty() ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polyprobe: multilingual linear probing of hidden-state archives"};
  app.require_subcommand(1);

  RunFlags run;
  auto* run_cmd = app.add_subcommand("run", "split, train, evaluate and report");
  run_cmd->add_option("--config", run.config, "experiment JSON");
  run_cmd->add_option("--lambda", run.lambda, "L2 regularization strength");
  run_cmd->add_option("--seed", run.seed, "split seed");
  run_cmd->add_option("--layer", run.layer, "layer slot to probe, or 'all'");
  run_cmd->add_option("--metric", run.metric, "heatmap metric: cosine or pearson");
  run_cmd->add_option("--out", run.out, "output directory");
  run_cmd->add_option("--workers", run.workers, "training threads");
  run_cmd->add_option("--reference", run.reference, "reference language code for similarity curves");

  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic archive");
  synth_cmd->add_option("--config", synth.config, "synthetic config JSON");
  synth_cmd->add_option("--layers", synth.layers, "layer slots");
  synth_cmd->add_option("--dim", synth.dim, "hidden dimension");
  synth_cmd->add_option("--samples", synth.samples, "number of samples");
  synth_cmd->add_option("--schedule", synth.schedule, "linear:A:B, const:V or v0,v1,...");
  synth_cmd->add_option("--direction-seed", synth.direction_seed, "seed of the class direction");
  synth_cmd->add_option("--noise-seed", synth.noise_seed, "seed of labels and noise");
  synth_cmd->add_option("--lang", synth.lang, "language code");
  synth_cmd->add_option("--model", synth.model, "model name recorded in the archive");
  synth_cmd->add_option("--dataset", synth.dataset, "dataset name recorded in the archive");
  synth_cmd->add_option("--out", synth.out, "archive path");

  SimilarityFlags sim;
  auto* sim_cmd = app.add_subcommand("similarity", "probe-vector similarity from saved probes");
  sim_cmd->add_option("--probes", sim.probes, "directory of probe JSON files")->required();
  sim_cmd->add_option("--reference", sim.reference, "reference language code");
  sim_cmd->add_option("--metric", sim.metric, "curve metric: cosine or pearson");
  sim_cmd->add_option("--heatmap-metric", sim.heatmap_metric, "heatmap metric: cosine or pearson");
  sim_cmd->add_option("--layer", sim.layer, "heatmap layer (default deepest)");
  sim_cmd->add_option("--out", sim.out, "output directory (default: print)");

  std::string got, want;
  double tol = 0.0;
  auto* cmp_cmd = app.add_subcommand("compare", "cell-wise comparison of two CSV tables");
  cmp_cmd->add_option("--got", got, "measured CSV")->required();
  cmp_cmd->add_option("--want", want, "reference CSV")->required();
  cmp_cmd->add_option("--tol", tol, "absolute tolerance per cell");

  std::string archive_path;
  auto* val_cmd = app.add_subcommand("validate", "check an archive and its model shape");
  val_cmd->add_option("--archive", archive_path, "HSAF file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*synth_cmd) return cmd_synth(synth);
    if (*sim_cmd) return cmd_similarity(sim);
    if (*cmp_cmd) return cmd_compare(got, want, tol);
    if (*val_cmd) return cmd_validate(archive_path);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const LanguageError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitConfig;
}
