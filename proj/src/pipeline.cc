#include "polyprobe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "json_util.hpp"
#include "polyprobe/archive.hpp"
#include "polyprobe/errors.hpp"
#include "polyprobe/svg.hpp"

namespace polyprobe {
namespace {

namespace fs = std::filesystem;
using detail::json;

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

void write_text(const fs::path& path, const std::string& text, std::vector<fs::path>& files) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write to '" + path.string() + "' failed");
  files.push_back(path);
}

struct LoadedLanguage {
  LanguageTag tag;
  Archive archive;
  std::unordered_map<std::string, std::size_t> row_of;
};

std::vector<LoadedLanguage> load_archives(const ExperimentConfig& cfg) {
  if (cfg.archives.empty()) throw ConfigError("no archives configured");
  std::set<std::string> seen;
  std::vector<LoadedLanguage> out;
  for (const auto& [tag, path] : cfg.archives) {
    if (!seen.insert(tag.code).second) throw ConfigError("language '" + tag.code + "' listed twice");
    if (!fs::exists(path)) {
      throw ConfigError("archive for language '" + tag.code + "' not found: " + path.string());
    }
    LoadedLanguage l;
    l.tag = tag;
    try {
      l.archive = read_archive_file(path);
    } catch (const Error& e) {
      throw ConfigError("archive for language '" + tag.code + "' is unreadable: " + e.what());
    }
    if (l.archive.meta.language.code != tag.code) {
      throw ConfigError("archive " + path.string() + " holds language '" +
                        l.archive.meta.language.code + "', configured as '" + tag.code + "'");
    }
    for (std::size_t i = 0; i < l.archive.meta.sample_ids.size(); ++i) {
      l.row_of.emplace(l.archive.meta.sample_ids[i], i);
    }
    out.push_back(std::move(l));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return language_order_less(a.tag, b.tag); });

  const auto& first = out.front().archive.meta;
  for (const auto& l : out) {
    const auto& m = l.archive.meta;
    auto where = " (language '" + l.tag.code + "')";
    if (m.num_layers != first.num_layers || m.hidden_dim != first.hidden_dim) {
      throw ConfigError("archives disagree on (num_layers, hidden_dim)" + where);
    }
    if (m.model_name != first.model_name || m.dataset_name != first.dataset_name) {
      throw ConfigError("archives disagree on model or dataset name" + where);
    }
    if (!cfg.model_name.empty() && m.model_name != cfg.model_name) {
      throw ConfigError("archive model '" + m.model_name + "' is not '" + cfg.model_name + "'" + where);
    }
    if (!cfg.dataset_name.empty() && m.dataset_name != cfg.dataset_name) {
      throw ConfigError("archive dataset '" + m.dataset_name + "' is not '" + cfg.dataset_name + "'" +
                        where);
    }
    if (m.num_samples != first.num_samples) throw ConfigError("archives disagree on sample count" + where);
    for (const auto& id : first.sample_ids) {
      if (!l.row_of.contains(id)) throw ConfigError("sample id '" + id + "' missing" + where);
    }
  }
  return out;
}

SplitResult resolve_split(const ExperimentConfig& cfg, const Archive& first) {
  const auto& ids = first.meta.sample_ids;
  SplitResult derived = split(ids, first.labels, cfg.split);
  if (!cfg.split_ids) return derived;

  const auto& given = *cfg.split_ids;
  std::set<std::string> all(ids.begin(), ids.end());
  std::set<std::string> covered;
  for (const auto* part : {&given.train_ids, &given.test_ids}) {
    for (const auto& id : *part) {
      if (!all.contains(id)) throw ConfigError("split id '" + id + "' is not in the archives");
      if (!covered.insert(id).second) throw ConfigError("split id '" + id + "' appears twice");
    }
  }
  if (covered.size() != all.size()) throw ConfigError("split ids do not cover every sample");
  if (given.train_ids.empty() || given.test_ids.empty()) throw ConfigError("split has an empty side");
  return given;
}

std::vector<int> resolve_layers(const ExperimentConfig& cfg, std::uint64_t num_layers) {
  std::vector<int> layers;
  if (!cfg.layers) {
    for (std::uint64_t l = 0; l < num_layers; ++l) layers.push_back(static_cast<int>(l));
    return layers;
  }
  std::set<int> s(cfg.layers->begin(), cfg.layers->end());
  for (int l : s) {
    if (l < 0 || static_cast<std::uint64_t>(l) >= num_layers) {
      throw ConfigError("layer " + std::to_string(l) + " outside archive slots 0.." +
                        std::to_string(num_layers - 1));
    }
  }
  if (s.empty()) throw ConfigError("no layers selected");
  return {s.begin(), s.end()};
}

TrainSet gather(const LoadedLanguage& l, int layer, const std::vector<std::string>& ids) {
  const auto d = l.archive.meta.hidden_dim;
  TrainSet t{Matrix(ids.size(), d), std::vector<std::uint8_t>(ids.size())};
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto r = l.row_of.at(ids[i]);
    auto src = l.archive.row(static_cast<std::uint64_t>(layer), r);
    auto dst = t.features.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    t.labels[i] = l.archive.labels[r];
  }
  return t;
}

Archive subset_archive(const LoadedLanguage& l, const std::vector<std::string>& ids) {
  Archive a;
  a.meta = l.archive.meta;
  a.meta.num_samples = ids.size();
  a.meta.sample_ids = ids;
  const auto d = l.archive.meta.hidden_dim;
  a.tensors.reserve(a.meta.num_layers * ids.size() * d);
  for (std::uint64_t layer = 0; layer < a.meta.num_layers; ++layer) {
    for (const auto& id : ids) {
      auto src = l.archive.row(layer, l.row_of.at(id));
      a.tensors.insert(a.tensors.end(), src.begin(), src.end());
    }
  }
  for (const auto& id : ids) a.labels.push_back(l.archive.labels[l.row_of.at(id)]);
  return a;
}

// Runs fn(i) for i in [0, count) on up to `workers` threads. Exceptions are
// rethrown for the lowest failing index, so the reported error does not
// depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

json probe_config_json(const ProbeConfig& p) {
  return json{{"lambda", p.lambda},
              {"fit_intercept", p.fit_intercept},
              {"convergence_tol", p.convergence_tol},
              {"max_iterations", p.max_iterations},
              {"standardize", p.standardize},
              {"seed", p.seed}};
}

std::string gaps_to_json(const std::vector<GapSummary>& gaps) {
  auto arr = json::array();
  for (const auto& g : gaps) {
    json per;
    for (const auto& [lang, acc] : g.per_language) per[lang.code] = acc;
    arr.push_back({{"layer", g.layer},
                   {"high_mean", g.high_mean},
                   {"low_mean", g.low_mean},
                   {"gap", g.gap},
                   {"per_language", per}});
  }
  return json{{"gaps", arr}}.dump(2) + "\n";
}

CsvTable curves_to_table(const std::vector<LayerCurve>& curves) {
  CsvTable t;
  t.corner = "language";
  if (curves.empty()) return t;
  for (int l : curves.front().layers) t.columns.push_back(std::to_string(l));
  t.values = Matrix(curves.size(), t.columns.size());
  for (std::size_t i = 0; i < curves.size(); ++i) {
    t.rows.push_back(curves[i].language.code);
    for (std::size_t j = 0; j < curves[i].values.size(); ++j) t.values(i, j) = curves[i].values[j];
  }
  return t;
}

bool has_both_classes(const std::vector<LanguageTag>& langs) {
  bool hi = false, lo = false;
  for (const auto& l : langs) (l.resource_class == ResourceClass::kHigh ? hi : lo) = true;
  return hi && lo;
}

}  // namespace

ExperimentConfig config_from_json(std::string_view text, const fs::path& base_dir) {
  ExperimentConfig cfg;
  try {
    auto j = json::parse(text);
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("archives")) {
      for (const auto& [code, path] : j.at("archives").items()) {
        cfg.archives.emplace_back(language_from_code(code), resolve(base_dir, path.get<std::string>()));
      }
    }
    cfg.dataset_name = j.value("dataset_name", "");
    cfg.model_name = j.value("model_name", "");
    if (j.contains("probe")) {
      const auto& p = j.at("probe");
      cfg.probe.lambda = p.value("lambda", cfg.probe.lambda);
      cfg.probe.fit_intercept = p.value("fit_intercept", cfg.probe.fit_intercept);
      cfg.probe.convergence_tol = p.value("convergence_tol", cfg.probe.convergence_tol);
      cfg.probe.max_iterations = p.value("max_iterations", cfg.probe.max_iterations);
      cfg.probe.standardize = p.value("standardize", cfg.probe.standardize);
      cfg.probe.seed = p.value("seed", cfg.probe.seed);
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      cfg.split.train_fraction = s.value("train_fraction", cfg.split.train_fraction);
      cfg.split.seed = s.value("seed", cfg.split.seed);
      cfg.split.stratified = s.value("stratified", cfg.split.stratified);
      if (s.contains("train_ids") || s.contains("test_ids")) {
        cfg.split_ids = SplitResult{s.at("train_ids").get<std::vector<std::string>>(),
                                    s.at("test_ids").get<std::vector<std::string>>()};
      }
    }
    if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    if (j.contains("layers") && !(j.at("layers").is_string() && j.at("layers") == "all")) {
      cfg.layers = j.at("layers").get<std::vector<int>>();
    }
    if (j.contains("heatmap_layer") && !(j.at("heatmap_layer").is_string() && j.at("heatmap_layer") == "deepest")) {
      cfg.heatmap_layer = j.at("heatmap_layer").get<int>();
    }
    if (j.contains("heatmap_metric")) cfg.heatmap_metric = parse_metric(j.at("heatmap_metric").get<std::string>());
    if (j.contains("curve_metric")) cfg.curve_metric = parse_metric(j.at("curve_metric").get<std::string>());
    cfg.reference = j.value("reference", cfg.reference);
    cfg.workers = j.value("workers", cfg.workers);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  } catch (const LanguageError& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str(), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["toolkit"] = {{"name", "polyprobe"}, {"version", POLYPROBE_VERSION}};
  j["model_name"] = cfg.model_name;
  j["dataset_name"] = cfg.dataset_name;
  json archives = json::object();
  for (const auto& [tag, path] : cfg.archives) archives[tag.code] = fs::absolute(path).lexically_normal().string();
  j["archives"] = archives;
  j["probe"] = probe_config_json(cfg.probe);
  json split{{"train_fraction", cfg.split.train_fraction}, {"seed", cfg.split.seed}};
  if (cfg.split.stratified) split["stratified"] = true;
  if (cfg.split_ids) {
    split["train_ids"] = cfg.split_ids->train_ids;
    split["test_ids"] = cfg.split_ids->test_ids;
  }
  j["split"] = split;
  j["output_dir"] = fs::absolute(cfg.output_dir).lexically_normal().string();
  if (cfg.layers) {
    j["layers"] = *cfg.layers;
  } else {
    j["layers"] = "all";
  }
  if (cfg.heatmap_layer) {
    j["heatmap_layer"] = *cfg.heatmap_layer;
  } else {
    j["heatmap_layer"] = "deepest";
  }
  j["heatmap_metric"] = std::string(to_string(cfg.heatmap_metric));
  j["curve_metric"] = std::string(to_string(cfg.curve_metric));
  j["reference"] = cfg.reference;
  return j.dump(2) + "\n";
}

ReportBundle run_experiment(const ExperimentConfig& config) {
  // Everything up to the training fan-out is validation.
  config.probe.validate();
  config.split.validate();
  auto langs = load_archives(config);
  const auto& first = langs.front().archive;
  ReportBundle bundle;
  bundle.split = resolve_split(config, first);
  auto layers = resolve_layers(config, first.meta.num_layers);
  int heat_layer = config.heatmap_layer.value_or(layers.back());
  if (std::find(layers.begin(), layers.end(), heat_layer) == layers.end()) {
    throw ConfigError("heatmap layer " + std::to_string(heat_layer) + " is not among the probed layers");
  }

  ExperimentConfig manifest = config;
  manifest.model_name = first.meta.model_name;
  manifest.dataset_name = first.meta.dataset_name;
  manifest.split_ids = bundle.split;
  manifest.archives.clear();
  for (const auto& l : langs) {
    auto it = std::find_if(config.archives.begin(), config.archives.end(),
                           [&](const auto& a) { return a.first.code == l.tag.code; });
    manifest.archives.push_back(*it);
  }

  std::error_code ec;
  fs::create_directories(config.output_dir / "probes", ec);
  if (ec) throw ConfigError("cannot create output directory '" + config.output_dir.string() + "'");

  const std::size_t per_lang = layers.size();
  std::vector<Probe> probes(langs.size() * per_lang);
  parallel_for(probes.size(), config.workers, [&](std::size_t task) {
    const auto& l = langs[task / per_lang];
    int layer = layers[task % per_lang];
    probes[task] = train_probe(gather(l, layer, bundle.split.train_ids), config.probe);
  });
  bundle.probes_trained = probes.size();

  ProbeSet set(first.meta.hidden_dim);
  std::vector<fs::path> files;
  for (std::size_t t = 0; t < probes.size(); ++t) {
    const auto& tag = langs[t / per_lang].tag;
    int layer = layers[t % per_lang];
    write_text(config.output_dir / "probes" / (tag.code + "_L" + std::to_string(layer) + ".json"),
               probe_to_json({tag, layer, config.probe.lambda, probes[t]}), files);
    set.add(tag, layer, std::move(probes[t]));
  }

  std::map<std::string, Archive, std::less<>> tests;
  for (const auto& l : langs) tests.emplace(l.tag.code, subset_archive(l, bundle.split.test_ids));
  bundle.accuracy = layerwise_accuracy(set, tests);

  auto out = [&](const char* name) { return config.output_dir / name; };
  write_text(out("manifest.json"), config_to_json(manifest), files);
  write_text(out("split.json"), split_manifest_to_json(config.split, bundle.split), files);
  write_text(out("accuracy.csv"), bundle.accuracy.to_table().to_string(), files);
  write_text(out("accuracy.json"), bundle.accuracy.to_json(), files);
  auto acc_curves = accuracy_curves(bundle.accuracy);
  write_text(out("accuracy_curves.svg"),
             render_curves(acc_curves, CurveKind::kAccuracy, language_from_code(config.reference),
                           "probe accuracy, " + first.meta.model_name + " / " + first.meta.dataset_name),
             files);

  auto tags = set.languages();
  if (has_both_classes(tags)) {
    for (int l : layers) bundle.gaps.push_back(resource_gap(bundle.accuracy, l, tags));
    write_text(out("gap.json"), gaps_to_json(bundle.gaps), files);
  }

  try {
    bundle.heatmap = similarity_matrix(set, heat_layer, config.heatmap_metric);
  } catch (const DegenerateError&) {
    // Zero or constant probes (for example a huge lambda) have no similarity.
    bundle.heatmap.reset();
  }
  if (bundle.heatmap) {
    write_text(out("heatmap.csv"), similarity_to_table(*bundle.heatmap).to_string(), files);
    write_text(out("heatmap.json"), similarity_to_json(*bundle.heatmap), files);
    write_text(out("heatmap.svg"), render_heatmap(*bundle.heatmap), files);
  }

  auto ref = std::find_if(tags.begin(), tags.end(), [&](const auto& t) { return t.code == config.reference; });
  if (ref != tags.end() && tags.size() > 1) {
    try {
      bundle.similarity_curves = similarity_to_reference(set, *ref, config.curve_metric);
    } catch (const DegenerateError&) {
      bundle.similarity_curves.clear();
    }
    if (!bundle.similarity_curves.empty()) {
      write_text(out("similarity_curves.csv"), curves_to_table(bundle.similarity_curves).to_string(), files);
      write_text(out("similarity_curves.json"),
                 curves_to_json(bundle.similarity_curves, *ref, config.curve_metric), files);
      write_text(out("similarity_curves.svg"),
                 render_curves(bundle.similarity_curves, CurveKind::kSimilarity, std::nullopt,
                               std::string(to_string(config.curve_metric)) + " similarity to " +
                                   ref->display_name),
                 files);
    }
  }
  bundle.files = std::move(files);
  return bundle;
}

std::vector<std::pair<std::string, GapSummary>> table_gaps(const CsvTable& t) {
  auto known = [](const std::vector<std::string>& labels) {
    std::vector<LanguageTag> tags;
    for (const auto& l : labels) {
      if (auto tag = find_builtin_language(l)) tags.push_back(*tag);
    }
    return tags;
  };
  std::vector<std::pair<std::string, GapSummary>> out;
  auto col_langs = known(t.columns);
  auto row_langs = known(t.rows);
  if (has_both_classes(col_langs)) {
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      AccuracySurface s;
      for (std::size_t j = 0; j < t.columns.size(); ++j) {
        if (auto tag = find_builtin_language(t.columns[j])) s.set(*tag, 0, t.values(i, j));
      }
      out.emplace_back(t.rows[i], resource_gap(s, 0, col_langs));
    }
  } else if (has_both_classes(row_langs)) {
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
      AccuracySurface s;
      for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (auto tag = find_builtin_language(t.rows[i])) s.set(*tag, 0, t.values(i, j));
      }
      auto g = resource_gap(s, 0, row_langs);
      int layer = 0;
      try {
        layer = std::stoi(t.columns[j]);
      } catch (const std::exception&) {
      }
      g.layer = layer;
      out.emplace_back(t.columns[j], g);
    }
  }
  return out;
}

ComparisonReport compare_tables(const CsvTable& got, const CsvTable& want, double tolerance) {
  if (!(tolerance >= 0.0)) throw ComparisonError("tolerance must be >= 0");
  auto index = [](const std::vector<std::string>& labels, const char* what) {
    std::map<std::string, std::size_t> m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!m.emplace(labels[i], i).second) {
        throw ComparisonError(std::string("duplicate ") + what + " label '" + labels[i] + "'");
      }
    }
    return m;
  };
  auto grow = index(got.rows, "row"), wrow = index(want.rows, "row");
  auto gcol = index(got.columns, "column"), wcol = index(want.columns, "column");
  auto keys = [](const auto& m) {
    std::vector<std::string> k;
    for (const auto& [key, v] : m) k.push_back(key);
    return k;
  };
  if (keys(grow) != keys(wrow) || keys(gcol) != keys(wcol)) {
    throw ComparisonError("tables differ in shape: rows " + std::to_string(got.rows.size()) + "x" +
                          std::to_string(got.columns.size()) + " vs " + std::to_string(want.rows.size()) +
                          "x" + std::to_string(want.columns.size()) + " or in their labels");
  }
  ComparisonReport r;
  for (std::size_t i = 0; i < want.rows.size(); ++i) {
    for (std::size_t j = 0; j < want.columns.size(); ++j) {
      double w = want.values(i, j);
      double g = got.values(grow.at(want.rows[i]), gcol.at(want.columns[j]));
      double diff = std::abs(g - w);
      if (std::isnan(diff)) diff = std::numeric_limits<double>::infinity();
      r.max_abs_diff = std::max(r.max_abs_diff, diff);
      if (diff > tolerance) {
        r.pass = false;
        r.failures.push_back({want.rows[i], want.columns[j], g, w, diff});
      }
    }
  }
  r.gaps = table_gaps(want);
  return r;
}

std::string ComparisonReport::to_text() const {
  std::string s = pass ? "PASS" : "FAIL";
  s += " max_abs_diff=" + format_number(max_abs_diff) + "\n";
  for (const auto& f : failures) {
    s += "  cell " + f.row + "/" + f.column + ": got " + format_number(f.got) + " want " +
         format_number(f.want) + " (|diff| " + format_number(f.abs_diff) + ")\n";
  }
  for (const auto& [label, g] : gaps) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "  gap %s: high_mean=%.4f low_mean=%.4f gap=%.4f\n", label.c_str(),
                  g.high_mean, g.low_mean, g.gap);
    s += buf;
  }
  return s;
}

}  // namespace polyprobe
