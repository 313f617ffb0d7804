// Acceptance suite. One PASS/FAIL line per criterion; exits 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "experiment_fixture.hpp"
#include "oracles.hpp"
#include "polyprobe/analysis.hpp"
#include "polyprobe/archive.hpp"
#include "polyprobe/csv.hpp"
#include "polyprobe/dataset.hpp"
#include "polyprobe/errors.hpp"
#include "polyprobe/pipeline.hpp"
#include "polyprobe/probe.hpp"
#include "synthetic_eval.hpp"

using namespace polyprobe;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double time_limit_s;  // 0: none
  std::function<Outcome()> check;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Plain gradient of the regularized cross-entropy, independent of the library.
std::vector<double> direct_gradient(const TrainSet& data, const std::vector<double>& w, double b,
                                    double lambda) {
  const auto n = data.features.rows;
  std::vector<double> g(w.size() + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double z = b;
    for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * data.features(i, j);
    double r = 1.0 / (1.0 + std::exp(-z)) - data.labels[i];
    for (std::size_t j = 0; j < w.size(); ++j) g[j] += r * data.features(i, j);
    g.back() += r;
  }
  for (std::size_t j = 0; j < w.size(); ++j) g[j] = g[j] / n + lambda / n * w[j];
  g.back() /= n;
  return g;
}

Outcome gradient_oracle() {
  std::mt19937_64 rng(2024);
  const double lambdas[] = {0.0, 0.1, 1.0, 10.0};
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    std::size_t n = 2 + rng() % 49, d = 1 + rng() % 20;
    auto data = oracle::random_instance(rng, n, d);
    double lambda = lambdas[k % 4];
    std::normal_distribution<double> normal(0.0, 0.5);
    std::vector<double> w(d);
    for (auto& x : w) x = normal(rng);
    double b = normal(rng);
    auto e = objective_and_gradient(w, b, data, lambda);
    auto fd = oracle::finite_difference_gradient(data, w, b, lambda);
    double diff = 0.0, norm = 0.0;
    for (std::size_t j = 0; j <= d; ++j) {
      double a = j < d ? e.grad_weights[j] : e.grad_bias;
      diff += (a - fd[j]) * (a - fd[j]);
      norm += fd[j] * fd[j];
    }
    worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12));
  }
  return {worst <= 1e-5, fmt("100 instances, max relative error %.2e (limit 1e-5)", worst)};
}

Outcome optimizer_oracle() {
  std::mt19937_64 rng(77);
  const double lambdas[] = {0.1, 1.0, 10.0};
  double worst_j = 0.0, worst_g = 0.0;
  int unconverged = 0;
  for (int k = 0; k < 50; ++k) {
    std::size_t n = 2 + rng() % 15, d = 1 + rng() % 2;
    auto data = oracle::random_instance(rng, n, d);
    ProbeConfig cfg;
    cfg.lambda = lambdas[k % 3];
    auto p = train_probe(data, cfg);
    unconverged += !p.converged;
    auto f = [&](const std::vector<double>& v) {
      return oracle::objective(data, std::vector<double>(v.begin(), v.end() - 1), v.back(), cfg.lambda);
    };
    auto best = oracle::grid_then_compass(f, d + 1);
    double got = oracle::objective(data, p.weights, p.bias, cfg.lambda);
    worst_j = std::max(worst_j, std::abs(got - f(best)));
    for (double g : direct_gradient(data, p.weights, p.bias, cfg.lambda)) worst_g = std::max(worst_g, std::abs(g));
  }
  bool ok = worst_j <= 1e-6 && worst_g <= 1e-6 && unconverged == 0;
  return {ok, fmt("50 instances, max |J - J_oracle| %.2e, max grad inf-norm %.2e, unconverged %d", worst_j,
                  worst_g, unconverged)};
}

Outcome symmetric_case() {
  TrainSet data{Matrix(2, 1, {-1.0, 1.0}), {0, 1}};
  ProbeConfig cfg;
  cfg.lambda = 1.0;
  // at the default 1e-6 the weight is only good to ~5e-9
  cfg.convergence_tol = 1e-12;
  auto p = train_probe(data, cfg);
  double w = oracle::symmetric_two_point_weight(1.0);
  double dw = std::abs(p.weights[0] - w), db = std::abs(p.bias);
  double dj = std::abs(oracle::objective(data, p.weights, p.bias, 1.0) - oracle::symmetric_two_point_objective(w, 1.0));
  return {dw <= 1e-9 && db <= 1e-9 && dj <= 1e-9,
          fmt("convergence_tol 1e-12: w=%.12f oracle %.12f (|diff| %.1e), |bias| %.1e, |J diff| %.1e", p.weights[0],
              w, dw, db, dj)};
}

// Accuracy per slot of a probe trained on n=400 and scored on a large
// independent draw from the same distribution.
std::vector<double> synthetic_curve(const std::vector<double>& schedule, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.num_layers = schedule.size();
  cfg.hidden_dim = 16;
  cfg.num_samples = 400;
  cfg.separation_schedule = schedule;
  auto train_cfg = cfg;
  train_cfg.direction_seed = 1000 + seed;
  train_cfg.noise_seed = 2 * seed;
  auto test_cfg = train_cfg;
  test_cfg.noise_seed = 2 * seed + 1;
  test_cfg.num_samples = 10000;
  auto train = synthesize(train_cfg), test = synthesize(test_cfg);
  std::vector<double> acc;
  for (std::uint64_t l = 0; l < schedule.size(); ++l) acc.push_back(testing_support::holdout_accuracy(train, test, l));
  return acc;
}

Outcome layer_accuracy_reproduction() {
  bool ok = true;
  std::string d;
  double min_rise = 1.0, max_range = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto high = synthetic_curve(linear_schedule(25, 0.0, 6.0), seed);
    double rise = high.back() - high.front();
    auto low = synthetic_curve(constant_schedule(25, 0.5), seed);
    auto [mn, mx] = std::minmax_element(low.begin(), low.end());
    double range = *mx - *mn;
    ok = ok && rise >= 0.35 && range <= 0.12;
    min_rise = std::min(min_rise, rise);
    max_range = std::max(max_range, range);
  }
  return {ok, fmt("5 seeds, min deepest-minus-slot0 %.4f (>= 0.35), max flat range %.4f (<= 0.12)", min_rise,
                  max_range)};
}

Outcome probe_similarity_reproduction() {
  // Cities-sized draws (1496 statements, 8:2 split) at width 512, probed at
  // the last slot of the rising schedule.
  auto draw = [](std::uint64_t direction, std::uint64_t noise, const char* code) {
    SyntheticConfig c;
    c.num_layers = 25;
    c.hidden_dim = 512;
    c.num_samples = 1496;
    c.separation_schedule = linear_schedule(25, 0.0, 6.0);
    c.direction_seed = direction;
    c.noise_seed = noise;
    c.language = language_from_code(code);
    return synthesize(c);
  };
  auto final_probe = [](const Archive& a, std::uint64_t seed) {
    auto parts = split(a.meta.sample_ids, a.labels, SplitSpec{0.8, seed, false});
    std::map<std::string, std::size_t> row;
    for (std::size_t i = 0; i < a.meta.sample_ids.size(); ++i) row[a.meta.sample_ids[i]] = i;
    const auto d = a.meta.hidden_dim, last = a.meta.num_layers - 1;
    TrainSet t{Matrix(parts.train_ids.size(), d), std::vector<std::uint8_t>(parts.train_ids.size())};
    for (std::size_t i = 0; i < parts.train_ids.size(); ++i) {
      auto r = row.at(parts.train_ids[i]);
      auto src = a.row(last, r);
      std::copy(src.begin(), src.end(), t.features.data.begin() + i * d);
      t.labels[i] = a.labels[r];
    }
    return train_probe(t, ProbeConfig{});
  };
  bool ok = true;
  double min_shared = 1.0, max_indep = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto en = final_probe(draw(77 + seed, 10 * seed, "en"), seed);
    auto de = final_probe(draw(77 + seed, 10 * seed + 1, "de"), seed);
    auto ta = final_probe(draw(5000 + seed, 10 * seed + 2, "ta"), seed);
    double shared = cosine_similarity(en.weights, de.weights);
    double indep = std::abs(cosine_similarity(en.weights, ta.weights));
    ok = ok && shared >= 0.8 && indep <= 0.2;
    min_shared = std::min(min_shared, shared);
    max_indep = std::max(max_indep, indep);
  }
  return {ok, fmt("5 seeds, d=512, min shared cosine %.4f (>= 0.8), max independent |cosine| %.4f (<= 0.2)",
                  min_shared, max_indep)};
}

Outcome reference_table_gap() {
  auto table = read_csv_table(std::string(POLYPROBE_DATA_DIR) + "/cities_reference_accuracy.csv");
  bool ok = table.rows.size() == 5;
  std::string d;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    AccuracySurface s;
    for (std::size_t j = 0; j < table.columns.size(); ++j)
      s.set(language_from_code(table.columns[j]), 0, table.values(i, j));
    auto g = resource_gap(s, 0);
    ok = ok && g.gap > 0.0;
    d += fmt("%s %.4f; ", table.rows[i].c_str(), g.gap);
    if (table.rows[i] == "Gemma-2B") {
      bool near = std::abs(g.high_mean - 0.9129) <= 1e-3 && std::abs(g.low_mean - 0.5744) <= 1e-3;
      ok = ok && near;
      d += fmt("(high %.4f low %.4f) ", g.high_mean, g.low_mean);
    }
  }
  return {ok, "gaps " + d};
}

Outcome bayes() {
  bool ok = true;
  double worst = 0.0;
  for (double delta : {0.0, 1.0, 2.0, 4.0}) {
    double want = oracle::standard_normal_cdf(delta / 2.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      for (double a : synthetic_curve(constant_schedule(5, delta), seed)) {
        worst = std::max(worst, std::abs(a - want));
        ok = ok && std::abs(a - want) <= 0.05;
      }
    }
  }
  return {ok, fmt("delta in {0,1,2,4}, 5 seeds x 5 slots, max |acc - Phi(delta/2)| %.4f (<= 0.05)", worst)};
}

std::string random_text(std::mt19937_64& rng) {
  static const char* pieces[] = {"a", "Z", "9", " ", "\"", "\\", "\n", "/", "é", "中", "ଓ", "{", "}"};
  std::string s;
  std::size_t len = rng() % 12;
  for (std::size_t i = 0; i < len; ++i) s += pieces[rng() % std::size(pieces)];
  return s;
}

Outcome format_roundtrip() {
  std::mt19937_64 rng(4242);
  const auto langs = builtin_languages();
  int mismatches = 0;
  for (int k = 0; k < 1000; ++k) {
    Archive a;
    a.meta.model_name = random_text(rng);
    a.meta.dataset_name = random_text(rng);
    a.meta.language = langs[rng() % langs.size()];
    a.meta.num_layers = 1 + rng() % 4;
    a.meta.hidden_dim = 1 + rng() % 6;
    a.meta.num_samples = 2 + rng() % 7;
    for (std::uint64_t i = 0; i < a.meta.num_samples; ++i) a.meta.sample_ids.push_back("id" + std::to_string(i) + ":" + random_text(rng));
    if (rng() % 2) a.meta.label_names = {random_text(rng), random_text(rng)};
    a.tensors.resize(a.meta.tensor_extent());
    for (auto& x : a.tensors) {
      // arbitrary finite bit patterns, subnormals and -0 included
      do {
        auto bits = static_cast<std::uint32_t>(rng());
        std::memcpy(&x, &bits, 4);
      } while (!std::isfinite(x));
    }
    for (std::uint64_t i = 0; i < a.meta.num_samples; ++i) a.labels.push_back(rng() % 2);
    std::stringstream buf;
    write_archive(a, buf);
    auto b = read_archive(buf);
    bool same = b.tensors.size() == a.tensors.size() &&
                std::memcmp(b.tensors.data(), a.tensors.data(), a.tensors.size() * 4) == 0 &&
                b.labels == a.labels && meta_to_json(b.meta) == meta_to_json(a.meta);
    mismatches += !same;
  }

  // fuzzed headers
  Archive base;
  base.meta.model_name = "m";
  base.meta.dataset_name = "d";
  base.meta.language = language_from_code("en");
  base.meta.num_layers = 2;
  base.meta.hidden_dim = 3;
  base.meta.num_samples = 2;
  base.meta.sample_ids = {"a", "b"};
  base.tensors.assign(12, 0.25f);
  base.labels = {0, 1};
  std::stringstream clean;
  write_archive(base, clean);
  const std::string good = clean.str();
  const std::size_t header_len = good.size() - 12 * 4 - 2;
  int accepted = 0, rejected = 0, crashed = 0;
  for (int k = 0; k < 20000; ++k) {
    std::string bytes = good;
    switch (k % 4) {
      case 0:  // flip bytes in the header
        for (int m = 1 + rng() % 4; m > 0; --m) bytes[rng() % header_len] = static_cast<char>(rng());
        break;
      case 1:  // overwrite the length field
        for (int i = 8; i < 16; ++i) bytes[i] = static_cast<char>(rng());
        break;
      case 2:  // truncate
        bytes.resize(rng() % bytes.size());
        break;
      default:  // random junk after a valid magic and version
        bytes.resize(8 + rng() % 64);
        for (std::size_t i = 8; i < bytes.size(); ++i) bytes[i] = static_cast<char>(rng());
    }
    std::istringstream in(bytes);
    try {
      read_archive(in);
      ++accepted;
    } catch (const Error&) {
      ++rejected;
    } catch (...) {
      ++crashed;
    }
  }
  return {mismatches == 0 && crashed == 0,
          fmt("1000 round-trips, %d mismatches; 20000 fuzzed inputs: %d rejected, %d accepted, %d "
              "non-library exceptions",
              mismatches, rejected, accepted, crashed)};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  auto dir = testing_support::scratch_dir("acceptance-determinism");
  std::vector<std::string> codes;
  for (const auto& t : builtin_languages()) codes.push_back(t.code);
  auto cfg = testing_support::synthetic_experiment(dir, codes, 25, 8, 120);
  std::vector<std::map<std::string, std::string>> runs;
  for (unsigned workers : {1u, 1u, 4u, 8u}) {
    fs::remove_all(cfg.output_dir);
    cfg.workers = workers;
    run_experiment(cfg);
    runs.push_back(testing_support::snapshot(cfg.output_dir));
  }
  bool same = true;
  for (const auto& r : runs) same = same && r == runs.front();
  fs::remove_all(dir);
  return {same && runs.front().size() > 400,
          fmt("%zu files per run, runs with 1, 1, 4, 8 workers byte-identical: %s", runs.front().size(),
              same ? "yes" : "no")};
}

Outcome split_arithmetic() {
  bool ok = true;
  std::string d;
  for (auto [n, want_train, want_test] : {std::tuple{1496u, 1196u, 300u}, std::tuple{1000u, 800u, 200u}}) {
    std::vector<std::string> ids;
    for (unsigned i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
    auto a = split(ids, SplitSpec{0.8, 11, false});
    auto b = split(ids, SplitSpec{0.8, 11, false});
    std::set<std::string> all(a.train_ids.begin(), a.train_ids.end());
    std::size_t overlap = 0;
    for (const auto& id : a.test_ids) overlap += !all.insert(id).second;
    bool exact = all.size() == n && overlap == 0;
    bool sizes = a.train_ids.size() == want_train && a.test_ids.size() == want_test;
    bool repro = a.train_ids == b.train_ids && a.test_ids == b.test_ids;
    ok = ok && exact && sizes && repro;
    d += fmt("n=%u -> (%zu, %zu)%s%s; ", n, a.train_ids.size(), a.test_ids.size(), exact ? "" : " NOT A PARTITION",
             repro ? "" : " NOT REPRODUCIBLE");
  }
  return {ok, d};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"gradient oracle", 5.0, gradient_oracle},
      {"optimizer oracle", 30.0, optimizer_oracle},
      {"symmetric 1-D case", 0.0, symmetric_case},
      {"synthetic layer-accuracy reproduction", 120.0, layer_accuracy_reproduction},
      {"synthetic probe-similarity reproduction", 60.0, probe_similarity_reproduction},
      {"resource gap on the shipped accuracy table", 0.0, reference_table_gap},
      {"Bayes-accuracy agreement", 0.0, bayes},
      {"format round-trip and fuzzed headers", 0.0, format_roundtrip},
      {"run determinism across worker counts", 0.0, determinism},
      {"split arithmetic", 0.0, split_arithmetic},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool in_time = c.time_limit_s <= 0.0 || secs < c.time_limit_s;
    bool pass = o.pass && in_time;
    failures += !pass;
    std::string limit = c.time_limit_s > 0.0 ? fmt(" (limit %.0fs)", c.time_limit_s) : "";
    std::printf("%s  %-44s %7.2fs%s  %s\n", pass ? "PASS" : "FAIL", c.name.c_str(), secs, limit.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
