#include "polyprobe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json_util.hpp"
#include "polyprobe/errors.hpp"

namespace polyprobe {
namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(std::span<const double> v, double extra) {
  double m = std::abs(extra);
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Parameters are packed as [w_0 .. w_{d-1}, b]; b stays 0 without intercept.
struct Evaluation {
  double value = 0.0;
  std::vector<double> grad;  // length d + 1
};

class Objective {
 public:
  Objective(const TrainSet& data, double lambda, bool fit_intercept)
      : data_(data), lambda_(lambda), fit_intercept_(fit_intercept) {}

  Evaluation operator()(std::span<const double> params) const {
    const auto n = data_.features.rows;
    const auto d = data_.features.cols;
    const auto inv_n = 1.0 / static_cast<double>(n);
    auto w = params.first(d);
    double b = params[d];
    Evaluation e;
    e.grad.assign(d + 1, 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto x = data_.features.row(i);
      double z = dot(w, x) + b;
      double y = data_.labels[i];
      loss += softplus(z) - y * z;
      double r = sigmoid(z) - y;
      for (std::size_t j = 0; j < d; ++j) e.grad[j] += r * x[j];
      e.grad[d] += r;
    }
    double wsq = dot(w, w);
    e.value = loss * inv_n + 0.5 * lambda_ * inv_n * wsq;
    for (std::size_t j = 0; j < d; ++j) e.grad[j] = e.grad[j] * inv_n + lambda_ * inv_n * w[j];
    e.grad[d] = fit_intercept_ ? e.grad[d] * inv_n : 0.0;
    return e;
  }

 private:
  const TrainSet& data_;
  double lambda_;
  bool fit_intercept_;
};

Probe minimize(const TrainSet& data, const ProbeConfig& cfg) {
  const auto d = data.features.cols;
  const auto n = data.features.rows;
  Objective objective(data, cfg.lambda, cfg.fit_intercept);

  std::vector<double> x(d + 1, 0.0);
  auto cur = objective(x);
  double gnorm = inf_norm(cur.grad, 0.0);

  // Initial step from a Lipschitz bound of the gradient: the loss Hessian is
  // at most X'X/(4n), whose spectral norm is at most the mean squared row norm / 4.
  double mean_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = data.features.row(i);
    mean_sq += dot(r, r) + (cfg.fit_intercept ? 1.0 : 0.0);
  }
  mean_sq /= static_cast<double>(n);
  double step = 1.0 / (0.25 * mean_sq + cfg.lambda / static_cast<double>(n));

  constexpr double kArmijo = 1e-4;
  constexpr int kMaxHalvings = 80;
  const double rounding = 4.0 * std::numeric_limits<double>::epsilon();

  Probe probe;
  int iter = 0;
  std::vector<double> trial(d + 1);
  while (gnorm > cfg.convergence_tol && iter < cfg.max_iterations) {
    double gg = dot(cur.grad, cur.grad);
    double t = step;
    bool accepted = false;
    Evaluation next;
    for (int h = 0; h < kMaxHalvings; ++h, t *= 0.5) {
      for (std::size_t j = 0; j <= d; ++j) trial[j] = x[j] - t * cur.grad[j];
      next = objective(trial);
      if (!std::isfinite(next.value)) continue;
      if (next.value <= cur.value - kArmijo * t * gg) {
        accepted = true;
        break;
      }
      bool within_rounding = next.value <= cur.value + rounding * std::abs(cur.value);
      if (within_rounding && dot(next.grad, cur.grad) >= 0.0) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    ++iter;

    // Barzilai-Borwein step s's / s'y for the next trial.
    double ss = 0.0, sy = 0.0;
    for (std::size_t j = 0; j <= d; ++j) {
      double s = trial[j] - x[j];
      double y = next.grad[j] - cur.grad[j];
      ss += s * s;
      sy += s * y;
    }
    step = (sy > 0.0 && ss > 0.0) ? std::clamp(ss / sy, 1e-12, 1e12) : 2.0 * t;

    x.swap(trial);
    cur = std::move(next);
    gnorm = inf_norm(cur.grad, 0.0);
  }

  probe.weights.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(d));
  probe.bias = x[d];
  probe.final_gradient_norm = gnorm;
  probe.converged = gnorm <= cfg.convergence_tol;
  probe.iterations_used = iter;
  return probe;
}

template <typename Row>
Prediction predict_rows(const Probe& probe, std::size_t rows, std::size_t cols, Row&& row) {
  if (cols != probe.weights.size()) {
    throw DimensionError("feature width " + std::to_string(cols) + " does not match probe width " +
                         std::to_string(probe.weights.size()));
  }
  Prediction p;
  p.probabilities.resize(rows);
  p.labels.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    auto x = row(i);
    double z = probe.bias;
    for (std::size_t j = 0; j < cols; ++j) z += probe.weights[j] * static_cast<double>(x[j]);
    p.probabilities[i] = sigmoid(z);
    p.labels[i] = p.probabilities[i] >= 0.5 ? 1 : 0;
  }
  return p;
}

}  // namespace

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) throw DimensionError("matrix data does not match its shape");
}

void validate_train_set(const TrainSet& data, bool require_both_classes) {
  const auto& f = data.features;
  if (f.data.size() != f.rows * f.cols) throw DimensionError("feature matrix is malformed");
  if (f.rows < 2) throw DimensionError("training set needs at least 2 samples");
  if (f.cols < 1) throw DimensionError("training set has zero features");
  if (data.labels.size() != f.rows) {
    throw DimensionError("labels length " + std::to_string(data.labels.size()) +
                         " does not match " + std::to_string(f.rows) + " samples");
  }
  std::size_t positives = 0;
  for (auto y : data.labels) {
    if (y > 1) throw DataError("label outside {0,1}");
    positives += y;
  }
  for (double v : f.data) {
    if (!std::isfinite(v)) throw DataError("non-finite feature value");
  }
  if (require_both_classes && (positives == 0 || positives == f.rows)) {
    throw DegenerateError("training labels contain a single class");
  }
}

void ProbeConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(convergence_tol > 0.0)) throw ConfigError("convergence_tol must be > 0");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

ObjectiveValue objective_and_gradient(std::span<const double> weights, double bias,
                                      const TrainSet& data, double lambda) {
  if (weights.size() != data.features.cols) {
    throw DimensionError("weights length " + std::to_string(weights.size()) +
                         " does not match feature width " + std::to_string(data.features.cols));
  }
  if (data.labels.size() != data.features.rows) throw DimensionError("labels length mismatch");
  if (data.features.rows == 0) throw DimensionError("empty training set");
  std::vector<double> params(weights.begin(), weights.end());
  params.push_back(bias);
  auto e = Objective(data, lambda, true)(params);
  ObjectiveValue out;
  out.value = e.value;
  out.grad_bias = e.grad.back();
  e.grad.pop_back();
  out.grad_weights = std::move(e.grad);
  return out;
}

Probe train_probe(const TrainSet& data, const ProbeConfig& config) {
  config.validate();
  validate_train_set(data, true);
  if (!config.standardize) return minimize(data, config);

  const auto n = data.features.rows;
  const auto d = data.features.cols;
  std::vector<double> mean(d, 0.0), scale(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += data.features(i, j);
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double c = data.features(i, j) - mean[j];
      scale[j] += c * c;
    }
  }
  for (auto& s : scale) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s == 0.0) s = 1.0;
  }
  TrainSet z{Matrix(n, d), data.labels};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) z.features(i, j) = (data.features(i, j) - mean[j]) / scale[j];
  }
  auto probe = minimize(z, config);
  for (std::size_t j = 0; j < d; ++j) {
    probe.weights[j] /= scale[j];
    probe.bias -= probe.weights[j] * mean[j];
  }
  return probe;
}

Prediction predict(const Probe& probe, const Matrix& features) {
  return predict_rows(probe, features.rows, features.cols,
                      [&](std::size_t i) { return features.row(i); });
}

Prediction predict(const Probe& probe, std::span<const float> rows, std::size_t cols) {
  if (cols == 0 || rows.size() % cols != 0) throw DimensionError("row data is not a whole number of rows");
  return predict_rows(probe, rows.size() / cols, cols,
                      [&](std::size_t i) { return rows.subspan(i * cols, cols); });
}

double accuracy(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> actual) {
  if (predicted.size() != actual.size()) throw DimensionError("accuracy: length mismatch");
  if (predicted.empty()) throw DimensionError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == actual[i];
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::string probe_to_json(const ProbeRecord& r) {
  using detail::format_double17;
  std::string s = "{\"language\":" + detail::json(r.language.code).dump();
  s += ",\"layer\":" + std::to_string(r.layer);
  s += ",\"lambda\":" + format_double17(r.lambda);
  s += ",\"weights\":[";
  for (std::size_t i = 0; i < r.probe.weights.size(); ++i) {
    if (i) s += ',';
    s += format_double17(r.probe.weights[i]);
  }
  s += "],\"bias\":" + format_double17(r.probe.bias);
  s += ",\"converged\":" + std::string(r.probe.converged ? "true" : "false");
  s += ",\"final_gradient_norm\":" + format_double17(r.probe.final_gradient_norm);
  s += ",\"iterations_used\":" + std::to_string(r.probe.iterations_used);
  s += "}\n";
  return s;
}

ProbeRecord probe_from_json(std::string_view text) {
  try {
    auto j = detail::json::parse(text);
    ProbeRecord r;
    r.language = detail::language_from_json(j.at("language"));
    r.layer = j.at("layer").get<int>();
    r.lambda = j.at("lambda").get<double>();
    r.probe.weights = j.at("weights").get<std::vector<double>>();
    r.probe.bias = j.at("bias").get<double>();
    r.probe.converged = j.at("converged").get<bool>();
    r.probe.final_gradient_norm = j.at("final_gradient_norm").get<double>();
    r.probe.iterations_used = j.at("iterations_used").get<int>();
    return r;
  } catch (const detail::json::exception& e) {
    throw ParseError(std::string("malformed probe JSON: ") + e.what(), 0);
  }
}

}  // namespace polyprobe
