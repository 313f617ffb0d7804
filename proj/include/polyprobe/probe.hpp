#pragma once

// Linear classifier probe: L2-regularized logistic regression on hidden
// states. For weights w, intercept b and n samples (x_i, y_i):
//
//   J(w, b) = (1/n) sum_i [softplus(z_i) - y_i z_i] + lambda/(2n) |w|^2,
//   z_i = w.x_i + b
//
// which is the mean cross-entropy of sigmoid(z_i) plus the penalty. The
// intercept is not penalized.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polyprobe/language.hpp"

namespace polyprobe {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

struct TrainSet {
  Matrix features;
  std::vector<std::uint8_t> labels;
};

// n >= 2, labels in {0,1} and of length n, finite features. With
// require_both_classes, single-class data is a DegenerateError.
void validate_train_set(const TrainSet& data, bool require_both_classes = true);

struct ProbeConfig {
  double lambda = 1.0;
  bool fit_intercept = true;
  double convergence_tol = 1e-6;  // on the gradient infinity-norm
  int max_iterations = 5000;
  std::int64_t seed = 0;  // unused; training is deterministic
  // Train on per-feature standardized inputs, then map the probe back to
  // raw-feature space. Off by default.
  bool standardize = false;

  void validate() const;
};

struct Probe {
  std::vector<double> weights;
  double bias = 0.0;
  bool converged = false;
  double final_gradient_norm = 0.0;
  int iterations_used = 0;

  friend bool operator==(const Probe&, const Probe&) = default;
};

double sigmoid(double z);

struct ObjectiveValue {
  double value = 0.0;
  std::vector<double> grad_weights;
  double grad_bias = 0.0;
};

ObjectiveValue objective_and_gradient(std::span<const double> weights, double bias,
                                      const TrainSet& data, double lambda);

// Full-batch gradient descent with a backtracking line search. Step trials
// start from the Barzilai-Borwein estimate and halve until the
// sufficient-decrease condition holds. Once decreases fall below the
// rounding level of J, a trial is also accepted when the directional
// derivative at the trial point is still non-positive (for a convex J that
// certifies J did not increase), which lets the gradient reach tolerances
// far below sqrt(machine epsilon).
Probe train_probe(const TrainSet& data, const ProbeConfig& config);

struct Prediction {
  std::vector<double> probabilities;
  std::vector<std::uint8_t> labels;  // 1 iff probability >= 0.5
};

Prediction predict(const Probe& probe, const Matrix& features);
// Row-major float rows, as stored in archive layers.
Prediction predict(const Probe& probe, std::span<const float> rows, std::size_t cols);

double accuracy(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> actual);

// One probe plus the cell it belongs to, as stored on disk.
struct ProbeRecord {
  LanguageTag language;
  int layer = 0;
  double lambda = 0.0;
  Probe probe;
};

// {language, layer, lambda, weights, bias, converged, final_gradient_norm,
//  iterations_used}; reals printed with 17 significant digits.
std::string probe_to_json(const ProbeRecord& record);
ProbeRecord probe_from_json(std::string_view text);

}  // namespace polyprobe
