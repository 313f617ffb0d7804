#pragma once

#include "polyprobe/archive.hpp"
#include "polyprobe/dataset.hpp"
#include "polyprobe/probe.hpp"

namespace testing_support {

inline polyprobe::TrainSet layer_train_set(const polyprobe::Archive& a, std::uint64_t slot) {
  const auto n = a.meta.num_samples, d = a.meta.hidden_dim;
  polyprobe::TrainSet t{polyprobe::Matrix(n, d), a.labels};
  auto src = a.layer(slot);
  std::copy(src.begin(), src.end(), t.features.data.begin());
  return t;
}

// Train on one archive's slot and score on another archive's same slot.
inline double holdout_accuracy(const polyprobe::Archive& train, const polyprobe::Archive& test,
                               std::uint64_t slot, const polyprobe::ProbeConfig& cfg = {}) {
  auto probe = polyprobe::train_probe(layer_train_set(train, slot), cfg);
  auto pred = polyprobe::predict(probe, test.layer(slot), test.meta.hidden_dim);
  return polyprobe::accuracy(pred.labels, test.labels);
}

// A training archive and an independent held-out archive drawn with the
// same class direction.
inline std::pair<polyprobe::Archive, polyprobe::Archive> train_and_holdout(
    polyprobe::SyntheticConfig cfg, std::uint64_t seed) {
  cfg.direction_seed = 1000 + seed;
  cfg.noise_seed = 2 * seed;
  auto train = polyprobe::synthesize(cfg);
  cfg.noise_seed = 2 * seed + 1;
  return {std::move(train), polyprobe::synthesize(cfg)};
}

}  // namespace testing_support
