#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "polyprobe/archive.hpp"
#include "polyprobe/dataset.hpp"
#include "polyprobe/pipeline.hpp"

namespace testing_support {

namespace fs = std::filesystem;

// Fresh scratch directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("polyprobe-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Synthetic archives for the given languages: high-resource ones get a
// rising schedule around a shared direction, low-resource ones a flat weak
// schedule around their own direction.
inline polyprobe::ExperimentConfig synthetic_experiment(const fs::path& dir,
                                                        const std::vector<std::string>& codes,
                                                        std::uint64_t layers, std::uint64_t dim,
                                                        std::uint64_t samples) {
  polyprobe::ExperimentConfig cfg;
  std::uint64_t k = 0;
  for (const auto& code : codes) {
    polyprobe::SyntheticConfig s;
    s.language = polyprobe::language_from_code(code);
    s.num_layers = layers;
    s.hidden_dim = dim;
    s.num_samples = samples;
    s.model_name = "synthetic-model";
    s.dataset_name = "synthetic-cities";
    bool high = s.language.resource_class == polyprobe::ResourceClass::kHigh;
    s.separation_schedule = high ? polyprobe::linear_schedule(layers, 0.0, 6.0)
                                 : polyprobe::constant_schedule(layers, 0.5);
    s.direction_seed = high ? 1 : 100 + k;
    s.noise_seed = 500 + k;
    auto path = dir / (code + ".hsaf");
    polyprobe::write_archive_file(polyprobe::synthesize(s), path);
    cfg.archives.emplace_back(s.language, path);
    ++k;
  }
  cfg.split.seed = 17;
  cfg.output_dir = dir / "out";
  return cfg;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Relative path -> contents for every file under dir.
inline std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return out;
}

}  // namespace testing_support
