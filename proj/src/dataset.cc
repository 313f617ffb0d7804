#include "polyprobe/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <unordered_set>

#include "json_util.hpp"
#include "polyprobe/errors.hpp"
#include "polyprobe/random.hpp"

namespace polyprobe {

std::vector<LabeledStatement> load_statements(std::istream& in, const LanguageTag& language) {
  validate_language(language);
  std::vector<LabeledStatement> out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    LabeledStatement s;
    s.language = language;
    try {
      auto j = detail::json::parse(line);
      if (!j.is_object()) throw ParseError("expected a JSON object", lineno);
      s.id = j.at("id").get<std::string>();
      s.text = j.at("text").get<std::string>();
      const auto& label = j.at("label");
      if (!label.is_number_integer() || (label.get<std::int64_t>() != 0 && label.get<std::int64_t>() != 1)) {
        throw ParseError("label must be 0 or 1", lineno);
      }
      s.label = static_cast<std::uint8_t>(label.get<std::int64_t>());
    } catch (const detail::json::exception& e) {
      throw ParseError(e.what(), lineno);
    }
    if (s.text.empty()) throw ParseError("empty statement text", lineno);
    if (!ids.insert(s.id).second) {
      throw DataError("line " + std::to_string(lineno) + ": duplicate id '" + s.id + "'");
    }
    out.push_back(std::move(s));
  }
  return out;
}

PromptTemplate::PromptTemplate(LanguageTag language, std::string text)
    : language_(std::move(language)), text_(std::move(text)) {
  validate_language(language_);
  placeholder_pos_ = text_.find(kStatementPlaceholder);
  if (placeholder_pos_ == std::string::npos) {
    throw DataError("template for '" + language_.code + "' has no " +
                    std::string(kStatementPlaceholder) + " placeholder");
  }
  if (text_.find(kStatementPlaceholder, placeholder_pos_ + 1) != std::string::npos) {
    throw DataError("template for '" + language_.code + "' has more than one placeholder");
  }
}

std::string apply_template(const PromptTemplate& tmpl, const LabeledStatement& statement) {
  if (tmpl.language_.code != statement.language.code) {
    throw LanguageError("template language '" + tmpl.language_.code +
                        "' does not match statement language '" + statement.language.code + "'");
  }
  std::string out = tmpl.text_.substr(0, tmpl.placeholder_pos_);
  out += statement.text;
  out += tmpl.text_.substr(tmpl.placeholder_pos_ + kStatementPlaceholder.size());
  return out;
}

std::vector<PromptTemplate> load_templates(std::istream& in) {
  detail::json j;
  try {
    j = detail::json::parse(in);
  } catch (const detail::json::exception& e) {
    throw ParseError(std::string("template file: ") + e.what(), 0);
  }
  if (!j.is_object()) throw ParseError("template file must be a JSON object", 0);
  std::vector<PromptTemplate> out;
  for (const auto& [code, text] : j.items()) {
    if (!text.is_string()) throw ParseError("template for '" + code + "' is not a string", 0);
    out.emplace_back(language_from_code(code), text.get<std::string>());
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return language_order_less(a.language(), b.language());
  });
  return out;
}

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie strictly between 0 and 1");
  }
}

std::size_t train_size(std::size_t n, double train_fraction) {
  // The small slack keeps products like 0.29 * 100 from flooring to 28.
  return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
}

SplitResult split(std::span<const std::string> ids, const SplitSpec& spec) {
  return split(ids, {}, SplitSpec{spec.train_fraction, spec.seed, false});
}

SplitResult split(std::span<const std::string> ids, std::span<const std::uint8_t> labels,
                  const SplitSpec& spec) {
  spec.validate();
  const auto n = ids.size();
  if (n < 2) throw DegenerateError("cannot split fewer than 2 items");
  {
    std::unordered_set<std::string_view> seen;
    for (const auto& id : ids)
      if (!seen.insert(id).second) throw DataError("duplicate id '" + id + "' in split input");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);

  SplitResult r;
  if (!spec.stratified) {
    auto k = train_size(n, spec.train_fraction);
    for (std::size_t i = 0; i < n; ++i) {
      (i < k ? r.train_ids : r.test_ids).push_back(ids[order[i]]);
    }
  } else {
    if (labels.size() != n) throw DimensionError("stratified split needs one label per id");
    std::size_t counts[2] = {0, 0};
    for (auto y : labels) {
      if (y > 1) throw DataError("label outside {0,1}");
      ++counts[y];
    }
    std::size_t quota[2] = {train_size(counts[0], spec.train_fraction),
                            train_size(counts[1], spec.train_fraction)};
    for (auto i : order) {
      auto y = labels[i];
      if (quota[y] > 0) {
        --quota[y];
        r.train_ids.push_back(ids[i]);
      } else {
        r.test_ids.push_back(ids[i]);
      }
    }
  }
  if (r.train_ids.empty() || r.test_ids.empty()) {
    throw DegenerateError("split leaves an empty train or test set");
  }
  return r;
}

std::string split_manifest_to_json(const SplitSpec& spec, const SplitResult& result) {
  detail::json j;
  j["seed"] = spec.seed;
  j["train_fraction"] = spec.train_fraction;
  if (spec.stratified) j["stratified"] = true;
  j["train_ids"] = result.train_ids;
  j["test_ids"] = result.test_ids;
  return j.dump(2) + "\n";
}

std::pair<SplitSpec, SplitResult> split_manifest_from_json(std::string_view text) {
  try {
    auto j = detail::json::parse(text);
    SplitSpec spec;
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.train_fraction = j.at("train_fraction").get<double>();
    spec.stratified = j.value("stratified", false);
    spec.validate();
    SplitResult r;
    r.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    r.test_ids = j.at("test_ids").get<std::vector<std::string>>();
    return {spec, r};
  } catch (const detail::json::exception& e) {
    throw ParseError(std::string("split manifest: ") + e.what(), 0);
  }
}

void SyntheticConfig::validate() const {
  if (num_layers < 1) throw ConfigError("num_layers must be >= 1");
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
  if (num_samples < 2) throw ConfigError("num_samples must be >= 2");
  if (separation_schedule.size() != num_layers) {
    throw ConfigError("separation schedule has " + std::to_string(separation_schedule.size()) +
                      " entries for " + std::to_string(num_layers) + " layer slots");
  }
  for (double delta : separation_schedule) {
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw ConfigError("separation must be finite and >= 0");
  }
  validate_language(language);
}

Archive synthesize(const SyntheticConfig& config) {
  config.validate();
  const auto n = config.num_samples;
  const auto d = config.hidden_dim;

  std::vector<double> u(d);
  Rng dir_rng(config.direction_seed);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& c : u) {
      c = dir_rng.normal();
      norm += c * c;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& c : u) c /= norm;

  Archive a;
  a.meta.model_name = config.model_name;
  a.meta.dataset_name = config.dataset_name;
  a.meta.language = config.language;
  a.meta.num_layers = config.num_layers;
  a.meta.hidden_dim = d;
  a.meta.num_samples = n;
  a.meta.sample_ids.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) a.meta.sample_ids.push_back("s" + std::to_string(i));

  a.labels.assign(n, 0);
  for (auto i = n / 2; i < n; ++i) a.labels[i] = 1;
  Rng noise(config.noise_seed);
  noise.shuffle(a.labels);

  a.tensors.resize(a.meta.tensor_extent());
  auto out = a.tensors.begin();
  for (std::uint64_t l = 0; l < config.num_layers; ++l) {
    double half = 0.5 * config.separation_schedule[l];
    for (std::uint64_t i = 0; i < n; ++i) {
      double sign = a.labels[i] ? 1.0 : -1.0;
      for (std::uint64_t j = 0; j < d; ++j) {
        *out++ = static_cast<float>(sign * half * u[j] + noise.normal());
      }
    }
  }
  return a;
}

std::vector<double> linear_schedule(std::size_t slots, double first, double last) {
  std::vector<double> s(slots, first);
  if (slots > 1) {
    for (std::size_t i = 0; i < slots; ++i) {
      s[i] = first + (last - first) * static_cast<double>(i) / static_cast<double>(slots - 1);
    }
  }
  return s;
}

std::vector<double> constant_schedule(std::size_t slots, double value) {
  return std::vector<double>(slots, value);
}

}  // namespace polyprobe
