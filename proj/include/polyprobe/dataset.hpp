#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "polyprobe/archive.hpp"
#include "polyprobe/language.hpp"

namespace polyprobe {

struct LabeledStatement {
  std::string id;
  std::string text;
  std::uint8_t label = 0;
  LanguageTag language;
};

// JSON lines, one {"id": string, "text": string, "label": 0|1} per line.
// Blank lines are skipped. Parse failures report the 1-based line number.
std::vector<LabeledStatement> load_statements(std::istream& in, const LanguageTag& language);

inline constexpr std::string_view kStatementPlaceholder = "<Statement>";

class PromptTemplate {
 public:
  // Throws DataError unless `text` contains the placeholder exactly once.
  PromptTemplate(LanguageTag language, std::string text);

  const LanguageTag& language() const { return language_; }
  const std::string& text() const { return text_; }

 private:
  LanguageTag language_;
  std::string text_;
  std::size_t placeholder_pos_;

  friend std::string apply_template(const PromptTemplate&, const LabeledStatement&);
};

// Substitutes the statement text for the single placeholder; nothing in the
// statement itself is re-scanned.
std::string apply_template(const PromptTemplate& tmpl, const LabeledStatement& statement);

// JSON object mapping language code to template text.
std::vector<PromptTemplate> load_templates(std::istream& in);

// English template for the Cities task.
inline constexpr std::string_view kEnglishCitiesTemplate =
    "Judge the statement is Positive or Negative. <Statement>";

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  // Take train_fraction of each label class separately. Off by default.
  bool stratified = false;

  void validate() const;
};

struct SplitResult {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

// The permutation is Fisher-Yates driven by mt19937_64(seed) (see Rng); the
// first floor(train_fraction * n) permuted ids form the training set. Ids
// keep their permuted order in both halves.
SplitResult split(std::span<const std::string> ids, const SplitSpec& spec);
// Stratified when spec.stratified; labels are ignored otherwise.
SplitResult split(std::span<const std::string> ids, std::span<const std::uint8_t> labels,
                  const SplitSpec& spec);

std::size_t train_size(std::size_t n, double train_fraction);

// {"seed", "train_fraction", "train_ids", "test_ids"}; "stratified" is
// written only when set.
std::string split_manifest_to_json(const SplitSpec& spec, const SplitResult& result);
std::pair<SplitSpec, SplitResult> split_manifest_from_json(std::string_view text);

struct SyntheticConfig {
  std::uint64_t num_layers = 25;
  std::uint64_t hidden_dim = 64;
  std::uint64_t num_samples = 400;
  std::vector<double> separation_schedule;  // one class-mean distance per layer slot
  std::uint64_t direction_seed = 0;
  std::uint64_t noise_seed = 0;

  std::string model_name = "synthetic";
  std::string dataset_name = "synthetic";
  LanguageTag language = language_from_code("en");

  void validate() const;
};

// Two Gaussian classes N(-+ delta/2 * u, I) per layer slot, with a unit
// direction u drawn from direction_seed. The first floor(n/2) samples get
// label 0, the rest label 1; labels are then shuffled by noise_seed and the
// same generator supplies the noise. The best achievable accuracy at a slot
// is Phi(delta/2).
Archive synthesize(const SyntheticConfig& config);

// Schedules used for the two resource regimes.
std::vector<double> linear_schedule(std::size_t slots, double first, double last);
std::vector<double> constant_schedule(std::size_t slots, double value);

}  // namespace polyprobe
