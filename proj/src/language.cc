#include "polyprobe/language.hpp"

#include <algorithm>
#include <array>

#include "polyprobe/errors.hpp"

namespace polyprobe {
namespace {

using RC = ResourceClass;

const std::array<LanguageTag, 16> kBuiltin = {{
    {"en", "English", RC::kHigh},
    {"de", "German", RC::kHigh},
    {"fr", "French", RC::kHigh},
    {"zh", "Chinese", RC::kHigh},
    {"es", "Spanish", RC::kHigh},
    {"ru", "Russian", RC::kHigh},
    {"id", "Indonesian", RC::kHigh},
    {"or", "Oriya", RC::kLow},
    {"hi", "Hindi", RC::kLow},
    {"my", "Burmese", RC::kLow},
    {"haw", "Hawaiian", RC::kLow},
    {"kn", "Kannada", RC::kLow},
    {"ta", "Tamil", RC::kLow},
    {"te", "Telugu", RC::kLow},
    {"kk", "Kazakh", RC::kLow},
    {"tk", "Turkmen", RC::kLow},
}};

std::ptrdiff_t builtin_index(std::string_view code) {
  for (std::size_t i = 0; i < kBuiltin.size(); ++i) {
    if (kBuiltin[i].code == code) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

}  // namespace

std::string_view to_string(ResourceClass rc) { return rc == RC::kHigh ? "high" : "low"; }

ResourceClass parse_resource_class(std::string_view s) {
  if (s == "high") return RC::kHigh;
  if (s == "low") return RC::kLow;
  throw LanguageError("unknown resource class '" + std::string(s) + "'");
}

std::span<const LanguageTag> builtin_languages() { return kBuiltin; }

std::optional<LanguageTag> find_builtin_language(std::string_view code) {
  auto i = builtin_index(code);
  if (i < 0) return std::nullopt;
  return kBuiltin[static_cast<std::size_t>(i)];
}

LanguageTag language_from_code(std::string_view code, ResourceClass unknown_class) {
  if (code.empty()) throw LanguageError("empty language code");
  if (auto tag = find_builtin_language(code)) return *tag;
  return LanguageTag{std::string(code), std::string(code), unknown_class};
}

void validate_language(const LanguageTag& tag) {
  if (tag.code.empty()) throw LanguageError("empty language code");
  if (auto builtin = find_builtin_language(tag.code)) {
    if (builtin->resource_class != tag.resource_class) {
      throw LanguageError("language '" + tag.code + "' must be " +
                          std::string(to_string(builtin->resource_class)) + "-resource");
    }
  }
}

bool language_order_less(const LanguageTag& a, const LanguageTag& b) {
  auto ia = builtin_index(a.code);
  auto ib = builtin_index(b.code);
  if (ia >= 0 && ib >= 0) return ia < ib;
  if (ia >= 0) return true;
  if (ib >= 0) return false;
  return a.code < b.code;
}

void sort_languages(std::vector<LanguageTag>& langs) {
  std::stable_sort(langs.begin(), langs.end(), language_order_less);
}

}  // namespace polyprobe
