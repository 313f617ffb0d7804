#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace polyprobe {

enum class ResourceClass { kHigh, kLow };

std::string_view to_string(ResourceClass rc);
ResourceClass parse_resource_class(std::string_view s);

struct LanguageTag {
  std::string code;
  std::string display_name;
  ResourceClass resource_class = ResourceClass::kLow;

  friend bool operator==(const LanguageTag&, const LanguageTag&) = default;
};

// The sixteen studied languages in reporting order: seven high-resource
// languages followed by nine low-resource ones.
std::span<const LanguageTag> builtin_languages();

std::optional<LanguageTag> find_builtin_language(std::string_view code);

// Resolves a code to its built-in tag, or makes a tag for an unknown code
// with the given resource class. Throws LanguageError on an empty code.
LanguageTag language_from_code(std::string_view code,
                               ResourceClass unknown_class = ResourceClass::kLow);

// Throws LanguageError if the tag is empty or contradicts the built-in table.
void validate_language(const LanguageTag& tag);

// Strict weak order used everywhere languages are listed: built-in languages
// first in table order, then others lexicographically by code.
bool language_order_less(const LanguageTag& a, const LanguageTag& b);

void sort_languages(std::vector<LanguageTag>& langs);

}  // namespace polyprobe
