#pragma once

#include <cstdio>
#include <string>

#include <json.hpp>

#include "polyprobe/errors.hpp"
#include "polyprobe/language.hpp"

namespace polyprobe::detail {

using nlohmann::json;

inline json language_to_json(const LanguageTag& tag) {
  return json{{"code", tag.code},
              {"display_name", tag.display_name},
              {"resource_class", std::string(to_string(tag.resource_class))}};
}

// Accepts either a full tag object or a bare code string.
inline LanguageTag language_from_json(const json& j) {
  if (j.is_string()) return language_from_code(j.get<std::string>());
  LanguageTag tag;
  tag.code = j.at("code").get<std::string>();
  tag.display_name = j.value("display_name", tag.code);
  auto fallback = language_from_code(tag.code).resource_class;
  tag.resource_class = j.contains("resource_class")
                           ? parse_resource_class(j.at("resource_class").get<std::string>())
                           : fallback;
  validate_language(tag);
  return tag;
}

// %.17g round-trips every double.
inline std::string format_double17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace polyprobe::detail
