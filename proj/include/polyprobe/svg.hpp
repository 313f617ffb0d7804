#pragma once

// Self-contained SVG figures. Output depends only on the inputs, so the same
// data always renders to the same bytes.
//
// Heatmap colors interpolate linearly in RGB between three fixed stops:
//   -1 -> #2166ac (cold), 0 -> #f7f7f7, +1 -> #b2182b (warm).

#include <optional>
#include <span>
#include <string>

#include "polyprobe/analysis.hpp"

namespace polyprobe {

inline constexpr std::string_view kColdColor = "#2166ac";
inline constexpr std::string_view kNeutralColor = "#f7f7f7";
inline constexpr std::string_view kWarmColor = "#b2182b";

// "#rrggbb" for a value on the fixed [-1, 1] scale; values outside are clamped.
std::string diverging_color(double value);

// k x k grid of <rect class="cell">, languages on both axes in matrix order,
// each cell labeled with its value to two decimals.
std::string render_heatmap(const SimilarityMatrix& matrix);

enum class CurveKind { kAccuracy, kSimilarity };

// One <polyline class="curve"> per curve over layer index. High-resource
// languages are solid, low-resource dashed. The y-axis is [0, 1] for
// accuracy and [-1, 1] for similarity. Layer slot 0 (the embedding output)
// gets its own dotted guide. DataError on an empty curve list.
std::string render_curves(std::span<const LayerCurve> curves, CurveKind kind,
                          const std::optional<LanguageTag>& highlight = std::nullopt,
                          std::string_view title = {});

}  // namespace polyprobe
