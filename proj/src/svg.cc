#include "polyprobe/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "polyprobe/errors.hpp"

namespace polyprobe {
namespace {

struct Rgb {
  int r, g, b;
};

constexpr Rgb kCold{0x21, 0x66, 0xac};
constexpr Rgb kNeutral{0xf7, 0xf7, 0xf7};
constexpr Rgb kWarm{0xb2, 0x18, 0x2b};

// Curve colors, cycled in reporting order.
constexpr std::array<std::string_view, 16> kPalette = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd",
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string num(double v) { return fmt("%.2f", v); }

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Two-decimal label without a "-0.00".
std::string cell_label(double v) {
  auto s = fmt("%.2f", v);
  if (s == "-0.00") s = "0.00";
  return s;
}

int lerp(int a, int b, double t) { return static_cast<int>(std::lround(a + (b - a) * t)); }

std::string header(double width, double height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
         num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) +
         "\" font-family=\"sans-serif\">\n<rect class=\"background\" x=\"0\" y=\"0\" width=\"" +
         num(width) + "\" height=\"" + num(height) + "\" fill=\"#ffffff\"/>\n";
}

}  // namespace

std::string diverging_color(double value) {
  double v = std::isnan(value) ? 0.0 : std::clamp(value, -1.0, 1.0);
  Rgb c = v < 0 ? Rgb{lerp(kNeutral.r, kCold.r, -v), lerp(kNeutral.g, kCold.g, -v),
                      lerp(kNeutral.b, kCold.b, -v)}
                : Rgb{lerp(kNeutral.r, kWarm.r, v), lerp(kNeutral.g, kWarm.g, v),
                      lerp(kNeutral.b, kWarm.b, v)};
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

std::string render_heatmap(const SimilarityMatrix& m) {
  constexpr double kCell = 44.0, kLeft = 90.0, kTop = 90.0, kLegendW = 16.0, kPad = 20.0;
  const auto k = m.languages.size();
  const double grid = kCell * static_cast<double>(k);
  const double width = kLeft + grid + kPad + kLegendW + 50.0;
  const double height = std::max(kTop + grid + kPad, kTop + 200.0 + kPad);

  std::string s = header(width, height);
  s += "<text x=\"" + num(kLeft) + "\" y=\"24.00\" font-size=\"14\">" +
       escape(std::string(to_string(m.metric))) + " similarity, layer " + std::to_string(m.layer) +
       "</text>\n";
  for (std::size_t i = 0; i < k; ++i) {
    double c = kLeft + kCell * (static_cast<double>(i) + 0.5);
    double r = kTop + kCell * (static_cast<double>(i) + 0.5);
    s += "<text class=\"col-label\" x=\"" + num(c) + "\" y=\"" + num(kTop - 8.0) +
         "\" font-size=\"11\" text-anchor=\"start\" transform=\"rotate(-60 " + num(c) + " " +
         num(kTop - 8.0) + ")\">" + escape(m.languages[i].display_name) + "</text>\n";
    s += "<text class=\"row-label\" x=\"" + num(kLeft - 6.0) + "\" y=\"" + num(r + 4.0) +
         "\" font-size=\"11\" text-anchor=\"end\">" + escape(m.languages[i].display_name) +
         "</text>\n";
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double v = m.values(i, j);
      double x = kLeft + kCell * static_cast<double>(j);
      double y = kTop + kCell * static_cast<double>(i);
      s += "<rect class=\"cell\" x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(kCell) +
           "\" height=\"" + num(kCell) + "\" fill=\"" + diverging_color(v) + "\"/>\n";
      s += "<text class=\"value\" x=\"" + num(x + kCell / 2) + "\" y=\"" + num(y + kCell / 2 + 4.0) +
           "\" font-size=\"10\" text-anchor=\"middle\" fill=\"" +
           (std::abs(v) > 0.6 ? "#ffffff" : "#000000") + "\">" + cell_label(v) + "</text>\n";
    }
  }
  // Color bar from +1 (top) to -1 (bottom).
  const double lx = kLeft + grid + kPad;
  constexpr int kSteps = 20;
  for (int i = 0; i < kSteps; ++i) {
    double v = 1.0 - 2.0 * (i + 0.5) / kSteps;
    s += "<rect class=\"legend\" x=\"" + num(lx) + "\" y=\"" + num(kTop + 10.0 * i) +
         "\" width=\"" + num(kLegendW) + "\" height=\"10.00\" fill=\"" + diverging_color(v) + "\"/>\n";
  }
  for (double v : {1.0, 0.0, -1.0}) {
    s += "<text class=\"legend-label\" x=\"" + num(lx + kLegendW + 4.0) + "\" y=\"" +
         num(kTop + 100.0 * (1.0 - v) + 4.0) + "\" font-size=\"10\">" + cell_label(v) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string render_curves(std::span<const LayerCurve> curves, CurveKind kind,
                          const std::optional<LanguageTag>& highlight, std::string_view title) {
  if (curves.empty()) throw DataError("render_curves needs at least one curve");
  constexpr double kLeft = 60.0, kTop = 40.0, kPlotW = 640.0, kPlotH = 360.0, kLegendW = 150.0;
  const double width = kLeft + kPlotW + 20.0 + kLegendW;
  const double height = kTop + kPlotH + 50.0;
  const double ymin = kind == CurveKind::kAccuracy ? 0.0 : -1.0;
  const double ymax = 1.0;

  int lo = curves.front().layers.empty() ? 0 : curves.front().layers.front();
  int hi = lo;
  for (const auto& c : curves) {
    if (c.layers.size() != c.values.size()) throw DimensionError("curve layers and values differ in length");
    for (int l : c.layers) {
      lo = std::min(lo, l);
      hi = std::max(hi, l);
    }
  }
  auto xpos = [&](int l) {
    if (hi == lo) return kLeft + kPlotW / 2;
    return kLeft + kPlotW * static_cast<double>(l - lo) / static_cast<double>(hi - lo);
  };
  auto ypos = [&](double v) {
    v = std::clamp(v, ymin, ymax);
    return kTop + kPlotH * (ymax - v) / (ymax - ymin);
  };

  std::string s = header(width, height);
  if (!title.empty()) {
    s += "<text x=\"" + num(kLeft) + "\" y=\"24.00\" font-size=\"14\">" + escape(title) + "</text>\n";
  }
  s += "<rect class=\"frame\" x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(kPlotW) +
       "\" height=\"" + num(kPlotH) + "\" fill=\"none\" stroke=\"#000000\"/>\n";
  const int ticks = kind == CurveKind::kAccuracy ? 5 : 4;
  for (int i = 0; i <= ticks; ++i) {
    double v = ymin + (ymax - ymin) * i / ticks;
    s += "<line class=\"grid\" x1=\"" + num(kLeft) + "\" y1=\"" + num(ypos(v)) + "\" x2=\"" +
         num(kLeft + kPlotW) + "\" y2=\"" + num(ypos(v)) + "\" stroke=\"#dddddd\"/>\n";
    s += "<text class=\"y-tick\" x=\"" + num(kLeft - 6.0) + "\" y=\"" + num(ypos(v) + 4.0) +
         "\" font-size=\"10\" text-anchor=\"end\">" + cell_label(v) + "</text>\n";
  }
  int step = std::max(1, (hi - lo) / 12);
  for (int l = lo; l <= hi; l += step) {
    s += "<text class=\"x-tick\" x=\"" + num(xpos(l)) + "\" y=\"" + num(kTop + kPlotH + 16.0) +
         "\" font-size=\"10\" text-anchor=\"middle\">" + std::to_string(l) + "</text>\n";
  }
  s += "<text x=\"" + num(kLeft + kPlotW / 2) + "\" y=\"" + num(kTop + kPlotH + 36.0) +
       "\" font-size=\"11\" text-anchor=\"middle\">layer</text>\n";
  if (lo == 0) {
    s += "<line class=\"embedding-slot\" x1=\"" + num(xpos(0)) + "\" y1=\"" + num(kTop) + "\" x2=\"" +
         num(xpos(0)) + "\" y2=\"" + num(kTop + kPlotH) +
         "\" stroke=\"#999999\" stroke-dasharray=\"1 3\"/>\n";
    s += "<text class=\"embedding-slot\" x=\"" + num(xpos(0) + 3.0) + "\" y=\"" + num(kTop + 12.0) +
         "\" font-size=\"9\" fill=\"#999999\">emb</text>\n";
  }

  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    auto color = kPalette[i % kPalette.size()];
    bool low = c.language.resource_class == ResourceClass::kLow;
    bool bold = highlight && highlight->code == c.language.code;
    std::string points;
    for (std::size_t p = 0; p < c.layers.size(); ++p) {
      if (p) points += ' ';
      points += num(xpos(c.layers[p])) + "," + num(ypos(c.values[p]));
    }
    s += "<polyline class=\"curve\" data-language=\"" + escape(c.language.code) + "\" points=\"" +
         points + "\" fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"" +
         (bold ? "3.00" : "1.50") + "\"" + (low ? " stroke-dasharray=\"6 3\"" : "") + "/>\n";
    double ly = kTop + 14.0 * static_cast<double>(i) + 6.0;
    double lx = kLeft + kPlotW + 20.0;
    s += "<line class=\"legend\" x1=\"" + num(lx) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(lx + 24.0) +
         "\" y2=\"" + num(ly) + "\" stroke=\"" + std::string(color) + "\" stroke-width=\"" +
         (bold ? "3.00" : "1.50") + "\"" + (low ? " stroke-dasharray=\"6 3\"" : "") + "/>\n";
    s += "<text class=\"legend-label\" x=\"" + num(lx + 30.0) + "\" y=\"" + num(ly + 4.0) +
         "\" font-size=\"10\">" + escape(c.language.display_name) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace polyprobe
