#include "gscls/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "gscls/error.hpp"

namespace gscls {

namespace {

// Fixed categorical palette, cycled by class index.
constexpr const char* kPalette[] = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string escape_xml(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
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

}  // namespace

std::string svg_scatter(std::span<const Real> points, std::span<const std::size_t> labels,
                        const std::vector<std::string>& class_names, const std::string& title) {
  if (points.size() != labels.size() * 2 || labels.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "scatter needs n x 2 points with n labels");
  }
  const std::size_t n = labels.size();
  for (std::size_t label : labels) {
    if (label >= class_names.size()) {
      throw Error(ErrorCode::InvalidLabel,
                  fmt::format("label {} out of range for {} classes", label, class_names.size()));
    }
  }

  Real min_x = points[0], max_x = points[0], min_y = points[1], max_y = points[1];
  for (std::size_t i = 0; i < n; ++i) {
    min_x = std::min(min_x, points[i * 2]);
    max_x = std::max(max_x, points[i * 2]);
    min_y = std::min(min_y, points[i * 2 + 1]);
    max_y = std::max(max_y, points[i * 2 + 1]);
  }
  const Real span_x = std::max(max_x - min_x, Real(1e-9));
  const Real span_y = std::max(max_y - min_y, Real(1e-9));

  constexpr Real kPlotW = 520, kPlotH = 440, kLeft = 40, kTop = 40;
  const Real legend_x = kLeft + kPlotW + 16;
  const Real width = legend_x + 180;
  const Real height = kTop + kPlotH + 24;

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "viewBox=\"0 0 {:.0f} {:.0f}\">\n",
      width, height, width, height);
  svg += fmt::format(
      "<text x=\"{:.1f}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
      "text-anchor=\"middle\">{}</text>\n",
      kLeft + kPlotW / 2, escape_xml(title));
  svg += fmt::format(
      "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" "
      "stroke=\"#888888\"/>\n",
      kLeft, kTop, kPlotW, kPlotH);

  for (std::size_t i = 0; i < n; ++i) {
    const Real px = kLeft + (points[i * 2] - min_x) / span_x * kPlotW;
    const Real py = kTop + kPlotH - (points[i * 2 + 1] - min_y) / span_y * kPlotH;
    svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", px, py,
                       kPalette[labels[i] % kPaletteSize]);
  }

  for (std::size_t c = 0; c < class_names.size(); ++c) {
    const Real y = kTop + 10 + static_cast<Real>(c) * 20;
    svg += fmt::format(
        "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n", legend_x,
        y - 10, kPalette[c % kPaletteSize]);
    svg += fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
        legend_x + 18, y, escape_xml(class_names[c]));
  }
  svg += "</svg>\n";
  return svg;
}

std::string svg_heatmap(std::span<const Real> matrix, const std::vector<std::string>& class_names,
                        const std::string& title) {
  const std::size_t k = class_names.size();
  if (k == 0 || matrix.size() != k * k) {
    throw Error(ErrorCode::ShapeMismatch, "heatmap needs a k x k matrix with k class names");
  }

  constexpr Real kCell = 56;
  std::size_t label_chars = 0;
  for (const std::string& name : class_names) label_chars = std::max(label_chars, name.size());
  const Real left = 24 + static_cast<Real>(label_chars) * 7;
  const Real top = 48 + static_cast<Real>(label_chars) * 7;
  const Real width = left + static_cast<Real>(k) * kCell + 24;
  const Real height = top + static_cast<Real>(k) * kCell + 24;

  // Linear color scale from white at 0 to a saturated blue at 1.
  auto cell_color = [](Real v) {
    const Real t = std::clamp(v, Real(0), Real(1));
    const int r = static_cast<int>(std::lround(255 + t * (8 - 255)));
    const int g = static_cast<int>(std::lround(255 + t * (48 - 255)));
    const int b = static_cast<int>(std::lround(255 + t * (107 - 255)));
    return fmt::format("#{:02x}{:02x}{:02x}", r, g, b);
  };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "viewBox=\"0 0 {:.0f} {:.0f}\">\n",
      width, height, width, height);
  svg += fmt::format(
      "<text x=\"{:.1f}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
      "text-anchor=\"middle\">{}</text>\n",
      left + static_cast<Real>(k) * kCell / 2, escape_xml(title));

  for (std::size_t i = 0; i < k; ++i) {
    // Row label (true class) and rotated column label (predicted class).
    svg += fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"end\">{}</text>\n",
        left - 8, top + static_cast<Real>(i) * kCell + kCell / 2 + 4,
        escape_xml(class_names[i]));
    const Real cx = left + static_cast<Real>(i) * kCell + kCell / 2;
    svg += fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"start\" transform=\"rotate(-60 {:.1f} {:.1f})\">{}</text>\n",
        cx, top - 8, cx, top - 8, escape_xml(class_names[i]));
  }

  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const Real v = matrix[i * k + j];
      const Real x = left + static_cast<Real>(j) * kCell;
      const Real y = top + static_cast<Real>(i) * kCell;
      svg += fmt::format(
          "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\" "
          "stroke=\"#dddddd\"/>\n",
          x, y, kCell, kCell, cell_color(v));
      svg += fmt::format(
          "<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"12\" "
          "text-anchor=\"middle\" fill=\"{}\">{:.2f}</text>\n",
          x + kCell / 2, y + kCell / 2 + 4, v > 0.5 ? "#ffffff" : "#333333", v);
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace gscls
