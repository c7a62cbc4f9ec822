#pragma once

#include <optional>
#include <string>
#include <vector>

namespace dominet {

struct ChartSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<ChartSeries> series;
  /// Dashed vertical guide, e.g. the dominant-unit cut.
  std::optional<double> vertical_line;
  /// Dashed y = x reference line.
  bool diagonal = false;
  /// Fixed axis ranges; unset axes fit the data.
  std::optional<std::pair<double, double>> x_range;
  std::optional<std::pair<double, double>> y_range;
};

/// Static SVG with axes, ticks and one polyline per series. Non-finite
/// points are skipped. Coordinates are printed at fixed precision.
std::string render_svg(const LineChart& chart);

}  // namespace dominet
