#include "dominet/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "dominet/csv.hpp"

namespace dominet {
namespace {

constexpr double kWidth = 640.0, kHeight = 420.0;
constexpr double kLeft = 70.0, kRight = 20.0, kTop = 40.0, kBottom = 55.0;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string xml_escape(const std::string& s) {
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

std::pair<double, double> fit_range(const LineChart& chart, bool use_x) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : chart.series) {
    const auto& v = use_x ? s.x : s.y;
    for (double d : v) {
      if (!std::isfinite(d)) continue;
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  return {lo, hi};
}

}  // namespace

std::string render_svg(const LineChart& chart) {
  const auto [x0, x1] = chart.x_range.value_or(fit_range(chart, true));
  const auto [y0, y1] = chart.y_range.value_or(fit_range(chart, false));
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<!-- schema_version=" + std::to_string(kSchemaVersion) + " -->\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
       num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
       xml_escape(chart.title) + "</text>\n";
  s += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) +
       "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"#333\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double fx = x0 + (x1 - x0) * i / 5.0, fy = y0 + (y1 - y0) * i / 5.0;
    s += "<line x1=\"" + num(px(fx)) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(px(fx)) +
         "\" y2=\"" + num(kTop + ph + 5) + "\" stroke=\"#333\"/>\n";
    s += "<text x=\"" + num(px(fx)) + "\" y=\"" + num(kTop + ph + 18) +
         "\" text-anchor=\"middle\">" + tick_label(fx) + "</text>\n";
    s += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(py(fy)) + "\" x2=\"" + num(kLeft) +
         "\" y2=\"" + num(py(fy)) + "\" stroke=\"#333\"/>\n";
    s += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(py(fy) + 4) +
         "\" text-anchor=\"end\">" + tick_label(fy) + "</text>\n";
  }
  s += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 12) +
       "\" text-anchor=\"middle\">" + xml_escape(chart.x_label) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num(kTop + ph / 2) + ")\">" + xml_escape(chart.y_label) + "</text>\n";

  if (chart.diagonal) {
    s += "<line x1=\"" + num(px(x0)) + "\" y1=\"" + num(py(y0)) + "\" x2=\"" + num(px(x1)) +
         "\" y2=\"" + num(py(y1)) + "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  }
  if (chart.vertical_line) {
    const double vx = px(*chart.vertical_line);
    s += "<line x1=\"" + num(vx) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(vx) + "\" y2=\"" +
         num(kTop + ph) + "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  }

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& ser = chart.series[k];
    const char* color = kColors[k % 4];
    std::string points;
    const std::size_t n = std::min(ser.x.size(), ser.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(ser.x[i]) || !std::isfinite(ser.y[i])) continue;
      if (!points.empty()) points += ' ';
      points += num(px(ser.x[i])) + "," + num(py(ser.y[i]));
    }
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
         "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    if (ser.markers) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(ser.x[i]) || !std::isfinite(ser.y[i])) continue;
        s += "<circle cx=\"" + num(px(ser.x[i])) + "\" cy=\"" + num(py(ser.y[i])) +
             "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
      }
    }
    s += "<text x=\"" + num(kLeft + pw - 8) + "\" y=\"" + num(kTop + 16 + 16.0 * k) +
         "\" text-anchor=\"end\" fill=\"" + color + "\">" + xml_escape(ser.name) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace dominet
