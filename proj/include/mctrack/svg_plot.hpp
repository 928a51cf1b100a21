#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace mctrack::svg {

struct Series {
  std::string name;
  std::string color;
  std::vector<std::pair<double, double>> points;  // drawn in the given order
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

namespace detail {

inline std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

// Round step (1, 2 or 5 times a power of ten) giving about `target` ticks.
inline double nice_step(double span, int target = 6) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
}

}  // namespace detail

// Self-contained SVG: framed axes with ticks, one polyline per series and a
// legend. Output depends only on the plot data.
inline std::string render(const LinePlot& plot, int width = 640, int height = 420) {
  using detail::fixed;
  const double left = 70, right = 20, top = 40, bottom = 55;
  const double pw = width - left - right, ph = height - top - bottom;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const auto& s : plot.series)
    for (auto [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (!any) {
        xmin = xmax = x;
        ymin = ymax = y;
        any = true;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  xmin = std::min(xmin, 0.0);
  ymin = std::min(ymin, 0.0);
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  const double xstep = detail::nice_step(xmax - xmin), ystep = detail::nice_step(ymax - ymin);
  xmax = std::ceil(xmax / xstep) * xstep;
  ymax = std::ceil(ymax / ystep) * ystep;

  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return top + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::string o;
  o += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
       std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " + std::to_string(height) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + fixed(width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
       detail::escape(plot.title) + "</text>\n";
  o += "<rect x=\"" + fixed(left) + "\" y=\"" + fixed(top) + "\" width=\"" + fixed(pw) + "\" height=\"" + fixed(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0;; ++i) {
    const double x = xmin + i * xstep;
    if (x > xmax + 1e-9 * xstep) break;
    o += "<line x1=\"" + fixed(sx(x)) + "\" y1=\"" + fixed(top + ph) + "\" x2=\"" + fixed(sx(x)) + "\" y2=\"" +
         fixed(top + ph + 5) + "\" stroke=\"black\"/>";
    o += "<text x=\"" + fixed(sx(x)) + "\" y=\"" + fixed(top + ph + 18) + "\" text-anchor=\"middle\">" +
         detail::escape(fixed(x, xstep < 1 ? 2 : 0)) + "</text>\n";
  }
  for (int i = 0;; ++i) {
    const double y = ymin + i * ystep;
    if (y > ymax + 1e-9 * ystep) break;
    o += "<line x1=\"" + fixed(left - 5) + "\" y1=\"" + fixed(sy(y)) + "\" x2=\"" + fixed(left) + "\" y2=\"" +
         fixed(sy(y)) + "\" stroke=\"black\"/>";
    o += "<text x=\"" + fixed(left - 8) + "\" y=\"" + fixed(sy(y) + 4) + "\" text-anchor=\"end\">" +
         detail::escape(fixed(y, ystep < 1 ? 2 : 0)) + "</text>\n";
  }
  o += "<text x=\"" + fixed(left + pw / 2) + "\" y=\"" + fixed(height - 12.0) + "\" text-anchor=\"middle\">" +
       detail::escape(plot.x_label) + "</text>\n";
  o += "<text x=\"16\" y=\"" + fixed(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       fixed(top + ph / 2) + ")\">" + detail::escape(plot.y_label) + "</text>\n";

  for (const auto& s : plot.series) {
    o += "<polyline fill=\"none\" stroke=\"" + detail::escape(s.color) + "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (auto [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (!first) o += ' ';
      o += fixed(sx(x)) + "," + fixed(sy(y));
      first = false;
    }
    o += "\"/>\n";
  }

  double ly = top + 14;
  for (const auto& s : plot.series) {
    o += "<line x1=\"" + fixed(left + 12) + "\" y1=\"" + fixed(ly - 4) + "\" x2=\"" + fixed(left + 36) + "\" y2=\"" +
         fixed(ly - 4) + "\" stroke=\"" + detail::escape(s.color) + "\" stroke-width=\"2\"/>";
    o += "<text x=\"" + fixed(left + 42) + "\" y=\"" + fixed(ly) + "\">" + detail::escape(s.name) + "</text>\n";
    ly += 18;
  }
  o += "</svg>\n";
  return o;
}

}  // namespace mctrack::svg
