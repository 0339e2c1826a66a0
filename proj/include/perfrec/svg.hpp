#pragma once
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "perfrec/csv.hpp"

namespace perfrec {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

namespace svgdetail {

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % 10];
}

struct Extent {
  double xmin, xmax, ymin, ymax;
};

inline Extent extent_of(const std::vector<Series>& series) {
  Extent e{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      e.xmin = std::min(e.xmin, x);
      e.xmax = std::max(e.xmax, x);
      e.ymin = std::min(e.ymin, y);
      e.ymax = std::max(e.ymax, y);
    }
  if (!(e.xmin <= e.xmax)) throw std::invalid_argument("svg: no data points");
  if (e.xmax - e.xmin < 1e-12) {
    e.xmin -= 0.5;
    e.xmax += 0.5;
  }
  if (e.ymax - e.ymin < 1e-12) {
    e.ymin -= 0.5;
    e.ymax += 0.5;
  }
  return e;
}

inline std::string num(double v) {
  // fixed short decimal for coordinates; deterministic
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace svgdetail

// One panel: axes, one polyline (+ point markers) per series, legend.
// `scatter` draws markers only (with a thin connecting path per series).
inline std::string render_panel(const std::vector<Series>& series, const std::string& title,
                                const std::string& xlabel, const std::string& ylabel,
                                bool scatter, double x0, double y0, double w, double h) {
  using namespace svgdetail;
  Extent e = extent_of(series);
  const double ml = 55, mr = 120, mt = 30, mb = 40;  // margins (legend on the right)
  double pw = w - ml - mr, ph = h - mt - mb;
  auto px = [&](double x) { return x0 + ml + (x - e.xmin) / (e.xmax - e.xmin) * pw; };
  auto py = [&](double y) { return y0 + mt + ph - (y - e.ymin) / (e.ymax - e.ymin) * ph; };

  std::string s;
  s += "<rect x=\"" + num(x0 + ml) + "\" y=\"" + num(y0 + mt) + "\" width=\"" + num(pw) +
       "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  s += "<text x=\"" + num(x0 + ml + pw / 2) + "\" y=\"" + num(y0 + 18) +
       "\" text-anchor=\"middle\" font-size=\"13\">" + title + "</text>\n";
  s += "<text x=\"" + num(x0 + ml + pw / 2) + "\" y=\"" + num(y0 + h - 8) +
       "\" text-anchor=\"middle\" font-size=\"11\">" + xlabel + "</text>\n";
  s += "<text x=\"" + num(x0 + 14) + "\" y=\"" + num(y0 + mt + ph / 2) +
       "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 " + num(x0 + 14) +
       " " + num(y0 + mt + ph / 2) + ")\">" + ylabel + "</text>\n";
  // axis ticks: min and max on both axes
  s += "<text x=\"" + num(x0 + ml) + "\" y=\"" + num(y0 + mt + ph + 14) +
       "\" font-size=\"10\" text-anchor=\"middle\">" + fmt_double(e.xmin) + "</text>\n";
  s += "<text x=\"" + num(x0 + ml + pw) + "\" y=\"" + num(y0 + mt + ph + 14) +
       "\" font-size=\"10\" text-anchor=\"middle\">" + fmt_double(e.xmax) + "</text>\n";
  s += "<text x=\"" + num(x0 + ml - 4) + "\" y=\"" + num(y0 + mt + ph) +
       "\" font-size=\"10\" text-anchor=\"end\">" + fmt_double(e.ymin) + "</text>\n";
  s += "<text x=\"" + num(x0 + ml - 4) + "\" y=\"" + num(y0 + mt + 8) +
       "\" font-size=\"10\" text-anchor=\"end\">" + fmt_double(e.ymax) + "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = palette(si);
    std::string pts;
    for (auto [x, y] : series[si].points) pts += num(px(x)) + "," + num(py(y)) + " ";
    s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
         "\" stroke-width=\"" + (scatter ? "0.8" : "1.6") + "\"/>\n";
    if (scatter)
      for (auto [x, y] : series[si].points)
        s += "<circle cx=\"" + num(px(x)) + "\" cy=\"" + num(py(y)) +
             "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
    double ly = y0 + mt + 12 + 14 * static_cast<double>(si);
    s += "<rect x=\"" + num(x0 + w - mr + 8) + "\" y=\"" + num(ly - 8) +
         "\" width=\"10\" height=\"10\" fill=\"" + color + "\"/>\n";
    s += "<text x=\"" + num(x0 + w - mr + 22) + "\" y=\"" + num(ly) +
         "\" font-size=\"10\">" + series[si].name + "</text>\n";
  }
  return s;
}

// Document with one or more stacked panels.
struct SvgPanel {
  std::vector<Series> series;
  std::string title, xlabel, ylabel;
  bool scatter = false;
};

inline std::string render_svg(const std::vector<SvgPanel>& panels, double width = 560,
                              double panel_height = 300) {
  if (panels.empty()) throw std::invalid_argument("svg: no panels");
  double height = panel_height * static_cast<double>(panels.size());
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                  svgdetail::num(width) + "\" height=\"" + svgdetail::num(height) +
                  "\" font-family=\"sans-serif\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i)
    s += render_panel(panels[i].series, panels[i].title, panels[i].xlabel,
                      panels[i].ylabel, panels[i].scatter, 0,
                      panel_height * static_cast<double>(i), width, panel_height);
  s += "</svg>\n";
  return s;
}

}  // namespace perfrec
