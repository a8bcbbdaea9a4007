// Copyright 2026 The lqsid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lqsid/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace lqsid::svg {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf"};
constexpr int kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);
constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 120.0;
constexpr double kMarginTop = 28.0;
constexpr double kMarginBottom = 40.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // Guarantees a usable, slightly padded interval.
  void settle() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
      lo -= 0.5;
      hi += 0.5;
      return;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

// Maps data to a plot rectangle.
struct Frame {
  double x0, y0, w, h;
  Range xr, yr;

  double px(double x) const { return x0 + w * (x - xr.lo) / (xr.hi - xr.lo); }
  double py(double y) const { return y0 + h * (1.0 - (y - yr.lo) / (yr.hi - yr.lo)); }
};

void header(std::ostringstream& os, int width, int height) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
     << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void axes(std::ostringstream& os, const Frame& f, const std::string& title,
          const std::string& xlabel, const std::string& ylabel,
          bool x_ticks = true) {
  os << "<rect x=\"" << num(f.x0) << "\" y=\"" << num(f.y0) << "\" width=\""
     << num(f.w) << "\" height=\"" << num(f.h)
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = f.yr.lo + (f.yr.hi - f.yr.lo) * k / 4.0;
    const double y = f.py(yv);
    os << "<line x1=\"" << num(f.x0) << "\" x2=\"" << num(f.x0 + f.w)
       << "\" y1=\"" << num(y) << "\" y2=\"" << num(y)
       << "\" stroke=\"#ddd\"/>\n"
       << "<text x=\"" << num(f.x0 - 4) << "\" y=\"" << num(y + 4)
       << "\" text-anchor=\"end\">" << tick_label(yv) << "</text>\n";
    if (!x_ticks) continue;
    const double xv = f.xr.lo + (f.xr.hi - f.xr.lo) * k / 4.0;
    os << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(f.y0 + f.h + 14)
       << "\" text-anchor=\"middle\">" << tick_label(xv) << "</text>\n";
  }
  os << "<text x=\"" << num(f.x0 + f.w / 2) << "\" y=\"" << num(f.y0 - 8)
     << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(title)
     << "</text>\n";
  if (!xlabel.empty()) {
    os << "<text x=\"" << num(f.x0 + f.w / 2) << "\" y=\""
       << num(f.y0 + f.h + 30) << "\" text-anchor=\"middle\">"
       << escape(xlabel) << "</text>\n";
  }
  if (!ylabel.empty()) {
    const double cx = f.x0 - 48, cy = f.y0 + f.h / 2;
    os << "<text x=\"" << num(cx) << "\" y=\"" << num(cy)
       << "\" text-anchor=\"middle\" transform=\"rotate(-90 " << num(cx) << ' '
       << num(cy) << ")\">" << escape(ylabel) << "</text>\n";
  }
}

void legend(std::ostringstream& os, const Frame& f,
            const std::vector<std::string>& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = f.y0 + 12 + 16.0 * i;
    const double x = f.x0 + f.w + 10;
    os << "<rect x=\"" << num(x) << "\" y=\"" << num(y - 8)
       << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[i % kPaletteSize]
       << "\"/>\n<text x=\"" << num(x + 14) << "\" y=\"" << num(y + 1) << "\">"
       << escape(labels[i]) << "</text>\n";
  }
}

void draw_series(std::ostringstream& os, const Frame& f, const Series& s,
                 const char* color) {
  const std::size_t n = std::min(s.x.size(), s.y.size());
  if (s.markers) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      os << "<circle cx=\"" << num(f.px(s.x[i])) << "\" cy=\""
         << num(f.py(s.y[i])) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    return;
  }
  std::string d;
  bool pen_down = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
      pen_down = false;
      continue;
    }
    d += pen_down ? " L" : " M";
    d += num(f.px(s.x[i])) + ' ' + num(f.py(s.y[i]));
    pen_down = true;
  }
  if (d.empty()) return;
  os << "<path d=\"" << d.substr(1) << "\" fill=\"none\" stroke=\"" << color
     << "\" stroke-width=\"1.5\"" << (s.dashed ? " stroke-dasharray=\"5 3\"" : "")
     << "/>\n";
}

}  // namespace

std::string line_figure(const std::vector<Panel>& panels, int width,
                        int panel_height) {
  const int height = static_cast<int>(panels.size()) * panel_height;
  std::ostringstream os;
  header(os, width, std::max(height, 1));
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& panel = panels[p];
    Frame f{kMarginLeft, p * panel_height + kMarginTop,
            width - kMarginLeft - kMarginRight,
            panel_height - kMarginTop - kMarginBottom, {}, {}};
    for (const auto& s : panel.series) {
      for (double v : s.x) f.xr.add(v);
      for (double v : s.y) f.yr.add(v);
    }
    f.xr.settle();
    f.yr.settle();
    axes(os, f, panel.title, panel.xlabel, panel.ylabel);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < panel.series.size(); ++i) {
      draw_series(os, f, panel.series[i], kPalette[i % kPaletteSize]);
      labels.push_back(panel.series[i].label);
    }
    legend(os, f, labels);
  }
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart(const std::string& title, const std::string& ylabel,
                      const std::vector<std::string>& categories,
                      const std::vector<BarGroup>& groups, double floor) {
  const int width = 640, height = 320;
  std::ostringstream os;
  header(os, width, height);
  Frame f{kMarginLeft, kMarginTop, width - kMarginLeft - kMarginRight,
          height - kMarginTop - kMarginBottom, {}, {}};
  f.xr = {0.0, static_cast<double>(std::max<std::size_t>(categories.size(), 1))};
  f.yr.add(0.0);
  f.yr.add(1.0);
  for (const auto& g : groups) {
    for (double v : g.values) f.yr.add(std::max(v, floor));
  }
  f.yr.settle();
  axes(os, f, title, "", ylabel, false);

  const double slot = f.w / f.xr.hi;
  const double bar = 0.8 * slot / std::max<std::size_t>(groups.size(), 1);
  for (std::size_t c = 0; c < categories.size(); ++c) {
    os << "<text x=\"" << num(f.x0 + slot * (c + 0.5)) << "\" y=\""
       << num(f.y0 + f.h + 16) << "\" text-anchor=\"middle\">"
       << escape(categories[c]) << "</text>\n";
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (c >= groups[g].values.size() || !std::isfinite(groups[g].values[c])) {
        continue;
      }
      const double v = groups[g].values[c];
      const double shown = std::max(v, floor);
      const double top = f.py(std::max(shown, 0.0));
      const double bottom = f.py(std::min(shown, 0.0));
      const double x = f.x0 + slot * c + 0.1 * slot + bar * g;
      os << "<rect x=\"" << num(x) << "\" y=\"" << num(top) << "\" width=\""
         << num(bar) << "\" height=\"" << num(bottom - top) << "\" fill=\""
         << kPalette[g % kPaletteSize] << "\"/>\n";
      os << "<text x=\"" << num(x + bar / 2) << "\" y=\""
         << num(v < floor ? bottom + 11 : top - 3)
         << "\" text-anchor=\"middle\" font-size=\"9\">" << tick_label(v)
         << "</text>\n";
    }
  }
  std::vector<std::string> labels;
  for (const auto& g : groups) labels.push_back(g.label);
  legend(os, f, labels);
  os << "</svg>\n";
  return os.str();
}

std::string scatter_box(const std::string& title, const std::string& xlabel,
                        const std::string& ylabel,
                        const std::vector<Series>& points,
                        const std::optional<BoxSummary>& box) {
  const int width = 640, height = 380, box_band = 60;
  std::ostringstream os;
  header(os, width, height);
  Frame f{kMarginLeft, kMarginTop, width - kMarginLeft - kMarginRight,
          height - kMarginTop - kMarginBottom - box_band, {}, {}};
  for (const auto& s : points) {
    for (double v : s.x) f.xr.add(v);
    for (double v : s.y) f.yr.add(v);
  }
  if (box) {
    f.xr.add(box->whisker_lo);
    f.xr.add(box->whisker_hi);
  }
  f.xr.settle();
  f.yr.settle();
  axes(os, f, title, "", ylabel);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < points.size(); ++i) {
    Series s = points[i];
    s.markers = true;
    draw_series(os, f, s, kPalette[i % kPaletteSize]);
    labels.push_back(s.label);
  }
  legend(os, f, labels);

  const double band_top = f.y0 + f.h + 22;
  const double mid = band_top + box_band / 2.0 - 6;
  if (box) {
    const double a = f.px(box->q1), b = f.px(box->q3);
    os << "<line x1=\"" << num(f.px(box->whisker_lo)) << "\" x2=\""
       << num(f.px(box->whisker_hi)) << "\" y1=\"" << num(mid) << "\" y2=\""
       << num(mid) << "\" stroke=\"#444\"/>\n"
       << "<rect x=\"" << num(a) << "\" y=\"" << num(mid - 10) << "\" width=\""
       << num(std::max(b - a, 1.0)) << "\" height=\"20\" fill=\"#eee\" "
       << "stroke=\"#444\"/>\n"
       << "<line x1=\"" << num(f.px(box->median)) << "\" x2=\""
       << num(f.px(box->median)) << "\" y1=\"" << num(mid - 10) << "\" y2=\""
       << num(mid + 10) << "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
  }
  os << "<text x=\"" << num(f.x0 + f.w / 2) << "\" y=\""
     << num(band_top + box_band + 4) << "\" text-anchor=\"middle\">"
     << escape(xlabel) << "</text>\n</svg>\n";
  return os.str();
}

}  // namespace lqsid::svg
