#include "colorcnn/eval/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "colorcnn/core/check.hpp"

namespace colorcnn::eval {
namespace {

constexpr int kWidth = 860;
constexpr int kHeight = 540;
constexpr int kLeft = 70, kRight = 30, kTop = 46, kBottom = 56;

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                               "#9467bd", "#8c564b", "#7f7f7f"};

struct Range {
  double lo = 0, hi = 1;
};

Range data_range(const LinePlot& plot, bool y_axis) {
  double lo = 0, hi = 0;
  bool seen = false;
  for (const auto& s : plot.series) {
    for (const auto& p : s.points) {
      double v = y_axis ? p.second : p.first;
      if (!std::isfinite(v)) continue;
      if (!seen) {
        lo = hi = v;
        seen = true;
      } else {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!seen) return {0, 1};
  if (hi - lo < 1e-12) {
    double pad = std::max(1.0, std::abs(hi)) * 0.1;
    return {lo - pad, hi + pad};
  }
  double pad = (hi - lo) * 0.06;
  return {lo - pad, hi + pad};
}

// largest of 1/2/5 * 10^k giving at most ~6 ticks
double tick_step(const Range& r) {
  double span = r.hi - r.lo;
  double raw = span / 5.0;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double mult : {1.0, 2.0, 5.0, 10.0}) {
    if (mag * mult >= raw) return mag * mult;
  }
  return mag * 10.0;
}

std::string fmt_num(double v) {
  char buf[48];
  if (v != 0 && (std::abs(v) >= 1e5 || std::abs(v) < 1e-3))
    std::snprintf(buf, sizeof buf, "%.2g", v);
  else
    std::snprintf(buf, sizeof buf, "%g", std::round(v * 1e6) / 1e6);
  return buf;
}

std::string escape_xml(const std::string& s) {
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

}  // namespace

std::string render_svg(const LinePlot& plot) {
  Range rx = data_range(plot, false);
  Range ry = data_range(plot, true);
  const double px0 = kLeft, px1 = kWidth - kRight;
  const double py0 = kHeight - kBottom, py1 = kTop;
  auto sx = [&](double x) { return px0 + (x - rx.lo) / (rx.hi - rx.lo) * (px1 - px0); };
  auto sy = [&](double y) { return py0 + (y - ry.lo) / (ry.hi - ry.lo) * (py1 - py0); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
      << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"26\" font-size=\"17\" "
         "font-family=\"sans-serif\" text-anchor=\"middle\">"
      << escape_xml(plot.title) << "</text>\n";

  // gridlines and tick labels
  double stepx = tick_step(rx), stepy = tick_step(ry);
  out << "<g font-size=\"12\" font-family=\"sans-serif\" fill=\"#333\">\n";
  for (double t = std::ceil(rx.lo / stepx) * stepx; t <= rx.hi + 1e-9 * stepx;
       t += stepx) {
    double x = sx(t);
    out << "<line x1=\"" << x << "\" y1=\"" << py0 << "\" x2=\"" << x
        << "\" y2=\"" << py1 << "\" stroke=\"#e0e0e0\"/>\n";
    out << "<text x=\"" << x << "\" y=\"" << py0 + 18
        << "\" text-anchor=\"middle\">" << fmt_num(t) << "</text>\n";
  }
  for (double t = std::ceil(ry.lo / stepy) * stepy; t <= ry.hi + 1e-9 * stepy;
       t += stepy) {
    double y = sy(t);
    out << "<line x1=\"" << px0 << "\" y1=\"" << y << "\" x2=\"" << px1
        << "\" y2=\"" << y << "\" stroke=\"#e0e0e0\"/>\n";
    out << "<text x=\"" << px0 - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\">" << fmt_num(t) << "</text>\n";
  }
  out << "</g>\n";

  // axes
  out << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px1
      << "\" y2=\"" << py0 << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px0
      << "\" y2=\"" << py1 << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << (px0 + px1) / 2 << "\" y=\"" << kHeight - 14
      << "\" font-size=\"14\" font-family=\"sans-serif\" text-anchor=\"middle\">"
      << escape_xml(plot.xlabel) << "</text>\n";
  out << "<text x=\"20\" y=\"" << (py0 + py1) / 2
      << "\" font-size=\"14\" font-family=\"sans-serif\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 20 "
      << (py0 + py1) / 2 << ")\">" << escape_xml(plot.ylabel) << "</text>\n";

  // series
  for (size_t si = 0; si < plot.series.size(); ++si) {
    const auto& s = plot.series[si];
    const char* color =
        kSeriesColors[si % (sizeof kSeriesColors / sizeof *kSeriesColors)];
    if (s.points.size() > 1) {
      out << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"2\"";
      if (s.dashed) out << " stroke-dasharray=\"7 5\"";
      out << " points=\"";
      for (const auto& p : s.points) out << sx(p.first) << ',' << sy(p.second) << ' ';
      out << "\"/>\n";
    }
    for (const auto& p : s.points)
      out << "<circle cx=\"" << sx(p.first) << "\" cy=\"" << sy(p.second)
          << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
  }

  // legend, top-right inside the frame
  double lx = px1 - 190, ly = py1 + 12;
  out << "<g font-size=\"13\" font-family=\"sans-serif\">\n";
  for (size_t si = 0; si < plot.series.size(); ++si) {
    const auto& s = plot.series[si];
    const char* color =
        kSeriesColors[si % (sizeof kSeriesColors / sizeof *kSeriesColors)];
    double y = ly + 19 * double(si);
    out << "<line x1=\"" << lx << "\" y1=\"" << y << "\" x2=\"" << lx + 26
        << "\" y2=\"" << y << "\" stroke=\"" << color << "\" stroke-width=\"2\"";
    if (s.dashed) out << " stroke-dasharray=\"7 5\"";
    out << "/>\n";
    out << "<text x=\"" << lx + 33 << "\" y=\"" << y + 4 << "\">"
        << escape_xml(s.name) << "</text>\n";
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

void write_svg(const LinePlot& plot, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  COLORCNN_CHECK(f.good(), "cannot open " << path << " for writing");
  f << render_svg(plot);
  COLORCNN_CHECK(f.good(), "write failed: " << path);
}

}  // namespace colorcnn::eval
