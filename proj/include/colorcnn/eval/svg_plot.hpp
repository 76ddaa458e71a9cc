#pragma once

#include <string>
#include <utility>
#include <vector>

namespace colorcnn::eval {

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y), plotted in order
  bool dashed = false;
};

struct LinePlot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<PlotSeries> series;
};

std::string render_svg(const LinePlot& plot);
void write_svg(const LinePlot& plot, const std::string& path);

}  // namespace colorcnn::eval
