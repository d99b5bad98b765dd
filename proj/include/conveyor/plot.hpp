#pragma once

#include <string>
#include <vector>

namespace conveyor {

struct PlotSeries
{
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err; // empty: no error bars
};

struct PlotCurve
{
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

// Values are given in data units; x_scale converts them for the axis labels
// (1e3 shows seconds as ms).
struct PlotSpec
{
  std::string title;
  std::string x_label;
  std::string y_label;
  double x_scale = 1.0;
  std::vector<PlotSeries> series;
  std::vector<PlotCurve> curves;
};

// Standalone SVG. The root element carries data-x-min/max, data-y-min/max
// (scaled data units) and data-left/right/top/bottom (pixels) so that
// coordinates can be mapped back to data.
std::string render_svg(PlotSpec const &spec);

} // namespace conveyor
