#include "conveyor/plot.hpp"

#include "conveyor/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace conveyor {

namespace {

constexpr double width = 720.0;
constexpr double height = 480.0;
constexpr double left = 80.0;
constexpr double right = 690.0;
constexpr double top = 50.0;
constexpr double bottom = 420.0;

char const *const palette[] = {"#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d35400", "#555555"};

std::string fmt(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string full(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string label(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", std::abs(v) < 1e-300 ? 0.0 : v);
  return buf;
}

std::string escape(std::string const &s)
{
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

// Round tick spacing covering [lo, hi] with about five intervals.
double tick_step(double lo, double hi)
{
  double const raw = (hi - lo) / 5.0;
  double const mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) { return m * mag; }
  }
  return 10.0 * mag;
}

} // namespace

std::string render_svg(PlotSpec const &spec)
{
  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -x0;
  double y0 = x0;
  double y1 = -x0;
  auto extend = [&](double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) { return; }
    x0 = std::min(x0, x * spec.x_scale);
    x1 = std::max(x1, x * spec.x_scale);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  };
  for (auto const &s : spec.series) {
    if (s.x.size() != s.y.size() || (!s.err.empty() && s.err.size() != s.y.size())) {
      throw ConfigError("plot series '" + s.label + "' has mismatched lengths");
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double const e = s.err.empty() ? 0.0 : s.err[i];
      extend(s.x[i], s.y[i] - e);
      extend(s.x[i], s.y[i] + e);
    }
  }
  for (auto const &c : spec.curves) {
    if (c.x.size() != c.y.size()) { throw ConfigError("plot curve '" + c.label + "' has mismatched lengths"); }
    for (std::size_t i = 0; i < c.x.size(); ++i) { extend(c.x[i], c.y[i]); }
  }
  if (!(x1 >= x0)) { throw ConfigError("nothing to plot"); }
  if (x1 == x0) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  double const pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  auto px = [&](double x) { return left + (x * spec.x_scale - x0) / (x1 - x0) * (right - left); };
  auto py = [&](double y) { return bottom - (y - y0) / (y1 - y0) * (bottom - top); };

  std::ostringstream out;
  out << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << width << R"(" height=")" << height
      << R"(" font-family="sans-serif" font-size="13")"
      << " data-x-min=\"" << full(x0) << "\" data-x-max=\"" << full(x1) << "\" data-y-min=\"" << full(y0)
      << "\" data-y-max=\"" << full(y1) << "\" data-x-scale=\"" << full(spec.x_scale) << "\" data-left=\"" << left
      << "\" data-right=\"" << right << "\" data-top=\"" << top << "\" data-bottom=\"" << bottom << "\">\n";
  out << R"(<rect width="100%" height="100%" fill="white"/>)" << '\n';
  out << "<text x=\"" << width / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"15\">" << escape(spec.title)
      << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << right - left << "\" height=\"" << bottom - top
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  double const xs = tick_step(x0, x1);
  for (double k = std::ceil(x0 / xs - 1e-9); k * xs <= x1 + 1e-9 * xs; k += 1.0) {
    double const p = left + (k * xs - x0) / (x1 - x0) * (right - left);
    out << "<line x1=\"" << fmt(p) << "\" y1=\"" << bottom << "\" x2=\"" << fmt(p) << "\" y2=\"" << bottom + 5
        << "\" stroke=\"black\"/><text x=\"" << fmt(p) << "\" y=\"" << bottom + 20 << "\" text-anchor=\"middle\">"
        << label(k * xs) << "</text>\n";
  }
  double const ys = tick_step(y0, y1);
  for (double k = std::ceil(y0 / ys - 1e-9); k * ys <= y1 + 1e-9 * ys; k += 1.0) {
    double const p = py(k * ys);
    out << "<line x1=\"" << left - 5 << "\" y1=\"" << fmt(p) << "\" x2=\"" << left << "\" y2=\"" << fmt(p)
        << "\" stroke=\"black\"/><text x=\"" << left - 8 << "\" y=\"" << fmt(p + 4) << "\" text-anchor=\"end\">"
        << label(k * ys) << "</text>\n";
  }
  out << "<text x=\"" << (left + right) / 2 << "\" y=\"" << height - 15 << "\" text-anchor=\"middle\">"
      << escape(spec.x_label) << "</text>\n";
  out << "<text transform=\"translate(22," << (top + bottom) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(spec.y_label) << "</text>\n";

  std::size_t colour = 0;
  double legend_y = top + 18;
  auto legend = [&](std::string const &label, char const *c, bool line) {
    if (label.empty()) { return; }
    if (line) {
      out << "<line x1=\"" << right - 150 << "\" y1=\"" << fmt(legend_y - 4) << "\" x2=\"" << right - 130 << "\" y2=\""
          << fmt(legend_y - 4) << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>";
    } else {
      out << "<circle cx=\"" << right - 140 << "\" cy=\"" << fmt(legend_y - 4) << "\" r=\"3.5\" fill=\"" << c << "\"/>";
    }
    out << "<text x=\"" << right - 122 << "\" y=\"" << fmt(legend_y) << "\">" << escape(label) << "</text>\n";
    legend_y += 18;
  };

  for (auto const &c : spec.curves) {
    char const *col = palette[colour++ % std::size(palette)];
    out << "<polyline class=\"curve\" data-label=\"" << escape(c.label) << "\" fill=\"none\" stroke=\"" << col
        << "\" stroke-width=\"1.6\"" << (c.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (!std::isfinite(c.y[i])) { continue; }
      out << fmt(px(c.x[i])) << ',' << fmt(py(c.y[i])) << ' ';
    }
    out << "\"/>\n";
    legend(c.label, col, true);
  }
  for (auto const &s : spec.series) {
    char const *col = palette[colour++ % std::size(palette)];
    out << "<g class=\"series\" data-label=\"" << escape(s.label) << "\" fill=\"" << col << "\" stroke=\"" << col
        << "\">\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) { continue; }
      double const x = px(s.x[i]);
      if (!s.err.empty() && s.err[i] > 0.0) {
        out << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(py(s.y[i] - s.err[i])) << "\" x2=\"" << fmt(x)
            << "\" y2=\"" << fmt(py(s.y[i] + s.err[i])) << "\"/>";
      }
      out << "<circle class=\"point\" cx=\"" << fmt(x) << "\" cy=\"" << fmt(py(s.y[i])) << "\" r=\"3\" data-x=\""
          << full(s.x[i]) << "\" data-y=\"" << full(s.y[i]) << "\"/>\n";
    }
    out << "</g>\n";
    legend(s.label, col, false);
  }
  out << "</svg>\n";
  return out.str();
}

} // namespace conveyor
