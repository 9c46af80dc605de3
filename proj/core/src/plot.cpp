#include "vinestress/plot.hpp"

#include "vinestress/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace vinestress {

namespace {

std::string escape(const std::string& s)
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

// Fixed formatting keeps the output byte-identical across platforms.
std::string fmt(double v, int digits = 2)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string tick(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;

  void include(double v)
  {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad()
  {
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
  }
};

constexpr std::array<const char*, 6> kColors{"#d62728", "#1f77b4", "#2ca02c",
                                             "#9467bd", "#ff7f0e", "#8c564b"};

} // namespace

std::string scatter_svg(const ScatterPlotSpec& s)
{
  const auto n = s.losses.size();
  const auto d = s.factors.cols();
  if (s.factors.rows() != n || n == 0 || d == 0)
    throw InputError("plot needs a non-empty factor matrix with one row per loss");
  if (s.columns < 1 || s.panel_width < 80 || s.panel_height < 80)
    throw InputError("plot layout is too small");
  for (const auto& m : s.markers)
    if (m.point.size() != d)
      throw InputError("scenario '" + m.label + "' has " + std::to_string(m.point.size()) +
                       " coordinates, data has " + std::to_string(d));

  const int cols = static_cast<int>(std::min<Eigen::Index>(s.columns, d));
  const int rows = static_cast<int>((d + cols - 1) / cols);
  const int legend = s.markers.empty() ? 0 : 20 + 16 * static_cast<int>(s.markers.size());
  const int width = cols * s.panel_width;
  const int height = rows * s.panel_height + legend;

  Range yr{s.losses.minCoeff(), s.losses.maxCoeff()};
  if (s.threshold)
    yr.include(*s.threshold);
  yr.pad();

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\" font-family=\"sans-serif\" font-size=\"10\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  const double ml = 48, mr = 10, mt = 20, mb = 30;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double ox = static_cast<double>(j % cols) * s.panel_width;
    const double oy = static_cast<double>(j / cols) * s.panel_height;
    const double pw = s.panel_width - ml - mr;
    const double ph = s.panel_height - mt - mb;
    Range xr{s.factors.col(j).minCoeff(), s.factors.col(j).maxCoeff()};
    for (const auto& m : s.markers)
      if (std::isfinite(m.point(j)))
        xr.include(m.point(j));
    xr.pad();
    const auto px = [&](double x) { return ox + ml + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    const auto py = [&](double y) { return oy + mt + (yr.hi - y) / (yr.hi - yr.lo) * ph; };
    const std::string name =
        static_cast<std::size_t>(j) < s.names.size() ? s.names[static_cast<std::size_t>(j)]
                                                     : "x" + std::to_string(j + 1);

    os << "<g>\n<text x=\"" << fmt(ox + ml + pw / 2) << "\" y=\"" << fmt(oy + 13)
       << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(name) << "</text>\n"
       << "<rect x=\"" << fmt(ox + ml) << "\" y=\"" << fmt(oy + mt) << "\" width=\"" << fmt(pw)
       << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double xv = xr.lo + (xr.hi - xr.lo) * t / 4.0;
      const double yv = yr.lo + (yr.hi - yr.lo) * t / 4.0;
      os << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << fmt(oy + mt + ph + 12)
         << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n"
         << "<text x=\"" << fmt(ox + ml - 3) << "\" y=\"" << fmt(py(yv) + 3)
         << "\" text-anchor=\"end\">" << tick(yv) << "</text>\n";
    }
    os << "<text x=\"" << fmt(ox + 10) << "\" y=\"" << fmt(oy + mt + ph / 2)
       << "\" transform=\"rotate(-90 " << fmt(ox + 10) << " " << fmt(oy + mt + ph / 2)
       << ")\" text-anchor=\"middle\">loss</text>\n";
    os << "<g fill=\"#555\" fill-opacity=\"0.35\">\n";
    for (Eigen::Index i = 0; i < n; ++i)
      os << "<circle cx=\"" << fmt(px(s.factors(i, j))) << "\" cy=\"" << fmt(py(s.losses(i)))
         << "\" r=\"1.5\"/>\n";
    os << "</g>\n";
    if (s.threshold)
      os << "<line class=\"threshold\" x1=\"" << fmt(ox + ml) << "\" x2=\"" << fmt(ox + ml + pw)
         << "\" y1=\"" << fmt(py(*s.threshold)) << "\" y2=\"" << fmt(py(*s.threshold))
         << "\" stroke=\"#000\" stroke-dasharray=\"4 3\"/>\n";
    const double my = s.threshold ? *s.threshold : yr.hi;
    for (std::size_t k = 0; k < s.markers.size(); ++k) {
      const double x = s.markers[k].point(j);
      if (!std::isfinite(x))
        continue;
      os << "<rect class=\"scenario\" x=\"" << fmt(px(x) - 4) << "\" y=\"" << fmt(py(my) - 4)
         << "\" width=\"8\" height=\"8\" fill=\"" << kColors[k % kColors.size()]
         << "\" stroke=\"#000\"><title>" << escape(s.markers[k].label) << "</title></rect>\n";
    }
    os << "</g>\n";
  }
  for (std::size_t k = 0; k < s.markers.size(); ++k) {
    const double y = rows * s.panel_height + 16.0 * static_cast<double>(k + 1);
    os << "<rect x=\"10\" y=\"" << fmt(y - 8) << "\" width=\"8\" height=\"8\" fill=\""
       << kColors[k % kColors.size()] << "\" stroke=\"#000\"/>\n"
       << "<text x=\"24\" y=\"" << fmt(y) << "\">" << escape(s.markers[k].label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

} // namespace vinestress
