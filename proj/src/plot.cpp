#include "mitd/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mitd/errors.hpp"

namespace mitd {

namespace {

constexpr double kLeft = 90, kRight = 30, kTop = 30, kBottom = 70;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Axis {
  double lo, hi, pixel_lo, pixel_hi;
  double map(double v) const { return pixel_lo + (v - lo) / (hi - lo) * (pixel_hi - pixel_lo); }
};

Axis padded(double lo, double hi, double pixel_lo, double pixel_hi) {
  if (hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return Axis{lo - pad, hi + pad, pixel_lo, pixel_hi};
}

}  // namespace

std::string render_curve_svg(std::span<const CurvePoint> curve) {
  if (curve.size() < 2) throw DataError("a curve plot needs at least two points");
  std::vector<CurvePoint> points(curve.begin(), curve.end());
  std::sort(points.begin(), points.end(),
            [](const CurvePoint& a, const CurvePoint& b) { return a.train_size < b.train_size; });
  const bool log_x = points.front().train_size > 0;
  auto x_of = [&](const CurvePoint& p) {
    const double s = static_cast<double>(p.train_size);
    return log_x ? std::log10(s) : s;
  };
  double y_lo = points.front().mean_empty_log_prob, y_hi = y_lo;
  for (const auto& p : points) {
    if (!std::isfinite(p.mean_empty_log_prob)) {
      throw DataError("curve point at size " + std::to_string(p.train_size) + " is not finite");
    }
    y_lo = std::min(y_lo, p.mean_empty_log_prob);
    y_hi = std::max(y_hi, p.mean_empty_log_prob);
  }
  const Axis xa = padded(x_of(points.front()), x_of(points.back()), kLeft, kPlotWidth - kRight);
  const Axis ya = padded(y_lo, y_hi, kPlotHeight - kBottom, kTop);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kPlotWidth << "\" height=\""
      << kPlotHeight << "\" viewBox=\"0 0 " << kPlotWidth << ' ' << kPlotHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const std::string x0 = num(kLeft), x1 = num(kPlotWidth - kRight);
  const std::string y0 = num(kPlotHeight - kBottom), y1 = num(kTop);
  svg << "<path d=\"M" << x0 << ' ' << y0 << " H" << x1 << "\" stroke=\"black\" fill=\"none\"/>\n";
  svg << "<path d=\"M" << x0 << ' ' << y0 << " V" << y1 << "\" stroke=\"black\" fill=\"none\"/>\n";

  for (const auto& p : points) {
    svg << "<text x=\"" << num(xa.map(x_of(p))) << "\" y=\"" << num(kPlotHeight - kBottom + 20)
        << "\" font-size=\"12\" text-anchor=\"middle\">" << p.train_size << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double v = y_lo + (y_hi - y_lo) * i / 4.0;
    svg << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(ya.map(v) + 4)
        << "\" font-size=\"12\" text-anchor=\"end\">" << label(v) << "</text>\n";
  }
  svg << "<text x=\"" << num((kLeft + kPlotWidth - kRight) / 2) << "\" y=\""
      << num(kPlotHeight - 20) << "\" font-size=\"14\" text-anchor=\"middle\">train size"
      << (log_x ? " (log scale)" : "") << "</text>\n";
  svg << "<text x=\"20\" y=\"" << num((kTop + kPlotHeight - kBottom) / 2)
      << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
      << num((kTop + kPlotHeight - kBottom) / 2)
      << ")\">mean empty-string log-prob</text>\n";

  svg << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < points.size(); ++i) {
    svg << (i ? " " : "") << num(xa.map(x_of(points[i]))) << ','
        << num(ya.map(points[i].mean_empty_log_prob));
  }
  svg << "\"/>\n";
  for (const auto& p : points) {
    svg << "<circle cx=\"" << num(xa.map(x_of(p))) << "\" cy=\""
        << num(ya.map(p.mean_empty_log_prob)) << "\" r=\"5\" fill=\"steelblue\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace mitd
