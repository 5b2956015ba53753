#pragma once

#include <span>
#include <string>

#include "mitd/calibration.hpp"

namespace mitd {

inline constexpr int kPlotWidth = 800;
inline constexpr int kPlotHeight = 500;

// Train size (log scale) against mean empty-string log-prob. One circle per
// point, a connecting polyline, and two axis paths. Throws DataError for
// fewer than two points.
std::string render_curve_svg(std::span<const CurvePoint> curve);

}  // namespace mitd
