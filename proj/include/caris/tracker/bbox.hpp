#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace caris::tracker {

/// Axis-aligned box in pixels, center + extent.
struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  static BBox from_corners(double x0, double y0, double x1, double y1) {
    return {(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
  }
  double left() const { return cx - w / 2; }
  double right() const { return cx + w / 2; }
  double top() const { return cy - h / 2; }
  double bottom() const { return cy + h / 2; }
  double area() const { return w * h; }

  /// Kalman measurement (cx, cy, aspect = w/h, h).
  Eigen::Vector4d to_xyah() const { return {cx, cy, w / h, h}; }
  static BBox from_xyah(const Eigen::Ref<const Eigen::Vector4d>& m) { return {m(0), m(1), m(2) * m(3), m(3)}; }

  bool operator==(const BBox&) const = default;
};

inline double iou(const BBox& a, const BBox& b) {
  const double iw = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.left(), b.left()));
  const double ih = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top()));
  const double inter = iw * ih;
  if (inter <= 0.0) return 0.0;
  if (a == b) return 1.0;
  // Rounding must not let distinct boxes reach exactly 1.
  return std::min(std::nextafter(1.0, 0.0), inter / (a.area() + b.area() - inter));
}

}  // namespace caris::tracker
