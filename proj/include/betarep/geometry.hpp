#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "betarep/error.hpp"

namespace betarep {

/// Axis-aligned box in image pixels, [left, top, right, bottom].
struct BBox {
  double l = 0.0;
  double t = 0.0;
  double r = 0.0;
  double b = 0.0;

  double width() const noexcept { return r - l; }
  double height() const noexcept { return b - t; }
  double area() const noexcept { return width() * height(); }
  double cx() const noexcept { return 0.5 * (l + r); }
  double cy() const noexcept { return 0.5 * (t + b); }

  bool valid() const noexcept {
    return std::isfinite(l) && std::isfinite(t) && std::isfinite(r) && std::isfinite(b) && r > l &&
           b > t;
  }

  bool contains(const BBox& o) const noexcept {
    return o.l >= l && o.t >= t && o.r <= r && o.b <= b;
  }

  static BBox from_xywh(double x, double y, double w, double h) noexcept {
    return {x, y, x + w, y + h};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

inline std::string to_string(const BBox& box) {
  return "[" + std::to_string(box.l) + "," + std::to_string(box.t) + "," + std::to_string(box.r) +
         "," + std::to_string(box.b) + "]";
}

inline void require_valid(const BBox& box, const char* what) {
  if (!box.valid()) {
    throw InvalidGeometry(std::string(what) + " has non-positive extent: " + to_string(box));
  }
}

/// Intersection of two boxes; may be empty (r <= l or b <= t).
inline BBox intersect(const BBox& a, const BBox& b) noexcept {
  return {std::max(a.l, b.l), std::max(a.t, b.t), std::min(a.r, b.r), std::min(a.b, b.b)};
}

/// Smallest box enclosing both.
inline BBox enclose(const BBox& a, const BBox& b) noexcept {
  return {std::min(a.l, b.l), std::min(a.t, b.t), std::max(a.r, b.r), std::max(a.b, b.b)};
}

inline double intersection_area(const BBox& a, const BBox& b) noexcept {
  const double w = std::min(a.r, b.r) - std::max(a.l, b.l);
  const double h = std::min(a.b, b.b) - std::max(a.t, b.t);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

/// Intersection over union; 0 for disjoint or touching boxes.
inline double iou(const BBox& a, const BBox& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

/// True when the open interiors overlap (positive intersection area).
inline bool overlaps(const BBox& a, const BBox& b) noexcept {
  return a.l < b.r && b.l < a.r && a.t < b.b && b.t < a.b;
}

}  // namespace betarep
