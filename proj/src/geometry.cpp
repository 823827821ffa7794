#include "kinetrack/geometry.hpp"

#include <algorithm>

namespace kinetrack {

BBox BBox::from_tlwh(double left, double top, double width, double height,
                     double image_width, double image_height) {
  return BBox{(left + 0.5 * width) / image_width, (top + 0.5 * height) / image_height,
              width / image_width, height / image_height};
}

BBox::Tlwh BBox::to_tlwh(double image_width, double image_height) const {
  const double width = w * image_width;
  const double height = h * image_height;
  return Tlwh{cx * image_width - 0.5 * width, cy * image_height - 0.5 * height, width, height};
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Offset4 encode_offset(const BBox& prev, const BBox& next) {
  return Offset4{next.cx - prev.cx, next.cy - prev.cy, next.w - prev.w, next.h - prev.h};
}

BBox decode_offset(const BBox& base, const Offset4& off, DecodeStats* stats, double min_dim) {
  BBox out{base.cx + off.d_cx, base.cy + off.d_cy, base.w + off.d_w, base.h + off.d_h};
  auto clamp_center = [&](double& v) {
    if (v < 0.0 || v > 1.0) {
      v = std::clamp(v, 0.0, 1.0);
      if (stats) ++stats->center_clamps;
    }
  };
  auto clamp_dim = [&](double& v) {
    if (!(v >= min_dim)) {
      v = min_dim;
      if (stats) ++stats->dim_clamps;
    }
  };
  clamp_center(out.cx);
  clamp_center(out.cy);
  clamp_dim(out.w);
  clamp_dim(out.h);
  return out;
}

}  // namespace kinetrack
