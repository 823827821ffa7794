#pragma once

#include <cstddef>

namespace kinetrack {

/// Axis-aligned box in normalized image coordinates (center form).
/// cx, w are fractions of the image width; cy, h of the image height.
struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double aspect() const { return w / h; }
  double left() const { return cx - 0.5 * w; }
  double top() const { return cy - 0.5 * h; }
  double right() const { return cx + 0.5 * w; }
  double bottom() const { return cy + 0.5 * h; }
  double area() const { return w * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }

  /// Builds a box from MOTChallenge pixel form (left, top, width, height).
  static BBox from_tlwh(double left, double top, double width, double height,
                        double image_width, double image_height);

  struct Tlwh {
    double left, top, width, height;
  };
  Tlwh to_tlwh(double image_width, double image_height) const;

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Componentwise delta between two boxes, in normalized units.
struct Offset4 {
  double d_cx = 0.0;
  double d_cy = 0.0;
  double d_w = 0.0;
  double d_h = 0.0;

  friend bool operator==(const Offset4&, const Offset4&) = default;
};

inline constexpr double kMinBoxDim = 1e-4;

double iou(const BBox& a, const BBox& b);

Offset4 encode_offset(const BBox& prev, const BBox& next);

/// Counts clamp events raised while decoding predicted offsets.
struct DecodeStats {
  std::size_t center_clamps = 0;
  std::size_t dim_clamps = 0;
};

/// base + off, with the center clamped into [0,1] and both dimensions
/// floored at min_dim. Never fails; clamps are reported through stats.
BBox decode_offset(const BBox& base, const Offset4& off, DecodeStats* stats = nullptr,
                   double min_dim = kMinBoxDim);

}  // namespace kinetrack
