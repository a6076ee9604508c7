#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "skvg/error.hpp"

namespace skvg {

/// Axis-aligned box, corner convention, absolute pixels.
/// Invariant: x2 > x1 and y2 > y1 (strictly positive area), all finite.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  bool operator==(const Box&) const = default;
};

/// Center-size view of a box: (cx, cy, w, h).
struct CenterSizeBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool operator==(const CenterSizeBox&) const = default;
};

/// Validates the Box invariants; throws GeometryError on violation.
void check_box(const Box& b);
void check_box(const CenterSizeBox& b);

/// Constructs a validated box.
Box make_box(double x1, double y1, double x2, double y2);

CenterSizeBox to_center_size(const Box& b);
Box to_corners(const CenterSizeBox& b);

/// Maps a pixel box into [0,1]^4 center-size form for the given image size.
CenterSizeBox normalize_box(const Box& b, double image_w, double image_h);
Box denormalize_box(const CenterSizeBox& b, double image_w, double image_h);

/// Intersection over union in [0, 1]. Symmetric; 1 iff identical;
/// 0 iff interiors are disjoint. Degenerate input throws.
double iou(const Box& a, const Box& b);

/// Generalized IoU in (-1, 1]: iou - (area(enclosing) - area(union)) /
/// area(enclosing). Degenerate input throws.
double giou(const Box& a, const Box& b);

/// Smooth L1 (Huber-style): per element 0.5*x^2/beta for |x| < beta,
/// |x| - 0.5*beta otherwise; averaged over elements.
double smooth_l1(std::span<const double> pred, std::span<const double> target,
                 double beta = 1.0);

/// Box regression loss on normalized center-size boxes:
/// smooth_l1 over the 4-vectors plus (1 - giou). Zero iff pred == gt.
double grounding_loss(const CenterSizeBox& pred, const CenterSizeBox& gt,
                      double beta = 1.0);

enum class AreaBin { Small, Medium, Large };

/// Size class with closed-open boundaries at 64*64 and 128*128 pixels:
/// [0, 4096) -> Small, [4096, 16384) -> Medium, [16384, inf) -> Large.
AreaBin area_bin(const Box& b);

const char* area_bin_name(AreaBin bin);

}  // namespace skvg
