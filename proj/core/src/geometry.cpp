#include "skvg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace skvg {

namespace {

bool all_finite(const Box& b) {
  return std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) &&
         std::isfinite(b.y2);
}

std::string box_str(const Box& b) {
  return "(" + std::to_string(b.x1) + "," + std::to_string(b.y1) + "," +
         std::to_string(b.x2) + "," + std::to_string(b.y2) + ")";
}

}  // namespace

void check_box(const Box& b) {
  if (!all_finite(b)) {
    throw GeometryError("box has non-finite coordinates " + box_str(b));
  }
  if (!(b.x2 > b.x1) || !(b.y2 > b.y1)) {
    throw GeometryError("degenerate box " + box_str(b) +
                        ": requires x2 > x1 and y2 > y1");
  }
}

void check_box(const CenterSizeBox& b) {
  if (!std::isfinite(b.cx) || !std::isfinite(b.cy) || !std::isfinite(b.w) ||
      !std::isfinite(b.h)) {
    throw GeometryError("center-size box has non-finite fields");
  }
  if (!(b.w > 0.0) || !(b.h > 0.0)) {
    throw GeometryError("degenerate center-size box: width/height must be > 0");
  }
}

Box make_box(double x1, double y1, double x2, double y2) {
  Box b{x1, y1, x2, y2};
  check_box(b);
  return b;
}

CenterSizeBox to_center_size(const Box& b) {
  check_box(b);
  return {0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2), b.x2 - b.x1, b.y2 - b.y1};
}

Box to_corners(const CenterSizeBox& b) {
  check_box(b);
  return {b.cx - 0.5 * b.w, b.cy - 0.5 * b.h, b.cx + 0.5 * b.w,
          b.cy + 0.5 * b.h};
}

CenterSizeBox normalize_box(const Box& b, double image_w, double image_h) {
  check_box(b);
  if (!(image_w > 0.0) || !(image_h > 0.0)) {
    throw GeometryError("normalize_box: image size must be positive");
  }
  CenterSizeBox cs = to_center_size(b);
  return {cs.cx / image_w, cs.cy / image_h, cs.w / image_w, cs.h / image_h};
}

Box denormalize_box(const CenterSizeBox& b, double image_w, double image_h) {
  check_box(b);
  CenterSizeBox px{b.cx * image_w, b.cy * image_h, b.w * image_w,
                   b.h * image_h};
  return to_corners(px);
}

double iou(const Box& a, const Box& b) {
  check_box(a);
  check_box(b);
  const double iw =
      std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih =
      std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

double giou(const Box& a, const Box& b) {
  check_box(a);
  check_box(b);
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  const double cw = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
  const double ch = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
  const double enclose = cw * ch;
  return inter / uni - (enclose - uni) / enclose;
}

double smooth_l1(std::span<const double> pred, std::span<const double> target,
                 double beta) {
  if (pred.size() != target.size()) {
    throw GeometryError("smooth_l1: length mismatch");
  }
  if (pred.empty()) {
    throw GeometryError("smooth_l1: empty input");
  }
  if (!(beta > 0.0)) {
    throw GeometryError("smooth_l1: beta must be > 0");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double x = std::abs(pred[i] - target[i]);
    total += (x < beta) ? 0.5 * x * x / beta : x - 0.5 * beta;
  }
  return total / static_cast<double>(pred.size());
}

double grounding_loss(const CenterSizeBox& pred, const CenterSizeBox& gt,
                      double beta) {
  const std::array<double, 4> p{pred.cx, pred.cy, pred.w, pred.h};
  const std::array<double, 4> t{gt.cx, gt.cy, gt.w, gt.h};
  const double l1 = smooth_l1(p, t, beta);
  const double g = giou(to_corners(pred), to_corners(gt));
  return l1 + (1.0 - g);
}

AreaBin area_bin(const Box& b) {
  check_box(b);
  const double area = b.area();
  if (area < 64.0 * 64.0) return AreaBin::Small;
  if (area < 128.0 * 128.0) return AreaBin::Medium;
  return AreaBin::Large;
}

const char* area_bin_name(AreaBin bin) {
  switch (bin) {
    case AreaBin::Small: return "small";
    case AreaBin::Medium: return "medium";
    case AreaBin::Large: return "large";
  }
  return "?";
}

}  // namespace skvg
