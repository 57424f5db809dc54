#pragma once

#include <cstdint>
#include <vector>

#include "glasslabel/geometry.hpp"

namespace glasslabel {

// 8-bit RGB image, row-major, 3 bytes per pixel.
struct ColorImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  ColorImage() = default;
  ColorImage(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  const std::uint8_t* at(int u, int v) const { return &rgb[(static_cast<std::size_t>(v) * width + u) * 3]; }
  std::uint8_t* at(int u, int v) { return &rgb[(static_cast<std::size_t>(v) * width + u) * 3]; }
};

// Axis-aligned box in pixels: (x, y) is the top-left covered pixel, w/h count
// covered columns/rows.
struct Bbox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  bool operator==(const Bbox&) const = default;
};

double iou(const Bbox& a, const Bbox& b);

// Column-major run lengths as used by COCO "uncompressed RLE": the first run
// counts zeros (possibly 0), then runs alternate.
struct RunLength {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> counts;
};

struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // row-major, 0/1

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool get(int u, int v) const { return bits[static_cast<std::size_t>(v) * width + u] != 0; }
  void set(int u, int v, bool on = true) { bits[static_cast<std::size_t>(v) * width + u] = on ? 1 : 0; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
};

RunLength encode_rle(const Mask& mask);
// Throws InvalidInput when the counts do not cover exactly width*height.
Mask decode_rle(const RunLength& rle);

// Tight bounds of the set pixels. Throws InvalidInput on an empty mask.
Bbox mask_to_bbox(const Mask& mask);

// Pixels whose centers lie inside the convex hull of `points` (boundary
// inclusive), plus the nearest pixel of every hull vertex so each prompt
// point lands in the mask. A single point or a collinear set rasterizes to
// the covered pixels along it.
Mask fill_convex_hull(const std::vector<Vec2>& points, int width, int height);

// Andrew's monotone chain; counter-clockwise, no repeated end point.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

}  // namespace glasslabel
