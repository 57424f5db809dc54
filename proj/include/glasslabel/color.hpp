#pragma once

#include <cstdint>
#include <vector>

#include "glasslabel/image.hpp"

namespace glasslabel {

struct Lab {
  double L = 0.0;
  double a = 0.0;
  double b = 0.0;
};

// sRGB (8-bit, D65) -> CIE L*a*b*.
Lab srgb_to_cielab(std::uint8_t r, std::uint8_t g, std::uint8_t b);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

// Inclusive CIELAB box plus the fraction of samples that must land inside.
// Defaults accept the green of the 3D-printed caps.
struct ColorGate {
  Interval L{20.0, 95.0};
  Interval a{-128.0, -20.0};
  Interval b{5.0, 128.0};
  double min_fraction = 0.6;

  bool accepts(const Lab& lab) const { return L.contains(lab.L) && a.contains(lab.a) && b.contains(lab.b); }
  void validate() const;
};

// Fraction-of-footprint color test; pixel coordinates are rounded to the
// nearest pixel and samples outside the image count as failures.
bool verify_color(const ColorImage& image, const std::vector<Vec2>& footprint, const ColorGate& gate);

}  // namespace glasslabel
