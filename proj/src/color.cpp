#include "glasslabel/color.hpp"

#include <cmath>

#include "glasslabel/errors.hpp"

namespace glasslabel {

namespace {

double srgb_to_linear(std::uint8_t c) {
  const double v = c / 255.0;
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

// IEC 61966-2-1 sRGB primaries, D65.
constexpr double kM[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                             {0.2126729, 0.7151522, 0.0721750},
                             {0.0193339, 0.1191920, 0.9503041}};

// Reference white = XYZ of linear (1, 1, 1), so neutral grays map to a* = b* = 0.
constexpr double kWhite[3] = {kM[0][0] + kM[0][1] + kM[0][2], kM[1][0] + kM[1][1] + kM[1][2],
                              kM[2][0] + kM[2][1] + kM[2][2]};

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace

Lab srgb_to_cielab(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double rgb[3] = {srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b)};
  double xyz[3];
  for (int i = 0; i < 3; ++i) xyz[i] = kM[i][0] * rgb[0] + kM[i][1] * rgb[1] + kM[i][2] * rgb[2];
  const double fx = lab_f(xyz[0] / kWhite[0]);
  const double fy = lab_f(xyz[1] / kWhite[1]);
  const double fz = lab_f(xyz[2] / kWhite[2]);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

void ColorGate::validate() const {
  for (const Interval* iv : {&L, &a, &b})
    if (!(iv->lo <= iv->hi)) throw InvalidInput("color gate interval is empty");
  if (!(min_fraction > 0.0 && min_fraction <= 1.0)) throw InvalidInput("color gate min_fraction must be in (0, 1]");
}

bool verify_color(const ColorImage& image, const std::vector<Vec2>& footprint, const ColorGate& gate) {
  if (footprint.empty()) throw InvalidInput("color verification needs a non-empty footprint");
  gate.validate();
  std::size_t passing = 0;
  for (const auto& p : footprint) {
    const long u = std::lround(p.x());
    const long v = std::lround(p.y());
    if (u < 0 || v < 0 || u >= image.width || v >= image.height) continue;
    const std::uint8_t* px = image.at(static_cast<int>(u), static_cast<int>(v));
    if (gate.accepts(srgb_to_cielab(px[0], px[1], px[2]))) ++passing;
  }
  const double required = gate.min_fraction * static_cast<double>(footprint.size());
  return static_cast<double>(passing) >= required - 1e-9;
}

}  // namespace glasslabel
