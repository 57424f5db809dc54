#pragma once

#include <string>

#include "glasslabel/basepoint.hpp"
#include "glasslabel/geometry.hpp"
#include "glasslabel/image.hpp"

namespace glasslabel {

struct PngHeader {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;  // PNG IHDR color type: 0 gray, 2 RGB, 6 RGBA, ...
};

// Reads only the signature and IHDR chunk. Throws ParseError.
PngHeader read_png_header(const std::string& path);

ColorImage read_color_png(const std::string& path);
void write_color_png(const ColorImage& image, const std::string& path);

// 16-bit single-channel PNG in millimeters.
DepthFrame read_depth_png(const std::string& path);
void write_depth_png(const DepthFrame& depth, const std::string& path);

// Heatmap scaled so its maximum maps to 255 (all-zero maps stay black).
void write_heatmap_png(const Heatmap& heatmap, const std::string& path);

}  // namespace glasslabel
