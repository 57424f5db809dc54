#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "glasslabel/basepoint.hpp"
#include "glasslabel/image.hpp"
#include "glasslabel/pipeline.hpp"

namespace glasslabel {

struct OverlayOptions {
  bool draw_labels = true;
  double heatmap_alpha = 0.6;  // opacity at the heatmap maximum
};

std::array<std::uint8_t, 3> class_color(int class_id);

// Boxes as one-pixel outlines along the covered border pixels, mask outlines,
// class names above the boxes and an optional heatmap blended in red with
// opacity proportional to the normalized value.
ColorImage render_overlay(const ColorImage& image, const std::vector<Annotation>& annotations,
                          const std::vector<GlassClassSpec>& classes, const Heatmap* heatmap = nullptr,
                          const OverlayOptions& options = {});

}  // namespace glasslabel
