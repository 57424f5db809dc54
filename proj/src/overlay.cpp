#include "glasslabel/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

namespace glasslabel {

namespace {

void put(ColorImage& img, int u, int v, const std::array<std::uint8_t, 3>& c) {
  if (u < 0 || v < 0 || u >= img.width || v >= img.height) return;
  std::memcpy(img.at(u, v), c.data(), 3);
}

}  // namespace

std::array<std::uint8_t, 3> class_color(int class_id) {
  static const std::array<std::uint8_t, 3> palette[] = {
      {230, 25, 75}, {60, 180, 75}, {255, 225, 25}, {0, 130, 200},
      {245, 130, 48}, {145, 30, 180}, {70, 240, 240}, {240, 50, 230},
  };
  return palette[static_cast<std::size_t>(std::abs(class_id)) % std::size(palette)];
}

ColorImage render_overlay(const ColorImage& image, const std::vector<Annotation>& annotations,
                          const std::vector<GlassClassSpec>& classes, const Heatmap* heatmap,
                          const OverlayOptions& options) {
  ColorImage out = image;

  if (heatmap && heatmap->width == image.width && heatmap->height == image.height) {
    const double peak = heatmap->max();
    if (peak > 0.0) {
      for (int v = 0; v < out.height; ++v)
        for (int u = 0; u < out.width; ++u) {
          const double alpha = options.heatmap_alpha * std::max(0.0, heatmap->at(u, v)) / peak;
          if (alpha <= 0.0) continue;
          std::uint8_t* px = out.at(u, v);
          const double red[3] = {255.0, 0.0, 0.0};
          for (int c = 0; c < 3; ++c) px[c] = static_cast<std::uint8_t>(std::lround((1.0 - alpha) * px[c] + alpha * red[c]));
        }
    }
  }

  for (const auto& a : annotations) {
    const auto color = class_color(a.class_id);
    if (a.mask && a.mask->width == out.width && a.mask->height == out.height) {
      const Mask& m = *a.mask;
      for (int v = 0; v < m.height; ++v)
        for (int u = 0; u < m.width; ++u) {
          if (!m.get(u, v)) continue;
          const bool edge = u == 0 || v == 0 || u == m.width - 1 || v == m.height - 1 || !m.get(u - 1, v) ||
                            !m.get(u + 1, v) || !m.get(u, v - 1) || !m.get(u, v + 1);
          if (edge) put(out, u, v, color);
        }
    }
    const int x0 = static_cast<int>(std::lround(a.bbox.x));
    const int y0 = static_cast<int>(std::lround(a.bbox.y));
    const int x1 = x0 + static_cast<int>(std::lround(a.bbox.w)) - 1;
    const int y1 = y0 + static_cast<int>(std::lround(a.bbox.h)) - 1;
    if (x1 < x0 || y1 < y0) continue;
    for (int u = x0; u <= x1; ++u) {
      put(out, u, y0, color);
      put(out, u, y1, color);
    }
    for (int v = y0; v <= y1; ++v) {
      put(out, x0, v, color);
      put(out, x1, v, color);
    }
    if (options.draw_labels) {
      std::string name = a.class_id == kKeypointCategoryId ? kKeypointCategoryName : std::to_string(a.class_id);
      if (const GlassClassSpec* cls = find_class(classes, a.class_id)) name = cls->name;
      cv::Mat view(out.height, out.width, CV_8UC3, out.rgb.data());
      cv::putText(view, name, cv::Point(x0, std::max(10, y0 - 3)), cv::FONT_HERSHEY_SIMPLEX, 0.4,
                  cv::Scalar(color[0], color[1], color[2]), 1, cv::LINE_8);
    }
  }
  return out;
}

}  // namespace glasslabel
