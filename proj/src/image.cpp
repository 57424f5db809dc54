#include "glasslabel/image.hpp"

#include <algorithm>
#include <cmath>

#include "glasslabel/errors.hpp"

namespace glasslabel {

double iou(const Bbox& a, const Bbox& b) {
  const double x0 = std::max(a.x, b.x);
  const double y0 = std::max(a.y, b.y);
  const double x1 = std::min(a.x + a.w, b.x + b.w);
  const double y1 = std::min(a.y + a.h, b.y + b.h);
  if (x1 <= x0 || y1 <= y0) return 0.0;
  const double inter = (x1 - x0) * (y1 - y0);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

RunLength encode_rle(const Mask& mask) {
  RunLength rle{mask.width, mask.height, {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int u = 0; u < mask.width; ++u) {
    for (int v = 0; v < mask.height; ++v) {
      const std::uint8_t bit = mask.get(u, v) ? 1 : 0;
      if (bit != current) {
        rle.counts.push_back(run);
        run = 0;
        current = bit;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

Mask decode_rle(const RunLength& rle) {
  if (rle.width < 0 || rle.height < 0) throw InvalidInput("RLE size is negative");
  const std::uint64_t total = static_cast<std::uint64_t>(rle.width) * static_cast<std::uint64_t>(rle.height);
  std::uint64_t sum = 0;
  for (auto c : rle.counts) sum += c;
  if (sum != total)
    throw InvalidInput("RLE counts sum to " + std::to_string(sum) + " but mask has " + std::to_string(total) +
                       " pixels");
  Mask mask(rle.width, rle.height);
  std::uint64_t pos = 0;
  bool on = false;
  for (auto c : rle.counts) {
    for (std::uint32_t i = 0; i < c; ++i, ++pos) {
      if (on) {
        const auto u = static_cast<int>(pos / static_cast<std::uint64_t>(rle.height));
        const auto v = static_cast<int>(pos % static_cast<std::uint64_t>(rle.height));
        mask.set(u, v);
      }
    }
    on = !on;
  }
  return mask;
}

Bbox mask_to_bbox(const Mask& mask) {
  int min_u = mask.width, min_v = mask.height, max_u = -1, max_v = -1;
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u)
      if (mask.get(u, v)) {
        min_u = std::min(min_u, u);
        max_u = std::max(max_u, u);
        min_v = std::min(min_v, v);
        max_v = std::max(max_v, v);
      }
  if (max_u < 0) throw InvalidInput("cannot derive a bounding box from an empty mask");
  return {static_cast<double>(min_u), static_cast<double>(min_v), static_cast<double>(max_u - min_u + 1),
          static_cast<double>(max_v - min_v + 1)};
}

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

void set_if_inside(Mask& mask, long u, long v) {
  if (u >= 0 && v >= 0 && u < mask.width && v < mask.height) mask.set(static_cast<int>(u), static_cast<int>(v));
}

}  // namespace

std::vector<Vec2> convex_hull(std::vector<Vec2> points) {
  std::sort(points.begin(), points.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < 3) return points;
  std::vector<Vec2> hull(2 * points.size());
  std::size_t k = 0;
  for (const auto& p : points) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  return hull;
}

Mask fill_convex_hull(const std::vector<Vec2>& points, int width, int height) {
  Mask mask(width, height);
  if (points.empty()) return mask;
  const std::vector<Vec2> hull = convex_hull(points);

  if (hull.size() >= 3) {
    double min_x = hull[0].x(), max_x = min_x, min_y = hull[0].y(), max_y = min_y;
    for (const auto& p : hull) {
      min_x = std::min(min_x, p.x());
      max_x = std::max(max_x, p.x());
      min_y = std::min(min_y, p.y());
      max_y = std::max(max_y, p.y());
    }
    const long u0 = std::max(0L, static_cast<long>(std::ceil(min_x - 1e-9)));
    const long u1 = std::min<long>(width - 1, static_cast<long>(std::floor(max_x + 1e-9)));
    const long v0 = std::max(0L, static_cast<long>(std::ceil(min_y - 1e-9)));
    const long v1 = std::min<long>(height - 1, static_cast<long>(std::floor(max_y + 1e-9)));
    for (long v = v0; v <= v1; ++v)
      for (long u = u0; u <= u1; ++u) {
        const Vec2 c(static_cast<double>(u), static_cast<double>(v));
        bool inside = true;
        for (std::size_t i = 0; i < hull.size() && inside; ++i) {
          const Vec2& a = hull[i];
          const Vec2& b = hull[(i + 1) % hull.size()];
          const double len = (b - a).norm();
          inside = cross(a, b, c) >= -1e-9 * std::max(1.0, len);
        }
        if (inside) mask.set(static_cast<int>(u), static_cast<int>(v));
      }
  } else if (hull.size() == 2) {
    const Vec2 a = hull[0], b = hull[1];
    const int steps = static_cast<int>(std::ceil((b - a).lpNorm<Eigen::Infinity>())) + 1;
    for (int i = 0; i <= steps; ++i) {
      const Vec2 p = a + (b - a) * (static_cast<double>(i) / steps);
      set_if_inside(mask, std::lround(p.x()), std::lround(p.y()));
    }
  }
  for (const auto& p : hull) set_if_inside(mask, std::lround(p.x()), std::lround(p.y()));
  return mask;
}

}  // namespace glasslabel
