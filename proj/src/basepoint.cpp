#include "glasslabel/basepoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "glasslabel/errors.hpp"
#include "glasslabel/pipeline.hpp"

namespace glasslabel {

BasePoint compute_base_point(const std::vector<Vec3>& cap_points, const Plane& table, const CameraProfile& cam,
                             int box_size) {
  if (cap_points.empty()) throw InvalidInput("base point needs at least one cap point");
  BasePoint bp;
  for (const auto& p : cap_points) bp.p += p;
  bp.p /= static_cast<double>(cap_points.size());
  const PlaneProjection proj = project_point_to_plane(bp.p, table);
  bp.d_proj = proj.distance;
  bp.p_proj = proj.point;
  bp.pixel = project(bp.p_proj, cam);
  bp.keypoint_box = keypoint_box(bp.pixel, std::max(box_size, 1));
  return bp;
}

Bbox keypoint_box(const Vec2& pixel, int box_size) {
  if (box_size < 1) throw InvalidInput("keypoint box size must be at least 1");
  const double u = std::round(pixel.x());
  const double v = std::round(pixel.y());
  const double half = static_cast<double>(box_size / 2);
  return {u - half, v - half, static_cast<double>(box_size), static_cast<double>(box_size)};
}

Annotation to_keypoint_annotation(const BasePoint& bp, int box_size, int image_width, int image_height) {
  const double u = std::round(bp.pixel.x());
  const double v = std::round(bp.pixel.y());
  if (u < 0 || v < 0 || u >= image_width || v >= image_height)
    throw InvalidInput("base point lies outside the image");
  Annotation a;
  a.class_id = kKeypointCategoryId;
  a.bbox = keypoint_box(bp.pixel, box_size);
  a.base_pixel = bp.pixel;
  a.clipped = a.bbox.x < 0 || a.bbox.y < 0 || a.bbox.x + a.bbox.w > image_width || a.bbox.y + a.bbox.h > image_height;
  return a;
}

double Heatmap::max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

Heatmap& Heatmap::operator+=(const Heatmap& other) {
  if (other.width != width || other.height != height) throw InvalidInput("heatmap sizes differ");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
  return *this;
}

double gaussian_kernel(double dx, double dy, double sigma) {
  const double s2 = sigma * sigma;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * s2)) / (2.0 * M_PI * s2);
}

namespace {

// 2^-36: fine enough for 1e-10 accuracy, coarse enough that sums up to 2^16
// stay exactly representable in a double.
constexpr double kQuantum = 1.0 / 68719476736.0;

double quantize(double v) { return std::round(v / kQuantum) * kQuantum; }

}  // namespace

Heatmap render_heatmap(const std::vector<KeypointProposal>& proposals, int width, int height, int k, double sigma) {
  if (k < 1 || k % 2 == 0) throw InvalidInput("kernel size must be odd and positive");
  if (!(sigma > 0.0)) throw InvalidInput("sigma must be positive");
  if (width <= 0 || height <= 0) throw InvalidInput("heatmap size must be positive");
  Heatmap map(width, height);
  const int half = k / 2;
  for (const auto& prop : proposals) {
    if (!prop.center.allFinite()) throw InvalidInput("proposal center is not finite");
    if (!(prop.score >= 0.0)) throw InvalidInput("proposal score must be non-negative");
    const long cu = std::lround(prop.center.x());
    const long cv = std::lround(prop.center.y());
    for (long v = std::max(0L, cv - half); v <= std::min<long>(height - 1, cv + half); ++v)
      for (long u = std::max(0L, cu - half); u <= std::min<long>(width - 1, cu + half); ++u) {
        const double g = gaussian_kernel(u - prop.center.x(), v - prop.center.y(), sigma);
        map.values[static_cast<std::size_t>(v) * width + u] += quantize(prop.score * g);
      }
  }
  return map;
}

std::vector<ExtractedPoint> extract_base_points(const Heatmap& heatmap, const std::vector<Bbox>& boxes) {
  std::vector<ExtractedPoint> out;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Bbox& b = boxes[i];
    const int u0 = std::max(0, static_cast<int>(std::floor(b.x)));
    const int v0 = std::max(0, static_cast<int>(std::floor(b.y)));
    const int u1 = std::min(heatmap.width, static_cast<int>(std::floor(b.x + b.w)));
    const int v1 = std::min(heatmap.height, static_cast<int>(std::floor(b.y + b.h)));
    ExtractedPoint best{i, -1, -1, 0.0};
    // Row-major scan with strict '>' keeps the first (smallest row, column) max.
    for (int v = v0; v < v1; ++v)
      for (int u = u0; u < u1; ++u)
        if (heatmap.at(u, v) > best.value) best = {i, u, v, heatmap.at(u, v)};
    if (best.u >= 0) out.push_back(best);
  }
  return out;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw ParseError("truncated heatmap file");
  return bytes[0] | (bytes[1] << 8) | (bytes[2] << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

}  // namespace

void write_heatmap(const Heatmap& heatmap, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  out.write("GLHM", 4);
  put_u32(out, static_cast<std::uint32_t>(heatmap.width));
  put_u32(out, static_cast<std::uint32_t>(heatmap.height));
  for (double v : heatmap.values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!out) throw InvalidInput("failed writing '" + path + "'");
}

Heatmap read_heatmap(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open heatmap '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "GLHM", 4) != 0) throw ParseError("not a heatmap container");
  const std::uint32_t w = get_u32(in);
  const std::uint32_t h = get_u32(in);
  if (w == 0 || h == 0 || w > 100000 || h > 100000) throw ParseError("implausible heatmap size");
  Heatmap map(static_cast<int>(w), static_cast<int>(h));
  for (auto& v : map.values) v = std::bit_cast<float>(get_u32(in));
  return map;
}

}  // namespace glasslabel
