#include "glasslabel/imageio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "glasslabel/errors.hpp"

namespace glasslabel {

namespace {

std::uint32_t big_endian(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (p[1] << 16) | (p[2] << 8) | p[3];
}

void write_mat(const cv::Mat& mat, const std::string& path) {
  bool ok = false;
  try {
    ok = cv::imwrite(path, mat);
  } catch (const cv::Exception& e) {
    throw InvalidInput("cannot write '" + path + "': " + e.what());
  }
  if (!ok) throw InvalidInput("cannot write '" + path + "'");
}

}  // namespace

PngHeader read_png_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  unsigned char buf[33];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof buf)) throw ParseError("'" + path + "' is truncated");
  static const unsigned char kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (std::memcmp(buf, kSignature, 8) != 0) throw ParseError("'" + path + "' is not a PNG file");
  if (std::memcmp(buf + 12, "IHDR", 4) != 0) throw ParseError("'" + path + "' has no IHDR chunk");
  PngHeader h;
  h.width = static_cast<int>(big_endian(buf + 16));
  h.height = static_cast<int>(big_endian(buf + 20));
  h.bit_depth = buf[24];
  h.color_type = buf[25];
  return h;
}

ColorImage read_color_png(const std::string& path) {
  const cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw ParseError("cannot read color image '" + path + "'");
  ColorImage img(bgr.cols, bgr.rows);
  for (int v = 0; v < bgr.rows; ++v) {
    const auto* row = bgr.ptr<cv::Vec3b>(v);
    for (int u = 0; u < bgr.cols; ++u) {
      std::uint8_t* px = img.at(u, v);
      px[0] = row[u][2];
      px[1] = row[u][1];
      px[2] = row[u][0];
    }
  }
  return img;
}

void write_color_png(const ColorImage& image, const std::string& path) {
  cv::Mat bgr(image.height, image.width, CV_8UC3);
  for (int v = 0; v < image.height; ++v) {
    auto* row = bgr.ptr<cv::Vec3b>(v);
    for (int u = 0; u < image.width; ++u) {
      const std::uint8_t* px = image.at(u, v);
      row[u] = cv::Vec3b(px[2], px[1], px[0]);
    }
  }
  write_mat(bgr, path);
}

DepthFrame read_depth_png(const std::string& path) {
  const PngHeader header = read_png_header(path);
  if (header.bit_depth != 16 || header.color_type != 0)
    throw ParseError("depth image '" + path + "' must be 16-bit single channel (got " +
                     std::to_string(header.bit_depth) + "-bit, color type " + std::to_string(header.color_type) + ")");
  const cv::Mat raw = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (raw.empty() || raw.type() != CV_16UC1) throw ParseError("cannot decode depth image '" + path + "'");
  DepthFrame depth;
  depth.width = raw.cols;
  depth.height = raw.rows;
  depth.depth_mm.resize(static_cast<std::size_t>(raw.cols) * raw.rows);
  for (int v = 0; v < raw.rows; ++v)
    std::memcpy(&depth.depth_mm[static_cast<std::size_t>(v) * raw.cols], raw.ptr<std::uint16_t>(v),
                sizeof(std::uint16_t) * raw.cols);
  return depth;
}

void write_depth_png(const DepthFrame& depth, const std::string& path) {
  cv::Mat raw(depth.height, depth.width, CV_16UC1);
  for (int v = 0; v < depth.height; ++v)
    std::memcpy(raw.ptr<std::uint16_t>(v), &depth.depth_mm[static_cast<std::size_t>(v) * depth.width],
                sizeof(std::uint16_t) * depth.width);
  write_mat(raw, path);
}

void write_heatmap_png(const Heatmap& heatmap, const std::string& path) {
  cv::Mat gray(heatmap.height, heatmap.width, CV_8UC1, cv::Scalar(0));
  const double peak = heatmap.max();
  if (peak > 0.0)
    for (int v = 0; v < heatmap.height; ++v)
      for (int u = 0; u < heatmap.width; ++u)
        gray.at<std::uint8_t>(v, u) = static_cast<std::uint8_t>(std::lround(255.0 * heatmap.at(u, v) / peak));
  write_mat(gray, path);
}

}  // namespace glasslabel
