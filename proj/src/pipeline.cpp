#include "glasslabel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "glasslabel/errors.hpp"

namespace glasslabel {

std::vector<GlassClassSpec> default_glass_classes() {
  return {
      {1, "high beer glass", 0.230, 0.070, std::nullopt},
      {2, "beer glass with a handle", 0.150, 0.085, std::nullopt},
      {3, "wine glass", 0.190, 0.080, std::nullopt},
      {4, "water glass", 0.115, 0.070, std::nullopt},
      {5, "whiskey glass", 0.085, 0.080, std::nullopt},
      {6, "shot glass", 0.055, 0.050, std::nullopt},
  };
}

void validate_classes(const std::vector<GlassClassSpec>& classes) {
  if (classes.empty()) throw InvalidInput("at least one glass class is required");
  std::set<int> ids;
  for (const auto& c : classes) {
    if (!(c.height > 0.0) || !(c.diameter > 0.0))
      throw InvalidInput("glass class '" + c.name + "' needs positive height and diameter");
    if (c.id == kKeypointCategoryId) throw InvalidInput("class id 7 is reserved for keypoints");
    if (!ids.insert(c.id).second) throw InvalidInput("duplicate glass class id " + std::to_string(c.id));
    if (c.height_tolerance && !(*c.height_tolerance > 0.0))
      throw InvalidInput("glass class '" + c.name + "' has a non-positive tolerance");
  }
}

const GlassClassSpec* find_class(const std::vector<GlassClassSpec>& classes, int id) {
  for (const auto& c : classes)
    if (c.id == id) return &c;
  return nullptr;
}

std::vector<ClusterCandidate> extract_candidates(const PointCloud& world_cloud, const Plane& table,
                                                 const CandidateOptions& options) {
  PointCloud above;
  above.frame = world_cloud.frame;
  std::vector<std::size_t> origin;
  for (std::size_t i = 0; i < world_cloud.points.size(); ++i) {
    if (table.signed_distance(world_cloud.points[i]) > options.deviation_threshold) {
      above.points.push_back(world_cloud.points[i]);
      origin.push_back(i);
    }
  }

  std::vector<ClusterCandidate> out;
  for (auto& cluster : cluster_points(above, options.cluster)) {
    ClusterCandidate cand;
    const double offset = cluster_plane_offset(cluster, above, table);
    cand.height = cluster_height(offset, table);
    cand.cluster.centroid = cluster.centroid;
    cand.cluster.plane_offset = offset;
    cand.cluster.indices.reserve(cluster.indices.size());
    for (std::size_t i : cluster.indices) cand.cluster.indices.push_back(origin[i]);
    out.push_back(std::move(cand));
  }
  std::sort(out.begin(), out.end(), [](const ClusterCandidate& a, const ClusterCandidate& b) {
    const Vec3& ca = a.cluster.centroid;
    const Vec3& cb = b.cluster.centroid;
    return ca.x() < cb.x() || (ca.x() == cb.x() && ca.y() < cb.y());
  });
  return out;
}

std::optional<int> assign_class_by_height(double height, const std::vector<GlassClassSpec>& classes,
                                          double tolerance) {
  if (classes.empty()) throw InvalidInput("no glass classes to match against");
  if (!(tolerance > 0.0)) throw InvalidInput("height tolerance must be positive");
  const GlassClassSpec* best = nullptr;
  double best_dev = std::numeric_limits<double>::infinity();
  // Deviations closer than a picometer are ties; exact float equality would
  // let rounding in h - height decide between equidistant classes.
  constexpr double kTie = 1e-12;
  for (const auto& c : classes) {
    const double dev = std::abs(height - c.height);
    if (!best || dev < best_dev - kTie || (std::abs(dev - best_dev) <= kTie && c.id < best->id)) {
      best = &c;
      best_dev = dev;
    }
  }
  const double tol = best->height_tolerance.value_or(tolerance);
  if (best_dev > tol) return std::nullopt;
  return best->id;
}

VerifierVerdict verify_with_detector(const PortRequest& request, VerifierPort& verifier, double min_iou) {
  if (!request.bbox_hint) throw InvalidInput("verification needs a bounding-box hint");
  VerifierVerdict verdict;
  for (const auto& det : verifier.verify(request)) {
    if (!(det.score >= 0.0 && det.score <= 1.0)) throw ProtocolError("verifier score outside [0, 1]");
    if (iou(det.bbox, *request.bbox_hint) >= min_iou && (!verdict.accepted || det.score > verdict.score)) {
      verdict.accepted = true;
      verdict.score = det.score;
    }
  }
  return verdict;
}

Mask prompt_segmenter(PortRequest request, SegmenterPort& segmenter) {
  request.op = PortOp::Segment;
  std::vector<Vec2> inside;
  for (const auto& p : request.points)
    if (p.x() >= 0 && p.y() >= 0 && p.x() <= request.image_width - 1 && p.y() <= request.image_height - 1)
      inside.push_back(p);
  if (inside.empty()) throw InvalidInput("no segmentation sample point lies inside the image");
  request.points = std::move(inside);
  return segmenter.segment(request);
}

bool filter_mask(const Mask& mask, const GlassClassSpec& cls, const CameraProfile& cam, const Vec3& base_point,
                 double width_factor) {
  const Vec3 pc = cam.to_camera(base_point);
  if (!(pc.z() > 0.0)) throw BehindCamera("base point is behind camera '" + cam.name + "'");
  const double expected = cam.fx * cls.diameter / pc.z();
  return mask_row_width(mask) <= width_factor * expected * (1.0 + 1e-12);
}

int mask_row_width(const Mask& mask) {
  int widest = 0;
  for (int v = 0; v < mask.height; ++v) {
    int first = -1, last = -1;
    for (int u = 0; u < mask.width; ++u)
      if (mask.get(u, v)) {
        if (first < 0) first = u;
        last = u;
      }
    if (first >= 0) widest = std::max(widest, last - first + 1);
  }
  if (widest == 0) throw InvalidInput("mask is empty");
  return widest;
}

std::vector<Vec2> farthest_point_subsample(const std::vector<Vec2>& points, std::size_t count) {
  if (points.size() <= count) return points;
  if (count == 0) return {};
  std::vector<std::size_t> chosen;
  std::vector<double> dist(points.size(), std::numeric_limits<double>::infinity());
  auto take = [&](std::size_t idx) {
    if (std::find(chosen.begin(), chosen.end(), idx) != chosen.end()) return;
    chosen.push_back(idx);
    for (std::size_t i = 0; i < points.size(); ++i) dist[i] = std::min(dist[i], (points[i] - points[idx]).squaredNorm());
  };

  std::size_t extremes[4] = {0, 0, 0, 0};
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].x() < points[extremes[0]].x()) extremes[0] = i;
    if (points[i].x() > points[extremes[1]].x()) extremes[1] = i;
    if (points[i].y() < points[extremes[2]].y()) extremes[2] = i;
    if (points[i].y() > points[extremes[3]].y()) extremes[3] = i;
  }
  for (std::size_t e : extremes)
    if (chosen.size() < count) take(e);
  while (chosen.size() < count) {
    const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    if (dist[far] == 0.0) break;
    take(far);
  }
  std::vector<Vec2> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(points[i]);
  return out;
}

std::optional<Bbox> cylinder_bbox(const Vec3& base, const GlassClassSpec& cls, const CameraProfile& cam,
                                  const Plane& table) {
  const Vec3 n = table.unit_normal();
  const Vec3 e1 = n.unitOrthogonal();
  const Vec3 e2 = n.cross(e1);
  const double r = cls.diameter / 2.0;
  constexpr int kSamples = 720;
  double min_u = std::numeric_limits<double>::infinity(), max_u = -min_u;
  double min_v = min_u, max_v = -min_u;
  for (int ring = 0; ring < 2; ++ring) {
    const Vec3 center = base + (ring == 0 ? 0.0 : cls.height) * n;
    for (int i = 0; i < kSamples; ++i) {
      const double a = 2.0 * M_PI * i / kSamples;
      const Vec3 p = center + r * (std::cos(a) * e1 + std::sin(a) * e2);
      const Vec3 pc = cam.to_camera(p);
      if (!(pc.z() > 0.0)) return std::nullopt;
      const Vec2 px = project_camera_point(pc, cam);
      min_u = std::min(min_u, px.x());
      max_u = std::max(max_u, px.x());
      min_v = std::min(min_v, px.y());
      max_v = std::max(max_v, px.y());
    }
  }
  const double u0 = std::max(0.0, std::ceil(min_u));
  const double u1 = std::min(cam.width - 1.0, std::floor(max_u));
  const double v0 = std::max(0.0, std::ceil(min_v));
  const double v1 = std::min(cam.height - 1.0, std::floor(max_v));
  if (u1 < u0 || v1 < v0) return std::nullopt;
  return Bbox{u0, v0, u1 - u0 + 1.0, v1 - v0 + 1.0};
}

namespace {

std::vector<Vec2> in_image_rounded(const std::vector<Vec3>& world, const CameraProfile& cam) {
  std::set<std::pair<long, long>> seen;
  std::vector<Vec2> out;
  for (const auto& p : world) {
    const Vec3 pc = cam.to_camera(p);
    if (!(pc.z() > 0.0)) continue;
    const Vec2 px = project_camera_point(pc, cam);
    const long u = std::lround(px.x());
    const long v = std::lround(px.y());
    if (u < 0 || v < 0 || u >= cam.width || v >= cam.height) continue;
    if (seen.emplace(u, v).second) out.emplace_back(static_cast<double>(u), static_cast<double>(v));
  }
  return out;
}

Bbox bounds_of(const std::vector<Vec2>& pts) {
  double u0 = pts[0].x(), u1 = u0, v0 = pts[0].y(), v1 = v0;
  for (const auto& p : pts) {
    u0 = std::min(u0, p.x());
    u1 = std::max(u1, p.x());
    v0 = std::min(v0, p.y());
    v1 = std::max(v1, p.y());
  }
  return {u0, v0, u1 - u0 + 1.0, v1 - v0 + 1.0};
}

}  // namespace

FrameResult label_frame(const FrameInput& input, const CameraProfile& cam, const std::optional<Plane>& table,
                        const std::vector<GlassClassSpec>& classes, const LabelConfig& config, const Ports& ports) {
  cam.validate();
  validate_classes(classes);
  config.color_gate.validate();
  if (input.capped_color.width != cam.width || input.capped_color.height != cam.height)
    throw InvalidInput("capped color image does not match camera '" + cam.name + "'");

  MockVerifier fallback_verifier;
  MockSegmenter fallback_segmenter;
  VerifierPort& verifier = ports.verifier ? *ports.verifier : fallback_verifier;
  SegmenterPort& segmenter = ports.segmenter ? *ports.segmenter : fallback_segmenter;

  std::vector<std::string> prompts = config.verifier_prompts;
  if (prompts.empty()) {
    for (const auto& c : classes) prompts.push_back(c.name);
    prompts.emplace_back("drink glass");
  }

  FrameResult result;
  const PointCloud world = camera_to_world(deproject_depth(input.capped_depth, cam), cam);
  result.table = table ? table->canonicalized() : fit_plane_ransac(world, config.ransac).plane;
  const Plane& plane = result.table;

  result.candidates = extract_candidates(world, plane, config.candidates);
  result.counts.candidates = result.candidates.size();

  for (std::size_t ci = 0; ci < result.candidates.size(); ++ci) {
    ClusterCandidate& cand = result.candidates[ci];
    const int idx = static_cast<int>(ci);
    auto reject = [&](const std::string& stage, const std::string& why) {
      result.report.push_back({idx, stage, why});
    };

    cand.class_id = assign_class_by_height(cand.height, classes, config.height_tolerance);
    if (!cand.class_id) {
      std::ostringstream msg;
      msg << "height " << cand.height << " m matches no glass class";
      reject("height", msg.str());
      continue;
    }
    ++result.counts.height;
    const GlassClassSpec& cls = *find_class(classes, *cand.class_id);

    // Cap = highest share of the cluster above the table.
    std::vector<std::pair<double, std::size_t>> by_height;
    by_height.reserve(cand.cluster.indices.size());
    for (std::size_t i : cand.cluster.indices) by_height.emplace_back(plane.signed_distance(world.points[i]), i);
    std::sort(by_height.begin(), by_height.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    const auto cap_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(config.cap_fraction * static_cast<double>(by_height.size()))));
    std::vector<Vec3> cap_points;
    for (std::size_t i = 0; i < cap_count; ++i) cap_points.push_back(world.points[by_height[i].second]);

    const std::vector<Vec2> cap_pixels = in_image_rounded(cap_points, cam);
    if (cap_pixels.empty()) {
      reject("projection", "cap is not visible in the image");
      continue;
    }
    cand.footprint_pixels = farthest_point_subsample(cap_pixels, config.max_samples);
    cand.color_ok = verify_color(input.capped_color, cand.footprint_pixels, config.color_gate);
    if (!cand.color_ok) {
      reject("color", "cap color outside the CIELAB gate");
      continue;
    }
    ++result.counts.color;

    // Prompt points: the cluster plus its footprint dropped onto the table,
    // which together outline the whole glass from rim to base.
    std::vector<Vec3> outline;
    outline.reserve(cand.cluster.indices.size() * 2);
    for (std::size_t i : cand.cluster.indices) {
      outline.push_back(world.points[i]);
      outline.push_back(project_point_to_plane(world.points[i], plane).point);
    }
    const std::vector<Vec2> outline_pixels = in_image_rounded(outline, cam);

    PortRequest request;
    request.id = input.scene_id + "/" + cam.name + "/" + input.frame_id + "/" + std::to_string(ci);
    request.image_path = input.clean_image_path;
    request.image_width = cam.width;
    request.image_height = cam.height;
    request.points = farthest_point_subsample(outline_pixels, config.max_samples);
    request.bbox_hint = bounds_of(outline_pixels);
    request.class_names = prompts;

    VerifierVerdict verdict;
    try {
      request.op = PortOp::Verify;
      verdict = verify_with_detector(request, verifier, config.verify_iou);
      cand.verifier_ok = verdict.accepted;
    } catch (const StageError& e) {
      reject("verifier", std::string("stage error: ") + e.what());
      if (config.strict) continue;
      verdict = {true, 1.0};
    }
    if (!verdict.accepted) {
      reject("verifier", "no glass-like detection overlaps the candidate");
      continue;
    }
    ++result.counts.verifier;

    Mask mask;
    try {
      mask = prompt_segmenter(request, segmenter);
    } catch (const StageError& e) {
      reject("segmenter", std::string("stage error: ") + e.what());
      continue;
    } catch (const Error& e) {
      reject("segmenter", e.what());
      continue;
    }
    if (mask.width != cam.width || mask.height != cam.height || mask.empty()) {
      reject("segmenter", "segmenter returned an empty or mis-sized mask");
      continue;
    }
    ++result.counts.segmenter;

    BasePoint bp;
    try {
      bp = compute_base_point(cap_points, plane, cam, config.keypoint_box_size);
      if (!filter_mask(mask, cls, cam, bp.p_proj, config.width_factor)) {
        std::ostringstream msg;
        msg << "mask width " << mask_row_width(mask) << " px exceeds " << config.width_factor << " x the "
            << cls.name << " diameter at depth " << cam.to_camera(bp.p_proj).z() << " m";
        reject("mask_filter", msg.str());
        continue;
      }
    } catch (const Error& e) {
      reject("mask_filter", e.what());
      continue;
    }
    ++result.counts.mask_filter;

    Annotation ann;
    ann.class_id = cls.id;
    ann.bbox = mask_to_bbox(mask);
    ann.mask = std::move(mask);
    ann.score = verdict.score;
    ann.camera = cam.name;
    ann.scene_id = input.scene_id;
    ann.frame_id = input.frame_id;
    ann.base_pixel = bp.pixel;

    try {
      Annotation kp = to_keypoint_annotation(bp, config.keypoint_box_size, cam.width, cam.height);
      kp.score = ann.score;
      kp.camera = ann.camera;
      kp.scene_id = ann.scene_id;
      kp.frame_id = ann.frame_id;
      result.keypoints.push_back(std::move(kp));
    } catch (const InvalidInput& e) {
      reject("keypoint", e.what());
    }
    result.annotations.push_back(std::move(ann));
  }
  return result;
}

std::vector<Annotation> project_annotations(const std::vector<Annotation>& annotations, const CameraProfile& from,
                                            const CameraProfile& to, const Plane& table,
                                            const std::vector<GlassClassSpec>& classes,
                                            std::vector<ReportEntry>* report) {
  std::vector<Annotation> out;
  auto drop = [&](std::size_t i, const std::string& why) {
    if (report) report->push_back({static_cast<int>(i), "project", why});
  };
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const Annotation& src = annotations[i];
    if (!src.base_pixel) {
      drop(i, "annotation has no base point");
      continue;
    }
    const GlassClassSpec* cls = src.class_id == kKeypointCategoryId ? nullptr : find_class(classes, src.class_id);
    if (src.class_id != kKeypointCategoryId && !cls) {
      drop(i, "unknown class id " + std::to_string(src.class_id));
      continue;
    }
    Vec3 base;
    PixelTransfer moved;
    try {
      base = cast_ray_to_plane(*src.base_pixel, from, table);
      moved.pixel = project(base, to);
      moved.in_bounds = to.contains(moved.pixel);
    } catch (const Error& e) {
      drop(i, e.what());
      continue;
    }
    if (!moved.in_bounds) {
      drop(i, "base point falls outside camera '" + to.name + "'");
      continue;
    }

    Annotation dst = src;
    dst.camera = to.name;
    dst.mask.reset();
    dst.base_pixel = moved.pixel;
    if (cls) {
      const auto box = cylinder_bbox(base, *cls, to, table);
      if (!box) {
        drop(i, "glass is outside the view of camera '" + to.name + "'");
        continue;
      }
      dst.bbox = *box;
    } else {
      const int size = static_cast<int>(src.bbox.w);
      dst.bbox = keypoint_box(moved.pixel, std::max(size, 1));
      dst.clipped = dst.bbox.x < 0 || dst.bbox.y < 0 || dst.bbox.x + dst.bbox.w > to.width ||
                    dst.bbox.y + dst.bbox.h > to.height;
    }
    out.push_back(std::move(dst));
  }
  return out;
}

}  // namespace glasslabel
