#include "glasslabel/ports.hpp"

#include <string>

#include "glasslabel/errors.hpp"

namespace glasslabel {

using nlohmann::json;

namespace {

json bbox_to_json(const Bbox& b) { return json::array({b.x, b.y, b.w, b.h}); }

Bbox bbox_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 4) throw ProtocolError(std::string(what) + " must be [x, y, w, h]");
  for (const auto& v : j)
    if (!v.is_number()) throw ProtocolError(std::string(what) + " must hold numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ProtocolError(std::string("missing field '") + key + "'");
  return *it;
}

std::string op_name(PortOp op) { return op == PortOp::Verify ? "verify" : "segment"; }

}  // namespace

json request_to_json(const PortRequest& r) {
  json points = json::array();
  for (const auto& p : r.points) points.push_back(json::array({p.x(), p.y()}));
  return json{{"id", r.id},
              {"op", op_name(r.op)},
              {"image_path", r.image_path},
              {"image_size", json::array({r.image_height, r.image_width})},
              {"points", std::move(points)},
              {"bbox_hint", r.bbox_hint ? bbox_to_json(*r.bbox_hint) : json(nullptr)},
              {"class_names", r.class_names}};
}

PortRequest request_from_json(const json& j) {
  if (!j.is_object()) throw ProtocolError("request must be an object");
  PortRequest r;
  const json& id = require(j, "id");
  if (!id.is_string()) throw ProtocolError("'id' must be a string");
  r.id = id.get<std::string>();

  const json& op = require(j, "op");
  if (op == "verify")
    r.op = PortOp::Verify;
  else if (op == "segment")
    r.op = PortOp::Segment;
  else
    throw ProtocolError("'op' must be \"verify\" or \"segment\"");

  const json& path = require(j, "image_path");
  if (!path.is_string()) throw ProtocolError("'image_path' must be a string");
  r.image_path = path.get<std::string>();

  if (auto it = j.find("image_size"); it != j.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number_integer() || !(*it)[1].is_number_integer())
      throw ProtocolError("'image_size' must be [height, width]");
    r.image_height = (*it)[0].get<int>();
    r.image_width = (*it)[1].get<int>();
  }

  const json& points = require(j, "points");
  if (!points.is_array()) throw ProtocolError("'points' must be an array");
  for (const auto& p : points) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw ProtocolError("each point must be [u, v]");
    r.points.emplace_back(p[0].get<double>(), p[1].get<double>());
  }

  if (auto it = j.find("bbox_hint"); it != j.end() && !it->is_null()) r.bbox_hint = bbox_from_json(*it, "'bbox_hint'");

  if (auto it = j.find("class_names"); it != j.end()) {
    if (!it->is_array()) throw ProtocolError("'class_names' must be an array");
    for (const auto& n : *it) {
      if (!n.is_string()) throw ProtocolError("class names must be strings");
      r.class_names.push_back(n.get<std::string>());
    }
  }
  return r;
}

json response_to_json(const PortResponse& r) {
  json j{{"id", r.id}, {"ok", r.ok}};
  if (!r.ok) {
    j["error"] = r.error;
    return j;
  }
  if (r.mask_rle) {
    j["mask_rle"] = {{"size", json::array({r.mask_rle->height, r.mask_rle->width})}, {"counts", r.mask_rle->counts}};
  } else {
    json dets = json::array();
    for (const auto& d : r.detections)
      dets.push_back({{"bbox", bbox_to_json(d.bbox)}, {"score", d.score}, {"label", d.label}});
    j["detections"] = std::move(dets);
  }
  return j;
}

PortResponse response_from_json(const json& j, PortOp op) {
  if (!j.is_object()) throw ProtocolError("response must be an object");
  PortResponse r;
  const json& id = require(j, "id");
  if (!id.is_string()) throw ProtocolError("'id' must be a string");
  r.id = id.get<std::string>();
  const json& ok = require(j, "ok");
  if (!ok.is_boolean()) throw ProtocolError("'ok' must be a boolean");
  r.ok = ok.get<bool>();
  if (!r.ok) {
    if (auto it = j.find("error"); it != j.end() && it->is_string()) r.error = it->get<std::string>();
    return r;
  }

  if (op == PortOp::Verify) {
    const json& dets = require(j, "detections");
    if (!dets.is_array()) throw ProtocolError("'detections' must be an array");
    for (const auto& d : dets) {
      if (!d.is_object()) throw ProtocolError("detection must be an object");
      Detection det;
      det.bbox = bbox_from_json(require(d, "bbox"), "detection bbox");
      const json& score = require(d, "score");
      if (!score.is_number()) throw ProtocolError("detection score must be a number");
      det.score = score.get<double>();
      if (!(det.score >= 0.0 && det.score <= 1.0)) throw ProtocolError("detection score outside [0, 1]");
      if (auto it = d.find("label"); it != d.end()) {
        if (!it->is_string()) throw ProtocolError("detection label must be a string");
        det.label = it->get<std::string>();
      }
      r.detections.push_back(std::move(det));
    }
    return r;
  }

  const json& rle = require(j, "mask_rle");
  if (!rle.is_object()) throw ProtocolError("'mask_rle' must be an object");
  const json& size = require(rle, "size");
  if (!size.is_array() || size.size() != 2 || !size[0].is_number_integer() || !size[1].is_number_integer())
    throw ProtocolError("'mask_rle.size' must be [height, width]");
  const json& counts = require(rle, "counts");
  if (!counts.is_array()) throw ProtocolError("'mask_rle.counts' must be an array");
  RunLength out;
  out.height = size[0].get<int>();
  out.width = size[1].get<int>();
  if (out.height < 0 || out.width < 0) throw ProtocolError("'mask_rle.size' must be non-negative");
  std::uint64_t total = 0;
  for (const auto& c : counts) {
    if (!c.is_number_unsigned() && !(c.is_number_integer() && c.get<long long>() >= 0))
      throw ProtocolError("RLE counts must be non-negative integers");
    out.counts.push_back(c.get<std::uint32_t>());
    total += out.counts.back();
  }
  if (total != static_cast<std::uint64_t>(out.height) * static_cast<std::uint64_t>(out.width))
    throw ProtocolError("RLE counts do not cover the mask size");
  r.mask_rle = std::move(out);
  return r;
}

std::vector<Detection> MockVerifier::verify(const PortRequest& request) {
  if (!request.bbox_hint) return {};
  const std::string label = request.class_names.empty() ? "drink glass" : request.class_names.front();
  return {Detection{*request.bbox_hint, score_, label}};
}

Mask MockSegmenter::segment(const PortRequest& request) {
  if (request.image_width <= 0 || request.image_height <= 0)
    throw ProtocolError("segment request needs a positive image size");
  return fill_convex_hull(request.points, request.image_width, request.image_height);
}

json handle_mock_request(const std::string& line) {
  json parsed;
  try {
    parsed = json::parse(line);
  } catch (const json::parse_error& e) {
    return json{{"id", nullptr}, {"ok", false}, {"error", std::string("malformed request: ") + e.what()}};
  }
  json id = nullptr;
  if (parsed.is_object())
    if (auto it = parsed.find("id"); it != parsed.end() && it->is_string()) id = *it;
  try {
    const PortRequest request = request_from_json(parsed);
    PortResponse response;
    response.id = request.id;
    response.ok = true;
    if (request.op == PortOp::Verify) {
      response.detections = MockVerifier().verify(request);
    } else {
      response.mask_rle = encode_rle(MockSegmenter().segment(request));
    }
    return response_to_json(response);
  } catch (const Error& e) {
    return json{{"id", id}, {"ok", false}, {"error", e.what()}};
  }
}

void serve_mock_plugin(std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << handle_mock_request(line).dump() << '\n';
    out.flush();
  }
}

std::vector<Detection> PluginVerifier::verify(const PortRequest& request) {
  PortRequest r = request;
  r.op = PortOp::Verify;
  PortResponse response = process_->call(r);
  if (!response.ok) throw StageError("verifier reported failure: " + response.error);
  return std::move(response.detections);
}

Mask PluginSegmenter::segment(const PortRequest& request) {
  PortRequest r = request;
  r.op = PortOp::Segment;
  PortResponse response = process_->call(r);
  if (!response.ok) throw StageError("segmenter reported failure: " + response.error);
  Mask mask = decode_rle(*response.mask_rle);
  if (request.image_width > 0 && (mask.width != request.image_width || mask.height != request.image_height))
    throw ProtocolError("segmenter mask size does not match the image");
  return mask;
}

}  // namespace glasslabel
