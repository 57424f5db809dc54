#pragma once

#include <chrono>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "glasslabel/image.hpp"

namespace glasslabel {

// Requests and responses exchanged with verification/segmentation stages.
// Over the wire each message is one JSON object per line:
//
//   request  {"id", "op": "verify"|"segment", "image_path", "image_size": [h, w],
//             "points": [[u, v], ...], "bbox_hint": [x, y, w, h] | null,
//             "class_names": [...]}
//   response {"id", "ok", "detections": [{"bbox", "score", "label"}]}      (verify)
//            {"id", "ok", "mask_rle": {"size": [h, w], "counts": [...]}}   (segment)
//            {"id", "ok": false, "error": "..."}                            (failure)
enum class PortOp { Verify, Segment };

struct PortRequest {
  std::string id;
  PortOp op = PortOp::Verify;
  std::string image_path;
  int image_width = 0;
  int image_height = 0;
  std::vector<Vec2> points;
  std::optional<Bbox> bbox_hint;
  std::vector<std::string> class_names;
};

struct Detection {
  Bbox bbox;
  double score = 0.0;
  std::string label;
};

struct PortResponse {
  std::string id;
  bool ok = false;
  std::string error;
  std::vector<Detection> detections;
  std::optional<RunLength> mask_rle;
};

nlohmann::json request_to_json(const PortRequest& request);
// Throws ProtocolError when a required field is missing or mistyped.
PortRequest request_from_json(const nlohmann::json& j);
nlohmann::json response_to_json(const PortResponse& response);
// Validates the response schema for `op`; throws ProtocolError on violation.
PortResponse response_from_json(const nlohmann::json& j, PortOp op);

class VerifierPort {
 public:
  virtual ~VerifierPort() = default;
  virtual std::vector<Detection> verify(const PortRequest& request) = 0;
};

class SegmenterPort {
 public:
  virtual ~SegmenterPort() = default;
  virtual Mask segment(const PortRequest& request) = 0;
};

// Reports the hint box back as a detection.
class MockVerifier : public VerifierPort {
 public:
  explicit MockVerifier(double score = 1.0) : score_(score) {}
  std::vector<Detection> verify(const PortRequest& request) override;

 private:
  double score_;
};

// Convex-hull fill of the prompt points.
class MockSegmenter : public SegmenterPort {
 public:
  Mask segment(const PortRequest& request) override;
};

// Request handler behind the mock plugin executable. Malformed input yields
// an ok=false response with the id echoed when it can be recovered.
nlohmann::json handle_mock_request(const std::string& line);

// Reads requests line by line until EOF and answers each on `out`.
void serve_mock_plugin(std::istream& in, std::ostream& out);

// A child process speaking the line protocol on stdin/stdout. One request is
// in flight at a time; a timed-out or crashed child is restarted on the next
// request.
class PluginProcess {
 public:
  PluginProcess(std::string command, std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~PluginProcess();
  PluginProcess(const PluginProcess&) = delete;
  PluginProcess& operator=(const PluginProcess&) = delete;

  // Sends the request and returns the validated response. Throws
  // PluginTimeout, ProtocolError or StageError.
  PortResponse call(const PortRequest& request);
  const std::string& command() const { return command_; }

 private:
  void start();
  void stop();
  std::string read_line();

  std::string command_;
  std::chrono::milliseconds timeout_;
  std::mutex mutex_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

class PluginVerifier : public VerifierPort {
 public:
  explicit PluginVerifier(std::shared_ptr<PluginProcess> process) : process_(std::move(process)) {}
  std::vector<Detection> verify(const PortRequest& request) override;

 private:
  std::shared_ptr<PluginProcess> process_;
};

class PluginSegmenter : public SegmenterPort {
 public:
  explicit PluginSegmenter(std::shared_ptr<PluginProcess> process) : process_(std::move(process)) {}
  Mask segment(const PortRequest& request) override;

 private:
  std::shared_ptr<PluginProcess> process_;
};

}  // namespace glasslabel
