#pragma once

#include <stdexcept>
#include <string>

namespace glasslabel {

// Base of every error thrown by the library. Callers that only need to know
// "something in glasslabel failed" catch this; the subclasses below mirror the
// distinct failure classes the pipeline reports on.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by the caller (empty input, bad dimensions, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Plane fitting could not find a non-degenerate model.
class FitFailure : public Error {
 public:
  using Error::Error;
};

// A 3D point or ray intersection lies at or behind the camera.
class BehindCamera : public Error {
 public:
  using Error::Error;
};

// A viewing ray is parallel to the plane it was cast against.
class NoIntersection : public Error {
 public:
  using Error::Error;
};

// Iterative numeric routine failed to converge within its budget.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Calibration problem is under-determined or degenerate.
class RankError : public Error {
 public:
  using Error::Error;
};

// Structured-text input could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

// An external verifier/segmenter stage failed (timeout, crash, bad message).
class StageError : public Error {
 public:
  using Error::Error;
};

// Plugin answered with a message that violates the wire protocol.
class ProtocolError : public StageError {
 public:
  using StageError::StageError;
};

// Plugin did not answer within its deadline.
class PluginTimeout : public StageError {
 public:
  using StageError::StageError;
};

}  // namespace glasslabel
