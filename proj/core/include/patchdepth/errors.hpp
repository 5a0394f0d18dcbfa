#pragma once

#include <stdexcept>
#include <string>

namespace patchdepth {

// Two failure families. ValidationError means the caller handed us something
// malformed (bad sizes, out-of-range parameters, unreadable files) and maps to
// process exit code 1. NumericError means the data was well formed but the
// computation could not proceed (degenerate statistics, points behind the
// camera, diverged optimization) and maps to exit code 2.

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Projected point has non-positive camera-space depth.
class CheiralityError : public NumericError {
 public:
  explicit CheiralityError(const std::string& msg) : NumericError(msg) {}
};

// Patch statistics are unusable (too few valid samples for a structural
// similarity score).
class DegeneratePatchError : public NumericError {
 public:
  explicit DegeneratePatchError(const std::string& msg) : NumericError(msg) {}
};

// Not enough samples to determine a model (e.g. plane fit needs 3 points).
class InsufficientDataError : public ValidationError {
 public:
  explicit InsufficientDataError(const std::string& msg) : ValidationError(msg) {}
};

// Every keypoint lost all of its source views; the photometric term is empty.
class NoOverlapError : public NumericError {
 public:
  explicit NoOverlapError(const std::string& msg) : NumericError(msg) {}
};

// A requested sample budget cannot be met (more keypoints than interior pixels).
class CapacityError : public ValidationError {
 public:
  explicit CapacityError(const std::string& msg) : ValidationError(msg) {}
};

// A synthetic camera ray misses every scene primitive.
class CoverageError : public ValidationError {
 public:
  explicit CoverageError(const std::string& msg) : ValidationError(msg) {}
};

}  // namespace patchdepth
