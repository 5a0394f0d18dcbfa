#pragma once

#include <cstdint>
#include <vector>

#include "patchdepth/types.hpp"

namespace patchdepth {

// Central-difference luminance gradients, one-sided at the borders.
struct GradientMap {
  int width = 0;
  int height = 0;
  std::vector<double> gx;
  std::vector<double> gy;
  std::vector<double> magnitude;

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
};

// Throws ValidationError if the image is smaller than 3x3.
GradientMap gradient_map(const Image& img);

enum class KeypointOrigin : std::uint8_t {
  kGradient,  // block-wise gradient maximum
  kRandom,    // uniform fill to reach the budget
};

struct Keypoint {
  int x = 0;
  int y = 0;
  KeypointOrigin origin = KeypointOrigin::kGradient;
};

struct KeypointSet {
  std::vector<Keypoint> points;
  std::uint64_t seed = 0;
};

struct KeypointParams {
  int count = 3000;        // exact budget; selection truncates, fill pads
  int block_size = 16;     // selection cell edge in pixels
  int margin = 4;          // keep-out border, window spread + 1
  double grad_threshold = 7.0 / 255.0;  // required lead over the cell median

  void validate() const;
};

// Deterministic two-stage selection: scan the gradient map in block_size
// cells (row-major), keep each cell's strongest pixel when it clears the
// cell's median magnitude by grad_threshold, truncate to the budget, then
// fill the remainder with seeded uniform draws over the interior,
// without replacement. Throws CapacityError when the interior cannot hold
// the budget.
KeypointSet select_keypoints(const GradientMap& grad,
                             const KeypointParams& params,
                             std::uint64_t seed);

}  // namespace patchdepth
