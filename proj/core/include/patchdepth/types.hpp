#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "patchdepth/errors.hpp"

namespace patchdepth {

// Continuous pixel position. Integer coordinates address sample centers, so
// the valid image domain is [0, W-1] x [0, H-1].
struct PixelPoint {
  double x = 0.0;
  double y = 0.0;
};

// Pinhole intrinsics, zero skew, square axes.
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  // Throws ValidationError on non-finite or non-positive focal lengths.
  void validate() const;
  // Additionally checks that the principal point lies inside the image.
  void validate(int width, int height) const;
};

// Row-major, channel-interleaved float image with values in [0, 1].
// channels is 1 (grayscale) or 3 (RGB).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0);

  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  // Rec.601 luma for RGB, identity for grayscale.
  double luminance(int x, int y) const;

  bool empty() const { return width <= 0 || height <= 0; }

  // Throws ValidationError if dimensions, channel count, buffer size, or
  // value range are broken.
  void validate() const;
};

// Per-pixel positive depth with an optional validity mask. An empty mask
// means every pixel is valid; ground-truth maps loaded from disk may carry
// holes.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> data;
  std::vector<std::uint8_t> mask;

  DepthMap() = default;
  DepthMap(int w, int h, double fill = 0.0);

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  double& at(int x, int y) { return data[index(x, y)]; }
  double at(int x, int y) const { return data[index(x, y)]; }

  bool valid_at(int x, int y) const {
    return mask.empty() || mask[index(x, y)] != 0;
  }
  void set_valid(int x, int y, bool v);

  bool empty() const { return width <= 0 || height <= 0; }

  // Throws ValidationError if sizes disagree or any valid entry is
  // non-finite or non-positive.
  void validate() const;
};

}  // namespace patchdepth
