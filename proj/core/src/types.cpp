#include "patchdepth/types.hpp"

#include <cmath>
#include <string>

namespace patchdepth {

void Intrinsics::validate() const {
  if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) ||
      !std::isfinite(cy)) {
    throw ValidationError("intrinsics contain non-finite entries");
  }
  if (fx <= 0.0 || fy <= 0.0) {
    throw ValidationError("focal lengths must be positive, got fx=" +
                          std::to_string(fx) + " fy=" + std::to_string(fy));
  }
}

void Intrinsics::validate(int width, int height) const {
  validate();
  if (cx < 0.0 || cx > width - 1 || cy < 0.0 || cy > height - 1) {
    throw ValidationError("principal point (" + std::to_string(cx) + ", " +
                          std::to_string(cy) + ") outside " +
                          std::to_string(width) + "x" + std::to_string(height) +
                          " image");
  }
}

Image::Image(int w, int h, int c, double fill)
    : width(w), height(h), channels(c) {
  if (w <= 0 || h <= 0 || (c != 1 && c != 3)) {
    throw ValidationError("bad image shape " + std::to_string(w) + "x" +
                          std::to_string(h) + "x" + std::to_string(c));
  }
  data.assign(static_cast<std::size_t>(w) * h * c, fill);
}

double Image::luminance(int x, int y) const {
  if (channels == 1) return at(x, y, 0);
  return 0.299 * at(x, y, 0) + 0.587 * at(x, y, 1) + 0.114 * at(x, y, 2);
}

void Image::validate() const {
  if (width <= 0 || height <= 0) {
    throw ValidationError("image has empty extent");
  }
  if (channels != 1 && channels != 3) {
    throw ValidationError("image must have 1 or 3 channels, got " +
                          std::to_string(channels));
  }
  if (data.size() != static_cast<std::size_t>(width) * height * channels) {
    throw ValidationError("image buffer size does not match dimensions");
  }
  for (double v : data) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("image values must lie in [0, 1]");
    }
  }
}

DepthMap::DepthMap(int w, int h, double fill) : width(w), height(h) {
  if (w <= 0 || h <= 0) {
    throw ValidationError("bad depth map shape " + std::to_string(w) + "x" +
                          std::to_string(h));
  }
  data.assign(static_cast<std::size_t>(w) * h, fill);
}

void DepthMap::set_valid(int x, int y, bool v) {
  if (mask.empty()) mask.assign(data.size(), 1);
  mask[index(x, y)] = v ? 1 : 0;
}

void DepthMap::validate() const {
  if (width <= 0 || height <= 0) {
    throw ValidationError("depth map has empty extent");
  }
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (data.size() != n) {
    throw ValidationError("depth buffer size does not match dimensions");
  }
  if (!mask.empty() && mask.size() != n) {
    throw ValidationError("depth mask size does not match dimensions");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask.empty() && mask[i] == 0) continue;
    if (!std::isfinite(data[i]) || data[i] <= 0.0) {
      throw ValidationError("valid depth entries must be finite and positive");
    }
  }
}

}  // namespace patchdepth
