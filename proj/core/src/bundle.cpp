#include "patchdepth/bundle.hpp"

#include <cmath>
#include <string>

namespace patchdepth {

namespace {
int node_count(int dim, int scale) {
  return std::max(2, (dim + scale - 1) / scale);
}
}  // namespace

DepthGrid DepthGrid::make(int width, int height, int scale, double depth) {
  if (width < 2 || height < 2) {
    throw ValidationError("depth grid needs an image of at least 2x2");
  }
  if (scale < 1) throw ValidationError("grid scale must be >= 1");
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    throw ValidationError("initial depth must be positive");
  }
  DepthGrid g;
  g.width = width;
  g.height = height;
  g.gw = node_count(width, scale);
  g.gh = node_count(height, scale);
  g.log_depth.assign(static_cast<std::size_t>(g.gw) * g.gh, std::log(depth));
  return g;
}

DepthGrid DepthGrid::from_depth_map(const DepthMap& dm, int scale) {
  dm.validate();
  if (!dm.mask.empty()) {
    throw ValidationError("grid initialization needs a hole-free depth map");
  }
  DepthGrid g = make(dm.width, dm.height, scale, 1.0);
  for (int gy = 0; gy < g.gh; ++gy) {
    const double py = g.gh == 1
                          ? 0.0
                          : static_cast<double>(gy) * (dm.height - 1) /
                                (g.gh - 1);
    for (int gx = 0; gx < g.gw; ++gx) {
      const double px = g.gw == 1
                            ? 0.0
                            : static_cast<double>(gx) * (dm.width - 1) /
                                  (g.gw - 1);
      // bilinear in log space at the node's image position
      const int x0 = std::min(static_cast<int>(px), dm.width - 2);
      const int y0 = std::min(static_cast<int>(py), dm.height - 2);
      const double fx = px - x0, fy = py - y0;
      const double l00 = std::log(dm.at(x0, y0));
      const double l10 = std::log(dm.at(x0 + 1, y0));
      const double l01 = std::log(dm.at(x0, y0 + 1));
      const double l11 = std::log(dm.at(x0 + 1, y0 + 1));
      g.log_depth[g.index(gx, gy)] = (1 - fy) * ((1 - fx) * l00 + fx * l10) +
                                     fy * ((1 - fx) * l01 + fx * l11);
    }
  }
  return g;
}

GridWeights DepthGrid::weights_at(const PixelPoint& p) const {
  if (!(p.x >= 0.0 && p.x <= width - 1 && p.y >= 0.0 && p.y <= height - 1)) {
    throw ValidationError("grid lookup at (" + std::to_string(p.x) + ", " +
                          std::to_string(p.y) + ") outside the image");
  }
  const double gx = p.x * (gw - 1) / (width - 1);
  const double gy = p.y * (gh - 1) / (height - 1);
  const int x0 = std::min(static_cast<int>(gx), gw - 2);
  const int y0 = std::min(static_cast<int>(gy), gh - 2);
  const double fx = gx - x0, fy = gy - y0;
  GridWeights out;
  out.node = {index(x0, y0), index(x0 + 1, y0), index(x0, y0 + 1),
              index(x0 + 1, y0 + 1)};
  out.w = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  return out;
}

double DepthGrid::log_at(const PixelPoint& p) const {
  const GridWeights gw4 = weights_at(p);
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) acc += gw4.w[i] * log_depth[gw4.node[i]];
  return acc;
}

double DepthGrid::depth_at(const PixelPoint& p) const {
  return std::exp(log_at(p));
}

DepthMap DepthGrid::upsample() const {
  DepthMap dm(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      dm.at(x, y) = depth_at(
          PixelPoint{static_cast<double>(x), static_cast<double>(y)});
    }
  }
  return dm;
}

void DepthGrid::validate() const {
  if (width < 2 || height < 2 || gw < 2 || gh < 2) {
    throw ValidationError("depth grid extents must be at least 2");
  }
  if (log_depth.size() != static_cast<std::size_t>(gw) * gh) {
    throw ValidationError("grid buffer size does not match node counts");
  }
  for (double v : log_depth) {
    if (!std::isfinite(v)) {
      throw ValidationError("grid log depths must be finite");
    }
  }
}

std::vector<PoseSE3> FrameBundle::poses() const {
  std::vector<PoseSE3> out;
  out.reserve(twists.size());
  for (const Twist& t : twists) out.push_back(se3_exp(t));
  return out;
}

void FrameBundle::validate() const {
  target.validate();
  if (sources.empty()) {
    throw ValidationError("bundle needs at least one source frame");
  }
  for (const Image& s : sources) {
    s.validate();
    if (s.width != target.width || s.height != target.height ||
        s.channels != target.channels) {
      throw ValidationError("source frames must match the target's shape");
    }
  }
  if (twists.size() != sources.size()) {
    throw ValidationError("bundle needs exactly one twist per source");
  }
  for (const Twist& t : twists) {
    if (!t.finite()) throw ValidationError("twists must be finite");
  }
  k.validate(target.width, target.height);
  grid.validate();
  if (grid.width != target.width || grid.height != target.height) {
    throw ValidationError("grid extent does not match the target frame");
  }
  for (const Keypoint& kp : keypoints.points) {
    if (kp.x < 0 || kp.x >= target.width || kp.y < 0 ||
        kp.y >= target.height) {
      throw ValidationError("keypoint outside the target frame");
    }
  }
  for (const Superpixel& sp : regions) {
    for (const auto& [x, y] : sp.pixels) {
      if (x < 0 || x >= target.width || y < 0 || y >= target.height) {
        throw ValidationError("region pixel outside the target frame");
      }
    }
  }
}

}  // namespace patchdepth
