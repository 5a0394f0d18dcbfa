#pragma once

#include <array>
#include <vector>

#include "patchdepth/geometry.hpp"
#include "patchdepth/keypoints.hpp"
#include "patchdepth/superpixels.hpp"
#include "patchdepth/types.hpp"

namespace patchdepth {

// Bilinear footprint of one image position in the grid.
struct GridWeights {
  std::array<std::size_t, 4> node;
  std::array<double, 4> w;
};

// Coarse log-depth field, bilinearly upsampled to image resolution with the
// align-corners convention (grid node 0 sits on pixel 0, node gw-1 on pixel
// W-1). Optimizing log depth keeps the map positive and makes multiplicative
// depth errors additive.
struct DepthGrid {
  int width = 0;   // image-space extent served by this grid
  int height = 0;
  int gw = 0;
  int gh = 0;
  std::vector<double> log_depth;  // gh x gw, row-major

  // Node counts are ceil(dim / scale), floored at 2 so interpolation always
  // has a cell.
  static DepthGrid make(int width, int height, int scale, double depth);

  // Grid sampled from an existing depth map at the node positions.
  static DepthGrid from_depth_map(const DepthMap& dm, int scale);

  std::size_t index(int gx, int gy) const {
    return static_cast<std::size_t>(gy) * gw + gx;
  }

  // Footprint of a continuous image position; throws ValidationError if the
  // position leaves the image domain.
  GridWeights weights_at(const PixelPoint& p) const;

  double log_at(const PixelPoint& p) const;
  double depth_at(const PixelPoint& p) const;

  DepthMap upsample() const;

  void validate() const;
};

// One optimization problem: a target frame, its source frames, and the
// variables (log-depth grid, one twist per source giving the target-to-source
// transform as se3_exp(twist)).
struct FrameBundle {
  Image target;
  std::vector<Image> sources;
  Intrinsics k;
  KeypointSet keypoints;
  std::vector<Superpixel> regions;
  DepthGrid grid;
  std::vector<Twist> twists;

  std::vector<PoseSE3> poses() const;

  // Structural coherence: matching extents, one twist per source, at least
  // one source, keypoints inside the image. The library accepts any source
  // count >= 1; the command line restricts itself to 2 or 4.
  void validate() const;
};

}  // namespace patchdepth
