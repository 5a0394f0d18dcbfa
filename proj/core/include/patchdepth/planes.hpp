#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <vector>

#include "patchdepth/superpixels.hpp"
#include "patchdepth/types.hpp"

namespace patchdepth {

// Plane in the a^T X = 1 parameterization. Planes through the camera origin
// cannot be represented, which is fine: such planes project to a line and
// carry no depth information anyway.
struct PlaneParams {
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
};

// Ridge-regularized least squares a = (P^T P + eps I)^-1 P^T 1. Throws
// InsufficientDataError with fewer than 3 points; eps must be positive to
// keep the normal equations solvable for degenerate point sets.
PlaneParams fit_plane(std::span<const Eigen::Vector3d> points, double eps);

// Depth at which the pixel's ray meets the plane: 1 / (a^T K^-1 p_h).
// Rays parallel to the plane or meeting it behind the camera give
// denominators below 1e-6 and come back empty.
std::optional<double> planar_depth(const PlaneParams& plane,
                                   const Intrinsics& k, const PixelPoint& p);

// One region's fitted plane. ok is false when the region had fewer than 3
// usable pixels and therefore no plane.
struct RegionPlane {
  int region_id = -1;
  PlaneParams params;
  bool ok = false;
  int support = 0;  // pixels that entered the fit
};

// Fits each region's plane to the backprojected depth of its valid pixels.
std::vector<RegionPlane> fit_region_planes(
    const DepthMap& depth, const std::vector<Superpixel>& regions,
    const Intrinsics& k, double eps);

struct SppOptions {
  double eps = 1e-4;     // ridge strength for the per-region fits
  bool raw_sum = false;  // skip both the per-pixel and per-region averaging
};

struct SppResult {
  double value = 0.0;
  // dL/dD per pixel, full resolution, zero where no region term touches the
  // pixel. Plane parameters are held fixed in this derivative; the fit is
  // refreshed from the current depth on the next evaluation instead of being
  // differentiated through.
  std::vector<double> grad;
  int regions_used = 0;
  // per input region, mean |D - D'| over its contributing pixels (NaN when
  // the region was skipped); used for reports
  std::vector<double> region_residuals;
  // smallest |D - D'| seen, for finite-difference safety margins
  double min_abs_residual = 0.0;
};

// Plane-prior loss against the supplied per-region planes.
SppResult spp_loss_with_planes(const DepthMap& depth,
                               const std::vector<Superpixel>& regions,
                               const Intrinsics& k,
                               const std::vector<RegionPlane>& planes,
                               const SppOptions& opt);

// Convenience wrapper: fit, then score against the fresh fits.
SppResult spp_loss(const DepthMap& depth,
                   const std::vector<Superpixel>& regions, const Intrinsics& k,
                   const SppOptions& opt);

}  // namespace patchdepth
