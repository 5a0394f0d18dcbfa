#pragma once

#include <Eigen/Core>
#include <vector>

#include "patchdepth/geometry.hpp"
#include "patchdepth/types.hpp"

namespace patchdepth {

struct DepthMetrics {
  double rms = 0.0;
  double rel = 0.0;     // mean |pred - gt| / gt
  double log10 = 0.0;   // mean |log10 pred - log10 gt|
  double delta1 = 0.0;  // fraction with max(pred/gt, gt/pred) < 1.25
  double delta2 = 0.0;  // ... < 1.25^2
  double delta3 = 0.0;  // ... < 1.25^3
  double scale = 1.0;   // median-ratio factor applied to pred
  int pixels = 0;       // common valid pixels scored
};

// Scores pred against gt over the pixels valid in both maps. With
// median_scale, pred is first multiplied by median(gt) / median(pred)
// (upper medians for even counts), removing the global scale ambiguity of
// monocular refinement. Throws InsufficientDataError when no pixel is valid
// in both.
DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt,
                           bool median_scale);

struct NormalMap {
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector3d> n;
  std::vector<bool> valid;

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
};

// Per-pixel surface normals from a plane fit of the backprojected window
// around each pixel. Normals are unit length, oriented to face the viewer
// (nonnegative z). Border pixels without a full window are invalid, as are
// pixels with fewer than 3 valid neighbors or a degenerate fit.
NormalMap normals_from_depth(const DepthMap& depth, const Intrinsics& k,
                             int window);

struct NormalMetrics {
  double mean_angle = 0.0;  // degrees
  double pct_11_25 = 0.0;   // fraction of angles < 11.25 degrees
  double pct_22_5 = 0.0;
  double pct_30 = 0.0;
  int pixels = 0;
};

// Angular agreement of the normal maps derived from pred and gt, over pixels
// where both normals exist. Throws InsufficientDataError when none do.
NormalMetrics normal_metrics(const DepthMap& pred, const DepthMap& gt,
                             const Intrinsics& k, int window);

struct PoseMetrics {
  double rot_deg = 0.0;       // angle of R_est R_gt^T
  double tr_angle_deg = 0.0;  // angle between the translation directions
  double tr_cm = 0.0;         // |s t_est - t_gt| in centimeters, with s
                              // matching the gt length
};

// Compares an estimated pose against ground truth. The translation metrics
// need both translations to be nonzero; otherwise throws ValidationError.
PoseMetrics pose_metrics(const PoseSE3& est, const PoseSE3& gt);

}  // namespace patchdepth
