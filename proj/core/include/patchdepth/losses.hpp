#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

#include "patchdepth/bundle.hpp"
#include "patchdepth/planes.hpp"

namespace patchdepth {

// Nine samples of an image patch, channel values per sample. Samples can be
// individually invalid (off-image or behind the camera after warping).
struct PatchSample {
  std::array<std::array<double, 3>, 9> values{};
  std::array<bool, 9> valid{};
  int channels = 1;
};

// Structural similarity between the samples valid in both patches, with
// population statistics over those samples and the usual stabilizers for
// unit-range data (C1 = 0.01^2, C2 = 0.03^2), averaged over channels.
// Throws DegeneratePatchError with fewer than 2 common samples. Result lies
// in [-1, 1].
double ssim_patch(const PatchSample& a, const PatchSample& b);

// (1 - ssim) / 2 clamped to [0, 1].
double ssim_dissimilarity(const PatchSample& a, const PatchSample& b);

struct PhotoOptions {
  double alpha = 0.85;       // ssim weight; L1 gets 1 - alpha
  int window = 3;            // support sample spread in pixels
  int min_valid = 6;         // samples required to keep a (point, source)
};

// One keypoint scored against one source.
struct PatchTerm {
  double value = 0.0;
  bool valid = false;
  double d_depth = 0.0;                // d value / d center depth
  Eigen::Matrix<double, 6, 1> d_twist  // d value / d left increment on pose
      = Eigen::Matrix<double, 6, 1>::Zero();
  // finite-difference safety margins
  double min_abs_residual = 0.0;  // smallest |b - a| among used samples
  double min_border_dist = 0.0;   // closest approach to the validity border
};

PatchTerm eval_patch_term(const Image& target, const Image& source,
                          const SupportDomain& dom, double depth,
                          const Intrinsics& k, const PoseSE3& pose,
                          const PhotoOptions& opt, bool with_grad);

struct PhotometricResult {
  double value = 0.0;
  int surviving = 0;
  // index of the winning source per keypoint, -1 where every source failed
  std::vector<int> point_source;
  // per surviving keypoint, d value / d keypoint depth (0 for dropped ones)
  std::vector<double> d_depth;
  std::vector<Eigen::Matrix<double, 6, 1>> d_twist;  // per source
  double min_abs_residual = 0.0;
  double min_border_dist = 0.0;
  double min_source_gap = 0.0;  // runner-up minus winner over keypoints
};

// Patch photometric distance per keypoint, minimum over sources, mean over
// the keypoints that kept at least one source. Throws NoOverlapError when
// nothing survives.
PhotometricResult photometric_loss(const Image& target,
                                   const std::vector<Image>& sources,
                                   const std::vector<Keypoint>& keypoints,
                                   const std::vector<double>& depths,
                                   const Intrinsics& k,
                                   const std::vector<PoseSE3>& poses,
                                   const PhotoOptions& opt, bool with_grad);

struct SmoothnessResult {
  double value = 0.0;
  std::vector<double> grad;  // dL/dD per pixel
  double min_abs_residual = 0.0;  // smallest |depth difference| used
};

/// Edge-aware first-order smoothness on mean-normalized depth: forward
// differences weighted by exp(-|forward luminance difference|), averaged
// over the (W-1)x(H-1) stencil positions. Scale-invariant thanks to the
// normalization; the gradient carries the mean-depth dependence.
SmoothnessResult smoothness_loss(const DepthMap& depth, const Image& image,
                                 bool with_grad);

struct TotalLossOptions {
  double alpha = 0.85;
  double lambda_smooth = 0.001;
  double lambda_planar = 0.05;
  int window = 3;
  int min_valid = 6;
  double spp_eps = 1e-4;
  bool spp_raw_sum = false;
};

struct LossBreakdown {
  double photometric = 0.0;
  double smoothness = 0.0;
  double planar = 0.0;
  double total = 0.0;
  int surviving_points = 0;
  std::vector<int> point_source;
};

struct LossGradients {
  std::vector<double> grid;  // d total / d log-depth node
  std::vector<Eigen::Matrix<double, 6, 1>> twists;
};

struct LossDiagnostics {
  double min_abs_residual = 0.0;
  double min_border_dist = 0.0;
  double min_source_gap = 0.0;
};

struct TotalLossResult {
  LossBreakdown breakdown;
  LossGradients grads;
  LossDiagnostics diag;
  std::vector<RegionPlane> planes;  // the fits used by the planar term
};

// Full objective with analytic gradients for every grid node and twist.
// Plane parameters are refit from the current depth and treated as constants
// inside the gradient (alternating minimization).
TotalLossResult total_loss_and_grad(const FrameBundle& bundle,
                                    const TotalLossOptions& opt);

// Value-only twin for finite differencing. Plane parameters must be pinned
// to the linearization point, otherwise the numeric derivative would include
// the refit response that the analytic gradient deliberately leaves out.
double total_loss_value(const FrameBundle& bundle, const TotalLossOptions& opt,
                        const std::vector<RegionPlane>& frozen_planes);

}  // namespace patchdepth
