#pragma once

#include <Eigen/Core>
#include <array>

#include "patchdepth/types.hpp"

namespace patchdepth {

// Camera-space points with z below this are treated as behind the camera.
inline constexpr double kCheiralityEps = 1e-8;

// se(3) increment, linear velocity first.
struct Twist {
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d w = Eigen::Vector3d::Zero();

  Eigen::Matrix<double, 6, 1> vec() const {
    Eigen::Matrix<double, 6, 1> out;
    out << v, w;
    return out;
  }
  static Twist from_vec(const Eigen::Matrix<double, 6, 1>& m) {
    return Twist{m.head<3>(), m.tail<3>()};
  }
  bool finite() const { return v.allFinite() && w.allFinite(); }
};

// Rigid transform X' = R X + t mapping target-camera coordinates into a
// source camera.
struct PoseSE3 {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static PoseSE3 identity() { return PoseSE3{}; }
  Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
    return rotation * x + translation;
  }
  // max-norm deviation of R^T R from identity plus |det - 1|.
  double rigidity_error() const;
  // Snaps rotation to the nearest orthonormal matrix (via quaternion).
  PoseSE3 orthonormalized() const;
};

Eigen::Matrix3d skew(const Eigen::Vector3d& w);

// Exponential map with second-order Taylor fallback below 1e-8 rad, so the
// zero twist maps exactly to the identity.
PoseSE3 se3_exp(const Twist& xi);

// Inverse of se3_exp. Valid for rotation angles in [0, pi]; throws
// ValidationError if the rotation part is not orthonormal.
Twist se3_log(const PoseSE3& pose);

PoseSE3 pose_compose(const PoseSE3& a, const PoseSE3& b);
PoseSE3 pose_inverse(const PoseSE3& a);

// Pixel + depth -> camera point. Throws ValidationError on non-positive depth.
Eigen::Vector3d backproject(const PixelPoint& p, double depth,
                            const Intrinsics& k);

struct Projection {
  PixelPoint pixel;
  double depth = 0.0;
};

// Camera point -> pixel. Throws CheiralityError if z <= kCheiralityEps.
Projection project(const Eigen::Vector3d& x, const Intrinsics& k);

// 3x3 grid of pixel positions around a center at offsets {-n, 0, n}^2,
// row-major in (dy, dx); index 4 is the center itself.
struct SupportDomain {
  PixelPoint center;
  std::array<PixelPoint, 9> samples;
  int spread = 0;
};

SupportDomain support_domain(const PixelPoint& center, int n);

struct ImageExtent {
  int width = 0;
  int height = 0;

  bool contains(const PixelPoint& p) const {
    return p.x >= 0.0 && p.x <= width - 1 && p.y >= 0.0 && p.y <= height - 1;
  }
};

struct WarpedPoint {
  PixelPoint pixel;
  double depth = 0.0;  // depth in the destination camera
  bool valid = false;  // in front of the camera and inside the image
};

// Lift p with the given depth, apply the pose, reproject. Instead of
// throwing, cheirality failures and out-of-bounds landings are reported
// through the valid flag; the pixel is still filled in when the point
// projects at all (it is (0,0) for cheirality failures).
WarpedPoint warp_point(const PixelPoint& p, double depth, const Intrinsics& k,
                       const PoseSE3& pose, const ImageExtent& dest);

struct WarpedPatch {
  std::array<PixelPoint, 9> points;
  std::array<double, 9> depths;
  std::array<bool, 9> valid;

  int valid_count() const;
};

// Warps all nine support samples with the center's depth shared across the
// patch, which is what makes the support domain a rigid template rather than
// nine independent correspondences.
WarpedPatch warp_patch(const SupportDomain& dom, double center_depth,
                       const Intrinsics& k, const PoseSE3& pose,
                       const ImageExtent& dest);

struct SampleResult {
  std::array<double, 3> value{};
  bool valid = false;
};

// Bilinear interpolation over the four surrounding pixel centers. Positions
// outside [0, W-1] x [0, H-1] (or non-finite) are invalid. Exact on integer
// lattice positions.
SampleResult bilinear_sample(const Image& img, const PixelPoint& p);

struct SampleGrad {
  std::array<double, 3> value{};
  std::array<double, 3> dx{};
  std::array<double, 3> dy{};
  bool valid = false;
};

// Same plus the spatial derivative of the interpolant, which is piecewise
// constant per cell in each direction.
SampleGrad bilinear_sample_grad(const Image& img, const PixelPoint& p);

}  // namespace patchdepth
