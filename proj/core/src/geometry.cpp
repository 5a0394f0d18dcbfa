#include "patchdepth/geometry.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace patchdepth {

namespace {
// Below this angle the trig coefficient ratios are evaluated by their Taylor
// expansions. 1e-8 rad keeps every branch well inside double precision.
constexpr double kSmallAngle = 1e-8;

Eigen::Vector3d vee(const Eigen::Matrix3d& m) {
  return Eigen::Vector3d(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0),
                         m(1, 0) - m(0, 1));
}
}  // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return m;
}

double PoseSE3::rigidity_error() const {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  double err = (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  err += std::abs(rotation.determinant() - 1.0);
  if (!translation.allFinite()) err = std::numeric_limits<double>::infinity();
  return err;
}

PoseSE3 PoseSE3::orthonormalized() const {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  return PoseSE3{q.toRotationMatrix(), translation};
}

PoseSE3 se3_exp(const Twist& xi) {
  const double theta2 = xi.w.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d wx = skew(xi.w);
  const Eigen::Matrix3d wx2 = wx * wx;

  // a = sin(t)/t, b = (1-cos(t))/t^2, c = (t-sin(t))/t^3. The closed forms
  // cancel badly for small t (1-cos loses half the mantissa), so switch to
  // the series well above the representability limit; at 1e-4 the truncated
  // terms are below 1e-17 relative.
  double a, b, c;
  if (theta < 1e-4) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
    c = (1.0 - a) / theta2;
  }

  PoseSE3 out;
  out.rotation = Eigen::Matrix3d::Identity() + a * wx + b * wx2;
  const Eigen::Matrix3d v_mat = Eigen::Matrix3d::Identity() + b * wx + c * wx2;
  out.translation = v_mat * xi.v;
  return out;
}

Twist se3_log(const PoseSE3& pose) {
  if (pose.rigidity_error() > 1e-6) {
    throw ValidationError("se3_log: rotation part is not orthonormal");
  }
  const Eigen::Matrix3d& r = pose.rotation;
  // vee(R - R^T) has norm 2 sin(theta); together with the trace this gives a
  // well-conditioned angle everywhere, unlike a bare acos near pi.
  const Eigen::Vector3d anti = vee(r);
  const double sin_theta = std::clamp(0.5 * anti.norm(), 0.0, 1.0);
  const double cos_theta = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::atan2(sin_theta, cos_theta);
  const double theta2 = theta * theta;

  Eigen::Vector3d w;
  if (theta < kSmallAngle) {
    // w = vee(R - R^T)/2 * (1 + theta^2/6 + ...)
    w = 0.5 * anti * (1.0 + theta2 / 6.0);
  } else if (theta > std::numbers::pi - 1e-6) {
    // Near pi the antisymmetric part vanishes; recover the axis from the
    // symmetric part instead. nn^T = I + (R + R^T - 2I) / (2 (1 - cos)).
    const Eigen::Matrix3d nnt =
        Eigen::Matrix3d::Identity() +
        (r + r.transpose() - 2.0 * Eigen::Matrix3d::Identity()) /
            (2.0 * (1.0 - cos_theta));
    int imax = 0;
    nnt.diagonal().maxCoeff(&imax);
    Eigen::Vector3d n = nnt.col(imax) / std::sqrt(nnt(imax, imax));
    // Fix the sign using the (tiny but directional) antisymmetric part; at
    // exactly pi both signs describe the same rotation.
    if (n.dot(anti) < 0.0) n = -n;
    w = theta * n;
  } else {
    w = theta / (2.0 * sin_theta) * anti;
  }

  // V^{-1} = I - W/2 + d W^2 with d = (1 - a/(2b)) / theta^2. The closed
  // form loses all precision below theta ~ 1e-2 (three nested cancellations),
  // so the series carries much further than the exp side.
  const Eigen::Matrix3d wx = skew(w);
  double d;
  if (theta < 0.1) {
    d = 1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0;
  } else {
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / theta2;
    d = (1.0 - a / (2.0 * b)) / theta2;
  }
  const Eigen::Matrix3d v_inv =
      Eigen::Matrix3d::Identity() - 0.5 * wx + d * wx * wx;

  return Twist{v_inv * pose.translation, w};
}

PoseSE3 pose_compose(const PoseSE3& a, const PoseSE3& b) {
  return PoseSE3{a.rotation * b.rotation,
                 a.rotation * b.translation + a.translation};
}

PoseSE3 pose_inverse(const PoseSE3& a) {
  PoseSE3 out;
  out.rotation = a.rotation.transpose();
  out.translation = -(out.rotation * a.translation);
  return out;
}

Eigen::Vector3d backproject(const PixelPoint& p, double depth,
                            const Intrinsics& k) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    throw ValidationError("backproject: depth must be positive, got " +
                          std::to_string(depth));
  }
  return Eigen::Vector3d((p.x - k.cx) / k.fx * depth,
                         (p.y - k.cy) / k.fy * depth, depth);
}

Projection project(const Eigen::Vector3d& x, const Intrinsics& k) {
  if (x.z() <= kCheiralityEps) {
    throw CheiralityError("project: point at z=" + std::to_string(x.z()) +
                          " is behind the camera");
  }
  Projection out;
  out.pixel.x = k.fx * x.x() / x.z() + k.cx;
  out.pixel.y = k.fy * x.y() / x.z() + k.cy;
  out.depth = x.z();
  return out;
}

SupportDomain support_domain(const PixelPoint& center, int n) {
  if (n < 1) {
    throw ValidationError("support_domain: spread must be >= 1, got " +
                          std::to_string(n));
  }
  SupportDomain dom;
  dom.center = center;
  dom.spread = n;
  int idx = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      dom.samples[idx++] =
          PixelPoint{center.x + dx * n, center.y + dy * n};
    }
  }
  return dom;
}

WarpedPoint warp_point(const PixelPoint& p, double depth, const Intrinsics& k,
                       const PoseSE3& pose, const ImageExtent& dest) {
  const Eigen::Vector3d x = backproject(p, depth, k);
  const Eigen::Vector3d xp = pose.apply(x);
  WarpedPoint out;
  if (xp.z() <= kCheiralityEps) {
    return out;  // behind the destination camera
  }
  out.pixel.x = k.fx * xp.x() / xp.z() + k.cx;
  out.pixel.y = k.fy * xp.y() / xp.z() + k.cy;
  out.depth = xp.z();
  out.valid = dest.contains(out.pixel);
  return out;
}

int WarpedPatch::valid_count() const {
  int n = 0;
  for (bool v : valid) n += v ? 1 : 0;
  return n;
}

WarpedPatch warp_patch(const SupportDomain& dom, double center_depth,
                       const Intrinsics& k, const PoseSE3& pose,
                       const ImageExtent& dest) {
  WarpedPatch out;
  for (int i = 0; i < 9; ++i) {
    const WarpedPoint wp =
        warp_point(dom.samples[i], center_depth, k, pose, dest);
    out.points[i] = wp.pixel;
    out.depths[i] = wp.depth;
    out.valid[i] = wp.valid;
  }
  return out;
}

namespace {
// Shared cell lookup. Returns false when p is outside the image (or the
// image is degenerate in a direction, handled by collapsing that axis).
struct Cell {
  int x0, y0, x1, y1;
  double fx, fy;
};

bool locate(const Image& img, const PixelPoint& p, Cell& c) {
  if (!(p.x >= 0.0 && p.x <= img.width - 1 && p.y >= 0.0 &&
        p.y <= img.height - 1)) {
    return false;  // also rejects NaN
  }
  if (img.width == 1) {
    c.x0 = c.x1 = 0;
    c.fx = 0.0;
  } else {
    c.x0 = std::min(static_cast<int>(std::floor(p.x)), img.width - 2);
    c.x1 = c.x0 + 1;
    c.fx = p.x - c.x0;
  }
  if (img.height == 1) {
    c.y0 = c.y1 = 0;
    c.fy = 0.0;
  } else {
    c.y0 = std::min(static_cast<int>(std::floor(p.y)), img.height - 2);
    c.y1 = c.y0 + 1;
    c.fy = p.y - c.y0;
  }
  return true;
}
}  // namespace

SampleResult bilinear_sample(const Image& img, const PixelPoint& p) {
  SampleResult out;
  Cell c;
  if (img.empty() || !locate(img, p, c)) return out;
  for (int ch = 0; ch < img.channels; ++ch) {
    const double top = (1.0 - c.fx) * img.at(c.x0, c.y0, ch) +
                       c.fx * img.at(c.x1, c.y0, ch);
    const double bot = (1.0 - c.fx) * img.at(c.x0, c.y1, ch) +
                       c.fx * img.at(c.x1, c.y1, ch);
    out.value[ch] = (1.0 - c.fy) * top + c.fy * bot;
  }
  out.valid = true;
  return out;
}

SampleGrad bilinear_sample_grad(const Image& img, const PixelPoint& p) {
  SampleGrad out;
  Cell c;
  if (img.empty() || !locate(img, p, c)) return out;
  for (int ch = 0; ch < img.channels; ++ch) {
    const double v00 = img.at(c.x0, c.y0, ch);
    const double v10 = img.at(c.x1, c.y0, ch);
    const double v01 = img.at(c.x0, c.y1, ch);
    const double v11 = img.at(c.x1, c.y1, ch);
    const double top = (1.0 - c.fx) * v00 + c.fx * v10;
    const double bot = (1.0 - c.fx) * v01 + c.fx * v11;
    out.value[ch] = (1.0 - c.fy) * top + c.fy * bot;
    out.dx[ch] = (1.0 - c.fy) * (v10 - v00) + c.fy * (v11 - v01);
    out.dy[ch] = bot - top;
  }
  out.valid = true;
  return out;
}

}  // namespace patchdepth
