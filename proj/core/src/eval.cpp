#include "patchdepth/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "patchdepth/errors.hpp"
#include "patchdepth/planes.hpp"

namespace patchdepth {

namespace {

double upper_median(std::vector<double>& values) {
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  return values[mid];
}

}  // namespace

DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt,
                           bool median_scale) {
  pred.validate();
  gt.validate();
  if (pred.width != gt.width || pred.height != gt.height) {
    throw ValidationError("depth maps to compare must match in size");
  }

  std::vector<std::size_t> common;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const int x = static_cast<int>(i) % gt.width;
    const int y = static_cast<int>(i) / gt.width;
    if (pred.valid_at(x, y) && gt.valid_at(x, y)) common.push_back(i);
  }
  if (common.empty()) {
    throw InsufficientDataError("no pixel is valid in both depth maps");
  }

  DepthMetrics m;
  m.pixels = static_cast<int>(common.size());
  if (median_scale) {
    std::vector<double> vp, vg;
    vp.reserve(common.size());
    vg.reserve(common.size());
    for (std::size_t i : common) {
      vp.push_back(pred.data[i]);
      vg.push_back(gt.data[i]);
    }
    m.scale = upper_median(vg) / upper_median(vp);
  }

  double sum_rel = 0.0, sum_sq = 0.0, sum_log = 0.0;
  int d1 = 0, d2 = 0, d3 = 0;
  for (std::size_t i : common) {
    const double p = pred.data[i] * m.scale;
    const double g = gt.data[i];
    sum_rel += std::abs(p - g) / g;
    sum_sq += (p - g) * (p - g);
    sum_log += std::abs(std::log10(p) - std::log10(g));
    const double ratio = std::max(p / g, g / p);
    d1 += ratio < 1.25;
    d2 += ratio < 1.25 * 1.25;
    d3 += ratio < 1.25 * 1.25 * 1.25;
  }
  const double n = static_cast<double>(common.size());
  m.rel = sum_rel / n;
  m.rms = std::sqrt(sum_sq / n);
  m.log10 = sum_log / n;
  m.delta1 = d1 / n;
  m.delta2 = d2 / n;
  m.delta3 = d3 / n;
  return m;
}

NormalMap normals_from_depth(const DepthMap& depth, const Intrinsics& k,
                             int window) {
  depth.validate();
  if (window < 3 || window % 2 == 0) {
    throw ValidationError("normal fits need an odd window of at least 3");
  }
  NormalMap out;
  out.width = depth.width;
  out.height = depth.height;
  out.n.assign(depth.data.size(), Eigen::Vector3d::Zero());
  out.valid.assign(depth.data.size(), false);

  const int r = window / 2;
  std::vector<Eigen::Vector3d> pts;
  for (int y = r; y < depth.height - r; ++y) {
    for (int x = r; x < depth.width - r; ++x) {
      pts.clear();
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int u = x + dx, v = y + dy;
          if (!depth.valid_at(u, v)) continue;
          pts.push_back(backproject(PixelPoint{static_cast<double>(u),
                                               static_cast<double>(v)},
                                    depth.data[depth.index(u, v)], k));
        }
      }
      if (pts.size() < 3) continue;
      const PlaneParams plane = fit_plane(pts, 1e-9);
      const double norm = plane.a.norm();
      if (!plane.a.allFinite() || norm < 1e-12) continue;
      Eigen::Vector3d n = plane.a / norm;
      if (n.z() < 0.0) n = -n;
      const std::size_t i = out.index(x, y);
      out.n[i] = n;
      out.valid[i] = true;
    }
  }
  return out;
}

NormalMetrics normal_metrics(const DepthMap& pred, const DepthMap& gt,
                             const Intrinsics& k, int window) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw ValidationError("depth maps to compare must match in size");
  }
  const NormalMap np = normals_from_depth(pred, k, window);
  const NormalMap ng = normals_from_depth(gt, k, window);

  NormalMetrics m;
  for (std::size_t i = 0; i < np.n.size(); ++i) {
    if (!np.valid[i] || !ng.valid[i]) continue;
    const double c = std::clamp(np.n[i].dot(ng.n[i]), -1.0, 1.0);
    const double angle = std::acos(c) * 180.0 / std::numbers::pi;
    m.mean_angle += angle;
    m.pct_11_25 += angle < 11.25;
    m.pct_22_5 += angle < 22.5;
    m.pct_30 += angle < 30.0;
    ++m.pixels;
  }
  if (m.pixels == 0) {
    throw InsufficientDataError("no pixel has a normal in both maps");
  }
  const double n = static_cast<double>(m.pixels);
  m.mean_angle /= n;
  m.pct_11_25 /= n;
  m.pct_22_5 /= n;
  m.pct_30 /= n;
  return m;
}

PoseMetrics pose_metrics(const PoseSE3& est, const PoseSE3& gt) {
  PoseMetrics m;
  const Eigen::Matrix3d rel = est.rotation * gt.rotation.transpose();
  const double cos_angle =
      std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  m.rot_deg = std::acos(cos_angle) * 180.0 / std::numbers::pi;

  const double ne = est.translation.norm();
  const double ng = gt.translation.norm();
  if (ne < 1e-12 || ng < 1e-12) {
    throw ValidationError(
        "translation metrics are undefined for zero translations");
  }
  const double cos_t =
      std::clamp(est.translation.dot(gt.translation) / (ne * ng), -1.0, 1.0);
  m.tr_angle_deg = std::acos(cos_t) * 180.0 / std::numbers::pi;
  const double s = ng / ne;
  m.tr_cm = (s * est.translation - gt.translation).norm() * 100.0;
  return m;
}

}  // namespace patchdepth
