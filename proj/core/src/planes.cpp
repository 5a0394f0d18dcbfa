#include "patchdepth/planes.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <string>

#include "patchdepth/geometry.hpp"

namespace patchdepth {

PlaneParams fit_plane(std::span<const Eigen::Vector3d> points, double eps) {
  if (points.size() < 3) {
    throw InsufficientDataError("fit_plane: need >= 3 points, got " +
                                std::to_string(points.size()));
  }
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw ValidationError("fit_plane: ridge eps must be positive");
  }
  Eigen::Matrix3d ata = eps * Eigen::Matrix3d::Identity();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  for (const Eigen::Vector3d& p : points) {
    ata.noalias() += p * p.transpose();
    atb += p;
  }
  // With eps > 0 the system is positive definite by construction.
  return PlaneParams{ata.ldlt().solve(atb)};
}

std::optional<double> planar_depth(const PlaneParams& plane,
                                   const Intrinsics& k, const PixelPoint& p) {
  const Eigen::Vector3d ray((p.x - k.cx) / k.fx, (p.y - k.cy) / k.fy, 1.0);
  const double denom = plane.a.dot(ray);
  if (denom < 1e-6) return std::nullopt;
  return 1.0 / denom;
}

std::vector<RegionPlane> fit_region_planes(
    const DepthMap& depth, const std::vector<Superpixel>& regions,
    const Intrinsics& k, double eps) {
  std::vector<RegionPlane> out;
  out.reserve(regions.size());
  std::vector<Eigen::Vector3d> pts;
  for (const Superpixel& region : regions) {
    RegionPlane rp;
    rp.region_id = region.id;
    pts.clear();
    pts.reserve(region.pixels.size());
    for (const auto& [x, y] : region.pixels) {
      if (!depth.valid_at(x, y)) continue;
      pts.push_back(backproject(
          PixelPoint{static_cast<double>(x), static_cast<double>(y)},
          depth.at(x, y), k));
    }
    rp.support = static_cast<int>(pts.size());
    if (rp.support >= 3) {
      rp.params = fit_plane(pts, eps);
      rp.ok = true;
    }
    out.push_back(rp);
  }
  return out;
}

SppResult spp_loss_with_planes(const DepthMap& depth,
                               const std::vector<Superpixel>& regions,
                               const Intrinsics& k,
                               const std::vector<RegionPlane>& planes,
                               const SppOptions& opt) {
  if (planes.size() != regions.size()) {
    throw ValidationError("spp_loss: one plane entry per region required");
  }
  SppResult res;
  res.grad.assign(depth.data.size(), 0.0);
  res.region_residuals.assign(regions.size(),
                              std::numeric_limits<double>::quiet_NaN());
  res.min_abs_residual = std::numeric_limits<double>::infinity();

  // First pass per region: residual sum and its pixel count. Gradients use
  // sign(D - D'): the plane parameters are constants here.
  struct Contribution {
    std::size_t pixel;
    double sign;
  };
  std::vector<Contribution> contribs;
  double total = 0.0;
  for (std::size_t ri = 0; ri < regions.size(); ++ri) {
    if (!planes[ri].ok) continue;
    const Superpixel& region = regions[ri];
    contribs.clear();
    double sum = 0.0;
    for (const auto& [x, y] : region.pixels) {
      if (!depth.valid_at(x, y)) continue;
      const std::optional<double> dp = planar_depth(
          planes[ri].params, k,
          PixelPoint{static_cast<double>(x), static_cast<double>(y)});
      if (!dp) continue;
      const double r = depth.at(x, y) - *dp;
      sum += std::abs(r);
      res.min_abs_residual = std::min(res.min_abs_residual, std::abs(r));
      contribs.push_back({depth.index(x, y), r >= 0.0 ? 1.0 : -1.0});
    }
    if (contribs.empty()) continue;
    ++res.regions_used;
    const double n = static_cast<double>(contribs.size());
    res.region_residuals[ri] = sum / n;
    if (opt.raw_sum) {
      total += sum;
      for (const Contribution& c : contribs) res.grad[c.pixel] += c.sign;
    } else {
      total += sum / n;
      for (const Contribution& c : contribs) res.grad[c.pixel] += c.sign / n;
    }
  }

  if (res.regions_used == 0) {
    res.value = 0.0;
    res.min_abs_residual = 0.0;
    return res;
  }
  if (opt.raw_sum) {
    res.value = total;
  } else {
    const double m = static_cast<double>(res.regions_used);
    res.value = total / m;
    for (double& g : res.grad) g /= m;
  }
  return res;
}

SppResult spp_loss(const DepthMap& depth,
                   const std::vector<Superpixel>& regions, const Intrinsics& k,
                   const SppOptions& opt) {
  return spp_loss_with_planes(depth, regions, k,
                              fit_region_planes(depth, regions, k, opt.eps),
                              opt);
}

}  // namespace patchdepth
