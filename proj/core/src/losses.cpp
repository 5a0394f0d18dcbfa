#include "patchdepth/losses.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace patchdepth {

namespace {
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct SsimStats {
  double mu_a = 0.0, mu_b = 0.0;
  double var_a = 0.0, var_b = 0.0, cov = 0.0;
  int n = 0;
};

SsimStats channel_stats(const PatchSample& a, const PatchSample& b, int ch) {
  SsimStats s;
  for (int j = 0; j < 9; ++j) {
    if (!a.valid[j] || !b.valid[j]) continue;
    s.mu_a += a.values[j][ch];
    s.mu_b += b.values[j][ch];
    ++s.n;
  }
  if (s.n == 0) return s;
  s.mu_a /= s.n;
  s.mu_b /= s.n;
  for (int j = 0; j < 9; ++j) {
    if (!a.valid[j] || !b.valid[j]) continue;
    const double da = a.values[j][ch] - s.mu_a;
    const double db = b.values[j][ch] - s.mu_b;
    s.var_a += da * da;
    s.var_b += db * db;
    s.cov += da * db;
  }
  s.var_a /= s.n;
  s.var_b /= s.n;
  s.cov /= s.n;
  return s;
}

double ssim_from_stats(const SsimStats& s) {
  const double num = (2.0 * s.mu_a * s.mu_b + kC1) * (2.0 * s.cov + kC2);
  const double den = (s.mu_a * s.mu_a + s.mu_b * s.mu_b + kC1) *
                     (s.var_a + s.var_b + kC2);
  return num / den;
}
}  // namespace

double ssim_patch(const PatchSample& a, const PatchSample& b) {
  if (a.channels != b.channels) {
    throw ValidationError("ssim_patch: channel counts differ");
  }
  int common = 0;
  for (int j = 0; j < 9; ++j) {
    if (a.valid[j] && b.valid[j]) ++common;
  }
  if (common < 2) {
    throw DegeneratePatchError(
        "ssim_patch: need >= 2 common valid samples, got " +
        std::to_string(common));
  }
  double acc = 0.0;
  for (int ch = 0; ch < a.channels; ++ch) {
    acc += ssim_from_stats(channel_stats(a, b, ch));
  }
  return acc / a.channels;
}

double ssim_dissimilarity(const PatchSample& a, const PatchSample& b) {
  return std::clamp((1.0 - ssim_patch(a, b)) * 0.5, 0.0, 1.0);
}

PatchTerm eval_patch_term(const Image& target, const Image& source,
                          const SupportDomain& dom, double depth,
                          const Intrinsics& k, const PoseSE3& pose,
                          const PhotoOptions& opt, bool with_grad) {
  PatchTerm out;
  const int channels = target.channels;
  const ImageExtent ext{source.width, source.height};

  PatchSample pa, pb;
  pa.channels = pb.channels = channels;
  // per-sample geometry retained for the gradient chain
  std::array<Eigen::Vector3d, 9> rays;
  std::array<Eigen::Vector3d, 9> xp;           // source-camera points
  std::array<SampleGrad, 9> src_samples;
  double min_border = kInf;

  for (int j = 0; j < 9; ++j) {
    const PixelPoint& q = dom.samples[j];
    const SampleResult tv = bilinear_sample(target, q);
    if (!tv.valid) continue;

    const Eigen::Vector3d ray((q.x - k.cx) / k.fx, (q.y - k.cy) / k.fy, 1.0);
    const Eigen::Vector3d x = pose.rotation * (depth * ray) + pose.translation;
    if (x.z() <= kCheiralityEps) continue;
    const PixelPoint uv{k.fx * x.x() / x.z() + k.cx,
                        k.fy * x.y() / x.z() + k.cy};
    // signed distance to the validity border, negative outside
    const double border =
        std::min(std::min(uv.x, ext.width - 1 - uv.x),
                 std::min(uv.y, ext.height - 1 - uv.y));
    min_border = std::min(min_border, std::abs(border));
    const SampleGrad sv = bilinear_sample_grad(source, uv);
    if (!sv.valid) continue;

    pa.valid[j] = pb.valid[j] = true;
    for (int ch = 0; ch < channels; ++ch) {
      pa.values[j][ch] = tv.value[ch];
      pb.values[j][ch] = sv.value[ch];
    }
    rays[j] = ray;
    xp[j] = x;
    src_samples[j] = sv;
  }

  int nv = 0;
  for (int j = 0; j < 9; ++j) nv += pb.valid[j] ? 1 : 0;
  out.min_border_dist = min_border;
  if (nv < std::max(opt.min_valid, 2)) return out;

  // L1 over used samples and channels
  double l1 = 0.0;
  double min_res = kInf;
  for (int j = 0; j < 9; ++j) {
    if (!pb.valid[j]) continue;
    for (int ch = 0; ch < channels; ++ch) {
      const double r = pb.values[j][ch] - pa.values[j][ch];
      l1 += std::abs(r);
      min_res = std::min(min_res, std::abs(r));
    }
  }
  const double l1_norm = 1.0 / (nv * channels);
  l1 *= l1_norm;

  // SSIM per channel
  std::array<SsimStats, 3> stats;
  double ssim_sum = 0.0;
  for (int ch = 0; ch < channels; ++ch) {
    stats[ch] = channel_stats(pa, pb, ch);
    ssim_sum += ssim_from_stats(stats[ch]);
  }
  const double ssim = ssim_sum / channels;
  const double dis = std::clamp((1.0 - ssim) * 0.5, 0.0, 1.0);

  out.value = opt.alpha * dis + (1.0 - opt.alpha) * l1;
  out.valid = true;
  out.min_abs_residual = min_res;
  if (!with_grad) return out;

  // d value / d b[j][ch], then chain through the warp.
  for (int j = 0; j < 9; ++j) {
    if (!pb.valid[j]) continue;
    double gu = 0.0, gv = 0.0;
    for (int ch = 0; ch < channels; ++ch) {
      const SsimStats& s = stats[ch];
      const double bjc = pb.values[j][ch];
      const double ajc = pa.values[j][ch];

      // dS/db holding a fixed: mu_b, var_b, cov all move with b[j].
      const double n1 = 2.0 * s.mu_a * s.mu_b + kC1;
      const double n2 = 2.0 * s.cov + kC2;
      const double d1 = s.mu_a * s.mu_a + s.mu_b * s.mu_b + kC1;
      const double d2 = s.var_a + s.var_b + kC2;
      const double den = d1 * d2;
      const double s_ch = (n1 * n2) / den;
      const double dnum = (2.0 * s.mu_a / s.n) * n2 +
                          n1 * (2.0 * (ajc - s.mu_a) / s.n);
      const double dden = (2.0 * s.mu_b / s.n) * d2 +
                          d1 * (2.0 * (bjc - s.mu_b) / s.n);
      const double ds_db = (dnum - s_ch * dden) / den;

      double dval_db = opt.alpha * (-0.5 / channels) * ds_db;
      const double r = bjc - ajc;
      if (r != 0.0) {
        dval_db += (1.0 - opt.alpha) * l1_norm * (r > 0.0 ? 1.0 : -1.0);
      }
      gu += dval_db * src_samples[j].dx[ch];
      gv += dval_db * src_samples[j].dy[ch];
    }

    const Eigen::Vector3d& x = xp[j];
    const double iz = 1.0 / x.z();
    // rows of the projection Jacobian d(u,v)/dX'
    const Eigen::Vector3d du(k.fx * iz, 0.0, -k.fx * x.x() * iz * iz);
    const Eigen::Vector3d dv(0.0, k.fy * iz, -k.fy * x.y() * iz * iz);
    const Eigen::Vector3d dval_dx = gu * du + gv * dv;

    out.d_depth += dval_dx.dot(pose.rotation * rays[j]);
    out.d_twist.head<3>() += dval_dx;
    out.d_twist.tail<3>() += x.cross(dval_dx);
  }
  return out;
}

PhotometricResult photometric_loss(const Image& target,
                                   const std::vector<Image>& sources,
                                   const std::vector<Keypoint>& keypoints,
                                   const std::vector<double>& depths,
                                   const Intrinsics& k,
                                   const std::vector<PoseSE3>& poses,
                                   const PhotoOptions& opt, bool with_grad) {
  if (sources.size() != poses.size()) {
    throw ValidationError("photometric_loss: one pose per source required");
  }
  if (keypoints.size() != depths.size()) {
    throw ValidationError("photometric_loss: one depth per keypoint required");
  }
  if (sources.empty() || keypoints.empty()) {
    throw ValidationError("photometric_loss: empty sources or keypoints");
  }

  PhotometricResult res;
  res.point_source.assign(keypoints.size(), -1);
  res.d_depth.assign(keypoints.size(), 0.0);
  res.d_twist.assign(sources.size(), Eigen::Matrix<double, 6, 1>::Zero());
  res.min_abs_residual = kInf;
  res.min_border_dist = kInf;
  res.min_source_gap = kInf;

  double sum = 0.0;
  std::vector<PatchTerm> terms(sources.size());
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    const SupportDomain dom = support_domain(
        PixelPoint{static_cast<double>(keypoints[i].x),
                   static_cast<double>(keypoints[i].y)},
        opt.window);
    int best = -1;
    double second = kInf;
    for (std::size_t s = 0; s < sources.size(); ++s) {
      terms[s] = eval_patch_term(target, sources[s], dom, depths[i], k,
                                 poses[s], opt, with_grad);
      res.min_border_dist =
          std::min(res.min_border_dist, terms[s].min_border_dist);
      if (!terms[s].valid) continue;
      if (best < 0 || terms[s].value < terms[best].value) {
        if (best >= 0) second = terms[best].value;
        best = static_cast<int>(s);
      } else {
        second = std::min(second, terms[s].value);
      }
    }
    if (best < 0) continue;

    ++res.surviving;
    res.point_source[i] = best;
    sum += terms[best].value;
    res.min_abs_residual =
        std::min(res.min_abs_residual, terms[best].min_abs_residual);
    if (std::isfinite(second)) {
      res.min_source_gap =
          std::min(res.min_source_gap, second - terms[best].value);
    }
    if (with_grad) {
      res.d_depth[i] = terms[best].d_depth;
      res.d_twist[best] += terms[best].d_twist;
    }
  }

  if (res.surviving == 0) {
    throw NoOverlapError(
        "photometric_loss: no keypoint kept a valid source view");
  }
  const double inv_n = 1.0 / res.surviving;
  res.value = sum * inv_n;
  if (with_grad) {
    for (double& g : res.d_depth) g *= inv_n;
    for (auto& g : res.d_twist) g *= inv_n;
  }
  return res;
}

SmoothnessResult smoothness_loss(const DepthMap& depth, const Image& image,
                                 bool with_grad) {
  depth.validate();
  if (!depth.mask.empty()) {
    throw ValidationError("smoothness_loss needs a hole-free depth map");
  }
  if (image.width != depth.width || image.height != depth.height) {
    throw ValidationError("smoothness_loss: image and depth extents differ");
  }
  const int w = depth.width, h = depth.height;
  if (w < 2 || h < 2) {
    throw ValidationError("smoothness_loss: need at least 2x2 pixels");
  }

  double mean = 0.0;
  for (double d : depth.data) mean += d;
  mean /= depth.data.size();

  SmoothnessResult res;
  res.min_abs_residual = kInf;
  if (with_grad) res.grad.assign(depth.data.size(), 0.0);

  // M = mean over the stencil of w_e |D_q - D_p|; the depth normalization
  // enters once at the end as L = M / mean.
  const double n_terms = static_cast<double>(w - 1) * (h - 1);
  double m = 0.0;
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      const double lum = image.luminance(x, y);
      const double wx = std::exp(-std::abs(image.luminance(x + 1, y) - lum));
      const double wy = std::exp(-std::abs(image.luminance(x, y + 1) - lum));
      const double dx = depth.at(x + 1, y) - depth.at(x, y);
      const double dy = depth.at(x, y + 1) - depth.at(x, y);
      m += wx * std::abs(dx) + wy * std::abs(dy);
      res.min_abs_residual =
          std::min(res.min_abs_residual, std::min(std::abs(dx), std::abs(dy)));
      if (with_grad) {
        const double sx = dx > 0.0 ? 1.0 : (dx < 0.0 ? -1.0 : 0.0);
        const double sy = dy > 0.0 ? 1.0 : (dy < 0.0 ? -1.0 : 0.0);
        res.grad[depth.index(x + 1, y)] += wx * sx;
        res.grad[depth.index(x, y)] -= wx * sx;
        res.grad[depth.index(x, y + 1)] += wy * sy;
        res.grad[depth.index(x, y)] -= wy * sy;
      }
    }
  }
  m /= n_terms;
  res.value = m / mean;
  if (with_grad) {
    // dL/dD_p = (1/mean) * (dM/dD_p - L / (W H))
    const double lm = res.value / (w * static_cast<double>(h));
    for (double& g : res.grad) {
      g = (g / n_terms - lm) / mean;
    }
  }
  return res;
}

namespace {
std::vector<double> keypoint_depths(const FrameBundle& bundle) {
  std::vector<double> out;
  out.reserve(bundle.keypoints.points.size());
  for (const Keypoint& kp : bundle.keypoints.points) {
    out.push_back(bundle.grid.depth_at(
        PixelPoint{static_cast<double>(kp.x), static_cast<double>(kp.y)}));
  }
  return out;
}

TotalLossResult evaluate(const FrameBundle& bundle,
                         const TotalLossOptions& opt, bool with_grad,
                         const std::vector<RegionPlane>* frozen_planes) {
  const DepthMap depth = bundle.grid.upsample();
  const std::vector<PoseSE3> poses = bundle.poses();
  const std::vector<double> depths = keypoint_depths(bundle);

  PhotoOptions popt;
  popt.alpha = opt.alpha;
  popt.window = opt.window;
  popt.min_valid = opt.min_valid;
  const PhotometricResult photo =
      photometric_loss(bundle.target, bundle.sources,
                       bundle.keypoints.points, depths, bundle.k, poses, popt,
                       with_grad);

  const SmoothnessResult smooth =
      smoothness_loss(depth, bundle.target, with_grad);

  TotalLossResult res;
  if (frozen_planes) {
    res.planes = *frozen_planes;
  } else {
    res.planes =
        fit_region_planes(depth, bundle.regions, bundle.k, opt.spp_eps);
  }
  SppOptions sopt;
  sopt.eps = opt.spp_eps;
  sopt.raw_sum = opt.spp_raw_sum;
  const SppResult spp = spp_loss_with_planes(depth, bundle.regions, bundle.k,
                                             res.planes, sopt);

  res.breakdown.photometric = photo.value;
  res.breakdown.smoothness = smooth.value;
  res.breakdown.planar = spp.value;
  res.breakdown.total = photo.value + opt.lambda_smooth * smooth.value +
                        opt.lambda_planar * spp.value;
  res.breakdown.surviving_points = photo.surviving;
  res.breakdown.point_source = photo.point_source;

  res.diag.min_abs_residual =
      std::min({photo.min_abs_residual, smooth.min_abs_residual,
                spp.regions_used > 0 ? spp.min_abs_residual : kInf});
  res.diag.min_border_dist = photo.min_border_dist;
  res.diag.min_source_gap = photo.min_source_gap;

  if (!with_grad) return res;

  res.grads.grid.assign(bundle.grid.log_depth.size(), 0.0);
  res.grads.twists = photo.d_twist;

  // dense terms: d total / d D_p, then D_p = exp(logd(p)) through the
  // bilinear grid footprint
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const std::size_t pi = depth.index(x, y);
      const double g_dense = opt.lambda_smooth * smooth.grad[pi] +
                             opt.lambda_planar * spp.grad[pi];
      if (g_dense == 0.0) continue;
      const double chain = g_dense * depth.data[pi];
      const GridWeights gw = bundle.grid.weights_at(
          PixelPoint{static_cast<double>(x), static_cast<double>(y)});
      for (int i = 0; i < 4; ++i) {
        res.grads.grid[gw.node[i]] += chain * gw.w[i];
      }
    }
  }
  // keypoint terms
  for (std::size_t i = 0; i < bundle.keypoints.points.size(); ++i) {
    if (photo.point_source[i] < 0 || photo.d_depth[i] == 0.0) continue;
    const Keypoint& kp = bundle.keypoints.points[i];
    const double chain = photo.d_depth[i] * depths[i];
    const GridWeights gw = bundle.grid.weights_at(
        PixelPoint{static_cast<double>(kp.x), static_cast<double>(kp.y)});
    for (int j = 0; j < 4; ++j) {
      res.grads.grid[gw.node[j]] += chain * gw.w[j];
    }
  }
  return res;
}
}  // namespace

TotalLossResult total_loss_and_grad(const FrameBundle& bundle,
                                    const TotalLossOptions& opt) {
  return evaluate(bundle, opt, true, nullptr);
}

double total_loss_value(const FrameBundle& bundle, const TotalLossOptions& opt,
                        const std::vector<RegionPlane>& frozen_planes) {
  return evaluate(bundle, opt, false, &frozen_planes).breakdown.total;
}

}  // namespace patchdepth
