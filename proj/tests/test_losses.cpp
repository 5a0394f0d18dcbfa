#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "patchdepth/losses.hpp"
#include "test_support.hpp"

using namespace patchdepth;

namespace {

constexpr double kC1 = 1e-4;

PatchSample constant_patch(double v, int channels = 1) {
  PatchSample p;
  p.channels = channels;
  for (int j = 0; j < 9; ++j) {
    p.valid[j] = true;
    for (int c = 0; c < channels; ++c) p.values[j][c] = v;
  }
  return p;
}

PatchSample ramp_patch(double lo, double hi, int channels = 1) {
  PatchSample p;
  p.channels = channels;
  for (int j = 0; j < 9; ++j) {
    p.valid[j] = true;
    for (int c = 0; c < channels; ++c) {
      p.values[j][c] = lo + (hi - lo) * j / 8.0;
    }
  }
  return p;
}

// Band-limited test texture: two low-frequency sinusoid products per
// channel, safely inside [0, 1]. Frequencies are in cycles per pixel.
Image smooth_image(int w, int h, int channels, SplitMix64& rng,
                   double max_freq = 0.03) {
  Image img(w, h, channels, 0.5);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int c = 0; c < channels; ++c) {
    for (int k = 0; k < 2; ++k) {
      const double fx = rng.next_in(0.2, 1.0) * max_freq * two_pi;
      const double fy = rng.next_in(0.2, 1.0) * max_freq * two_pi;
      const double px = rng.next_in(0.0, two_pi);
      const double py = rng.next_in(0.0, two_pi);
      const double amp = 0.20;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          img.at(x, y, c) +=
              amp * std::sin(fx * x + px) * std::sin(fy * y + py);
        }
      }
    }
  }
  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

DepthMap smooth_depth(int w, int h, SplitMix64& rng) {
  DepthMap d(w, h);
  const double fx = rng.next_in(0.01, 0.04) * 2.0 * std::numbers::pi;
  const double fy = rng.next_in(0.01, 0.04) * 2.0 * std::numbers::pi;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      d.at(x, y) = 2.0 + 0.5 * std::sin(fx * x + 0.3) * std::cos(fy * y);
    }
  }
  return d;
}

// Central finite difference with a kink detector. Interpolated image values
// are only piecewise smooth: a bracket that straddles a pixel-cell boundary
// mixes the two one-sided slopes and disagrees with the analytic gradient by
// an amount that does not shrink with the step. Probing at h and h/4 exposes
// such brackets (the mix changes with the step), and the caller skips them.
struct FdProbe {
  double fd = 0.0;
  bool smooth = false;
};

template <typename F>
FdProbe fd_probe(F&& value_at, double h, double scale_floor) {
  const double wide = (value_at(h) - value_at(-h)) / (2.0 * h);
  const double narrow =
      (value_at(h / 4.0) - value_at(-h / 4.0)) / (h / 2.0);
  const double scale = std::max({std::abs(wide), std::abs(narrow),
                                 scale_floor});
  return {wide, std::abs(wide - narrow) / scale < 3e-5};
}

bool fd_matches(const FdProbe& probe, double analytic, double tol) {
  const double scale =
      std::max({std::abs(probe.fd), std::abs(analytic), 1e-6});
  return std::abs(probe.fd - analytic) / scale < tol;
}

FrameBundle build_test_bundle(std::uint64_t seed) {
  SplitMix64 rng(seed);
  FrameBundle b;
  const int w = 64, h = 48;
  b.target = smooth_image(w, h, 1, rng);
  b.sources.push_back(smooth_image(w, h, 1, rng));
  b.sources.push_back(smooth_image(w, h, 1, rng));
  b.k = Intrinsics{80.0, 80.0, (w - 1) / 2.0, (h - 1) / 2.0};
  b.grid = DepthGrid::make(w, h, 8, 2.0);
  for (double& v : b.grid.log_depth) v += rng.next_in(-0.05, 0.05);
  for (int i = 0; i < 2; ++i) {
    Twist t;
    t.v = 0.02 * testsup::random_unit_vector(rng);
    t.w = 0.004 * testsup::random_unit_vector(rng);
    b.twists.push_back(t);
  }
  for (int y = 8; y < h - 8; y += 8) {
    for (int x = 8; x < w - 8; x += 8) {
      b.keypoints.points.push_back({x, y, KeypointOrigin::kGradient});
    }
  }
  // two vertical halves as plane regions
  std::vector<Superpixel> regions(2);
  regions[0].id = 0;
  regions[1].id = 1;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      regions[x < w / 2 ? 0 : 1].pixels.push_back({x, y});
    }
  }
  b.regions = regions;
  b.validate();
  return b;
}

}  // namespace

TEST_SUITE_BEGIN("losses");

TEST_CASE("ssim of identical patches is one") {
  const PatchSample a = ramp_patch(0.2, 0.8);
  CHECK(ssim_patch(a, a) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ssim_dissimilarity(a, a) == doctest::Approx(0.0));
}

TEST_CASE("ssim of black versus white, hand-computed") {
  // Constant patches: variances and covariance vanish, so
  // s = (2*0*1 + C1) * C2 / ((0 + 1 + C1) * C2) = C1 / (1 + C1).
  const PatchSample black = constant_patch(0.0);
  const PatchSample white = constant_patch(1.0);
  const double expected = kC1 / (1.0 + kC1);
  CHECK(ssim_patch(black, white) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(ssim_dissimilarity(black, white) ==
        doctest::Approx((1.0 - expected) / 2.0).epsilon(1e-12));
}

TEST_CASE("ssim averages channels and respects validity masks") {
  PatchSample a = constant_patch(0.0, 3);
  PatchSample b = constant_patch(1.0, 3);
  // make channel 1 identical: ssim contribution 1.0
  for (int j = 0; j < 9; ++j) {
    a.values[j][1] = 0.4;
    b.values[j][1] = 0.4;
  }
  const double flat = kC1 / (1.0 + kC1);
  CHECK(ssim_patch(a, b) ==
        doctest::Approx((flat + 1.0 + flat) / 3.0).epsilon(1e-12));

  // only two common valid samples is still well defined
  PatchSample c = ramp_patch(0.1, 0.9);
  PatchSample d = ramp_patch(0.2, 0.7);
  for (int j = 2; j < 9; ++j) c.valid[j] = false;
  CHECK_NOTHROW(ssim_patch(c, d));
  c.valid[1] = false;
  CHECK_THROWS_AS(ssim_patch(c, d), DegeneratePatchError);
}

TEST_CASE("ssim is symmetric and bounded") {
  SplitMix64 rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    PatchSample a, b;
    a.channels = b.channels = 1;
    for (int j = 0; j < 9; ++j) {
      a.valid[j] = b.valid[j] = true;
      a.values[j][0] = rng.next_double();
      b.values[j][0] = rng.next_double();
    }
    const double sab = ssim_patch(a, b);
    const double sba = ssim_patch(b, a);
    CHECK(sab == doctest::Approx(sba).epsilon(1e-12));
    CHECK(sab <= 1.0 + 1e-12);
    CHECK(sab >= -1.0 - 1e-12);
  }
}

TEST_CASE("smoothness of a flat depth map is zero") {
  const DepthMap d(8, 6, 2.5);
  const Image img(8, 6, 1, 0.5);
  const SmoothnessResult res = smoothness_loss(d, img, true);
  CHECK(res.value == 0.0);
  for (double g : res.grad) CHECK(g == 0.0);
}

TEST_CASE("smoothness of a linear ramp, hand-computed") {
  // depth 1 + 0.01 x on a 3x3 flat image: every x-difference contributes
  // 0.01, y-differences vanish, weights are 1, mean depth is 1.01, so
  // L = 0.01 / 1.01.
  DepthMap d(3, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) d.at(x, y) = 1.0 + 0.01 * x;
  }
  const Image img(3, 3, 1, 0.3);
  const SmoothnessResult res = smoothness_loss(d, img, false);
  CHECK(res.value == doctest::Approx(0.01 / 1.01).epsilon(1e-14));
}

TEST_CASE("smoothness edge weight, hand-computed 2x2 case") {
  // single stencil position: dx = 1 across a unit luminance step, dy = 0,
  // so M = e^-1 and L = e^-1 / 1.5
  DepthMap d(2, 2);
  d.at(0, 0) = 1.0;
  d.at(1, 0) = 2.0;
  d.at(0, 1) = 1.0;
  d.at(1, 1) = 2.0;
  Image img(2, 2, 1);
  img.at(1, 0) = 1.0;
  img.at(1, 1) = 1.0;
  const SmoothnessResult res = smoothness_loss(d, img, false);
  CHECK(res.value ==
        doctest::Approx(std::exp(-1.0) / 1.5).epsilon(1e-14));
}

TEST_CASE("smoothness is invariant to depth rescaling") {
  SplitMix64 rng(83);
  const DepthMap d = smooth_depth(10, 8, rng);
  const Image img = smooth_image(10, 8, 1, rng);
  const double base = smoothness_loss(d, img, false).value;

  DepthMap doubled = d;
  for (double& v : doubled.data) v *= 2.0;  // exact in floating point
  CHECK(smoothness_loss(doubled, img, false).value == base);

  DepthMap scaled = d;
  for (double& v : scaled.data) v *= 3.7;
  CHECK(smoothness_loss(scaled, img, false).value ==
        doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("smoothness gradient matches finite differences") {
  SplitMix64 rng(89);
  const DepthMap d = smooth_depth(8, 6, rng);
  const Image img = smooth_image(8, 6, 1, rng);
  const SmoothnessResult res = smoothness_loss(d, img, true);
  REQUIRE(res.min_abs_residual > 1e-4);  // kink-free finite differences
  const double h = 1e-7;
  for (std::size_t i = 0; i < d.data.size(); ++i) {
    DepthMap dp = d, dm = d;
    dp.data[i] += h;
    dm.data[i] -= h;
    const double fd = (smoothness_loss(dp, img, false).value -
                       smoothness_loss(dm, img, false).value) /
                      (2.0 * h);
    CHECK(res.grad[i] == doctest::Approx(fd).epsilon(5e-6));
  }
}

TEST_CASE("patch term is zero with identical frames and identity pose") {
  SplitMix64 rng(97);
  const Image img = smooth_image(32, 24, 1, rng);
  const SupportDomain dom = support_domain(PixelPoint{15.0, 11.0}, 3);
  const PatchTerm term =
      eval_patch_term(img, img, dom, 2.0, Intrinsics{50, 50, 15.5, 11.5},
                      PoseSE3::identity(), PhotoOptions{}, true);
  REQUIRE(term.valid);
  CHECK(term.value == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(term.d_depth == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(term.d_twist.norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("patch term depth and twist gradients match finite differences") {
  SplitMix64 rng(101);
  const int w = 64, h = 48;
  const Intrinsics k{80.0, 80.0, (w - 1) / 2.0, (h - 1) / 2.0};
  const Image target = smooth_image(w, h, 1, rng);
  const Image source = smooth_image(w, h, 1, rng);
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 15; ++trial) {
    PoseSE3 pose;
    pose.rotation = testsup::random_small_rotation(rng, 0.01);
    pose.translation = 0.03 * testsup::random_unit_vector(rng);
    const PixelPoint center{rng.next_in(12.0, w - 13.0),
                            rng.next_in(12.0, h - 13.0)};
    const SupportDomain dom = support_domain(center, 3);
    const double depth = rng.next_in(1.5, 3.0);
    const PhotoOptions opt;
    const PatchTerm term =
        eval_patch_term(target, source, dom, depth, k, pose, opt, true);
    if (!term.valid || term.min_border_dist < 0.1 ||
        term.min_abs_residual < 1e-4) {
      continue;
    }
    ++checked;

    int skipped = 0;
    const FdProbe dp = fd_probe(
        [&](double h) {
          return eval_patch_term(target, source, dom, depth + h, k, pose, opt,
                                 false)
              .value;
        },
        1e-6, 1e-6);
    if (dp.smooth) {
      CHECK(fd_matches(dp, term.d_depth, 1e-4));
    } else {
      ++skipped;
    }

    for (int i = 0; i < 6; ++i) {
      const FdProbe tp = fd_probe(
          [&](double h) {
            Twist delta;
            if (i < 3) {
              delta.v[i] = h;
            } else {
              delta.w[i - 3] = h;
            }
            const PoseSE3 p = pose_compose(se3_exp(delta), pose);
            return eval_patch_term(target, source, dom, depth, k, p, opt,
                                   false)
                .value;
          },
          1e-6, 1e-6);
      if (tp.smooth) {
        CHECK(fd_matches(tp, term.d_twist[i], 1e-4));
      } else {
        ++skipped;
      }
    }
    CHECK(skipped <= 2);
  }
  CHECK(checked == 15);
}

TEST_CASE("photometric loss picks the cheaper source per keypoint") {
  SplitMix64 rng(103);
  const int w = 48, h = 36;
  const Image target = smooth_image(w, h, 1, rng);
  Image mismatched = smooth_image(w, h, 1, rng);
  const std::vector<Image> sources = {mismatched, target};  // exact copy wins
  const Intrinsics k{60.0, 60.0, (w - 1) / 2.0, (h - 1) / 2.0};
  std::vector<Keypoint> kps;
  for (int x = 8; x < w - 8; x += 6) kps.push_back({x, h / 2, {}});
  const std::vector<double> depths(kps.size(), 2.0);
  const std::vector<PoseSE3> poses(2, PoseSE3::identity());
  const PhotometricResult res = photometric_loss(
      target, sources, kps, depths, k, poses, PhotoOptions{}, false);
  CHECK(res.surviving == static_cast<int>(kps.size()));
  CHECK(res.value == doctest::Approx(0.0).epsilon(1e-12));
  for (int s : res.point_source) CHECK(s == 1);
}

TEST_CASE("photometric loss without any surviving keypoint throws") {
  SplitMix64 rng(107);
  const int w = 32, h = 24;
  const Image target = smooth_image(w, h, 1, rng);
  const std::vector<Image> sources = {target};
  const Intrinsics k{50.0, 50.0, (w - 1) / 2.0, (h - 1) / 2.0};
  const std::vector<Keypoint> kps = {{16, 12, {}}};
  const std::vector<double> depths = {2.0};
  // push everything far outside the source frame
  PoseSE3 away;
  away.translation = Eigen::Vector3d(50.0, 0.0, 0.0);
  CHECK_THROWS_AS(photometric_loss(target, sources, kps, depths, k, {away},
                                   PhotoOptions{}, false),
                  NoOverlapError);
}

TEST_CASE("keypoints near the border lose enough samples to be dropped") {
  SplitMix64 rng(109);
  const int w = 32, h = 24;
  const Image target = smooth_image(w, h, 1, rng);
  const Intrinsics k{50.0, 50.0, (w - 1) / 2.0, (h - 1) / 2.0};
  // support spread 3 at x=1: the left column of samples is off-image in the
  // target, and a translation pushes warped samples further out
  const std::vector<Keypoint> kps = {{1, 12, {}}, {16, 12, {}}};
  const std::vector<double> depths = {2.0, 2.0};
  PoseSE3 shift;
  shift.translation = Eigen::Vector3d(-0.25, 0.0, 0.0);  // ~6px at depth 2
  const PhotometricResult res = photometric_loss(
      target, {target}, kps, depths, k, {shift}, PhotoOptions{}, false);
  CHECK(res.surviving == 1);
  CHECK(res.point_source[0] == -1);
  CHECK(res.point_source[1] == 0);
}

TEST_CASE("total loss assembles the weighted breakdown") {
  const FrameBundle bundle = build_test_bundle(1111);
  TotalLossOptions opt;
  const TotalLossResult res = total_loss_and_grad(bundle, opt);
  CHECK(res.breakdown.total ==
        doctest::Approx(res.breakdown.photometric +
                        0.001 * res.breakdown.smoothness +
                        0.05 * res.breakdown.planar)
            .epsilon(1e-14));
  CHECK(res.breakdown.surviving_points > 0);
  CHECK(res.planes.size() == bundle.regions.size());
  CHECK(res.grads.grid.size() == bundle.grid.log_depth.size());
  CHECK(res.grads.twists.size() == 2);

  // two evaluations agree bit for bit
  const TotalLossResult rerun = total_loss_and_grad(bundle, opt);
  CHECK(rerun.breakdown.total == res.breakdown.total);
  CHECK(rerun.grads.grid == res.grads.grid);
}

TEST_CASE("total loss gradient matches finite differences") {
  const FrameBundle bundle = build_test_bundle(2222);
  TotalLossOptions opt;
  const TotalLossResult res = total_loss_and_grad(bundle, opt);
  REQUIRE(res.diag.min_border_dist > 1e-2);
  REQUIRE(std::isfinite(res.diag.min_abs_residual));

  int skipped = 0, compared = 0;
  for (std::size_t i = 0; i < bundle.grid.log_depth.size(); i += 3) {
    const FdProbe p = fd_probe(
        [&](double h) {
          FrameBundle b = bundle;
          b.grid.log_depth[i] += h;
          return total_loss_value(b, opt, res.planes);
        },
        1e-5, 1e-6);
    if (!p.smooth) {
      ++skipped;
      continue;
    }
    CHECK(fd_matches(p, res.grads.grid[i], 1e-4));
    ++compared;
  }

  for (std::size_t s = 0; s < bundle.twists.size(); ++s) {
    for (int i = 0; i < 6; ++i) {
      const FdProbe p = fd_probe(
          [&](double h) {
            Twist delta;
            if (i < 3) {
              delta.v[i] = h;
            } else {
              delta.w[i - 3] = h;
            }
            FrameBundle b = bundle;
            b.twists[s] = se3_log(
                pose_compose(se3_exp(delta), se3_exp(bundle.twists[s])));
            return total_loss_value(b, opt, res.planes);
          },
          1e-6, 1e-6);
      if (!p.smooth) {
        ++skipped;
        continue;
      }
      CHECK(fd_matches(p, res.grads.twists[s][i], 1e-4));
      ++compared;
    }
  }
  CHECK(compared >= 20);
  CHECK(skipped <= 4);
}

TEST_SUITE_END();
