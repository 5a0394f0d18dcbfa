#include <doctest.h>

#include <cmath>
#include <vector>

#include "patchdepth/planes.hpp"
#include "test_support.hpp"

using namespace patchdepth;

namespace {

const Intrinsics kK{100.0, 100.0, 96.0, 72.0};

Intrinsics centered_k(int w, int h) {
  return Intrinsics{100.0, 100.0, (w - 1) / 2.0, (h - 1) / 2.0};
}

// Random plane with distance to the origin in [0.5, 3] and a viewer-facing
// normal, so fits stay well conditioned and depths positive over the frustum.
PlaneParams random_plane(SplitMix64& rng) {
  for (;;) {
    Eigen::Vector3d n = testsup::random_unit_vector(rng);
    if (n.z() < 0.3) continue;  // needs to face the camera decently
    const double dist = rng.next_in(0.5, 3.0);
    return PlaneParams{n / dist};
  }
}

DepthMap depth_from_plane(const PlaneParams& plane, const Intrinsics& k,
                          int w, int h) {
  DepthMap d(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto dp = planar_depth(
          plane, k, PixelPoint{static_cast<double>(x), static_cast<double>(y)});
      REQUIRE(dp.has_value());
      d.at(x, y) = *dp;
    }
  }
  return d;
}

std::vector<Superpixel> whole_image_region(int w, int h) {
  Superpixel sp;
  sp.id = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) sp.pixels.push_back({x, y});
  }
  return {sp};
}

}  // namespace

TEST_SUITE_BEGIN("planes");

TEST_CASE("fit_plane on four symmetric points, hand-computed normal system") {
  // Corners of the z = 0.5 plane: P^T P = diag(4, 4, 1), P^T 1 = (0, 0, 2),
  // so a = (0, 0, 2 / (1 + eps)).
  const std::vector<Eigen::Vector3d> pts = {{1.0, 1.0, 0.5},
                                            {1.0, -1.0, 0.5},
                                            {-1.0, 1.0, 0.5},
                                            {-1.0, -1.0, 0.5}};
  const double eps = 1e-8;
  const PlaneParams p = fit_plane(pts, eps);
  CHECK(std::abs(p.a.x()) < 1e-12);
  CHECK(std::abs(p.a.y()) < 1e-12);
  CHECK(p.a.z() == doctest::Approx(2.0 / (1.0 + eps)).epsilon(1e-12));
}

TEST_CASE("fit_plane recovers random planes from exact samples") {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const PlaneParams truth = random_plane(rng);
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 50; ++i) {
      // pick x, y and solve a^T X = 1 for z
      const double x = rng.next_in(-1.0, 1.0);
      const double y = rng.next_in(-1.0, 1.0);
      const double z = (1.0 - truth.a.x() * x - truth.a.y() * y) / truth.a.z();
      pts.emplace_back(x, y, z);
    }
    const PlaneParams fit = fit_plane(pts, 1e-8);
    CHECK((fit.a - truth.a).norm() < 1e-6);
  }
}

TEST_CASE("fit_plane ridge shrinks the solution and guards degeneracy") {
  // three collinear points: rank deficient, only solvable thanks to eps
  const std::vector<Eigen::Vector3d> line = {
      {0.0, 0.0, 1.0}, {0.0, 0.0, 2.0}, {0.0, 0.0, 3.0}};
  const PlaneParams p = fit_plane(line, 1e-4);
  CHECK(p.a.allFinite());
  // huge ridge pulls everything to zero
  const std::vector<Eigen::Vector3d> pts = {
      {1.0, 0.0, 1.0}, {0.0, 1.0, 1.0}, {-1.0, 0.0, 1.0}};
  CHECK(fit_plane(pts, 1e9).a.norm() < 1e-8);
}

TEST_CASE("fit_plane input validation") {
  const std::vector<Eigen::Vector3d> two = {{0, 0, 1}, {1, 0, 1}};
  CHECK_THROWS_AS(fit_plane(two, 1e-8), InsufficientDataError);
  const std::vector<Eigen::Vector3d> three = {{0, 0, 1}, {1, 0, 1}, {0, 1, 1}};
  CHECK_THROWS_AS(fit_plane(three, 0.0), ValidationError);
  CHECK_THROWS_AS(fit_plane(three, -1.0), ValidationError);
}

TEST_CASE("planar_depth on a fronto-parallel plane") {
  // a = (0, 0, 0.5) is the plane z = 2; every ray reads depth 2 exactly
  const PlaneParams plane{Eigen::Vector3d(0.0, 0.0, 0.5)};
  CHECK(planar_depth(plane, kK, PixelPoint{96.0, 72.0}).value() == 2.0);
  CHECK(planar_depth(plane, kK, PixelPoint{196.0, 72.0}).value() == 2.0);
  CHECK(planar_depth(plane, kK, PixelPoint{0.0, 0.0}).value() == 2.0);
}

TEST_CASE("planar_depth rejects grazing and behind-camera intersections") {
  // plane x = 1 seen along the optical axis: ray parallel to the plane
  const PlaneParams side{Eigen::Vector3d(1.0, 0.0, 0.0)};
  CHECK_FALSE(planar_depth(side, kK, PixelPoint{96.0, 72.0}).has_value());
  // intersection behind the camera
  const PlaneParams behind{Eigen::Vector3d(0.0, 0.0, -0.5)};
  CHECK_FALSE(planar_depth(behind, kK, PixelPoint{96.0, 72.0}).has_value());
  // threshold sits at 1e-6, inclusive on the valid side
  const PlaneParams barely{Eigen::Vector3d(0.0, 0.0, 0.9999e-6)};
  CHECK_FALSE(planar_depth(barely, kK, PixelPoint{96.0, 72.0}).has_value());
  const PlaneParams ok{Eigen::Vector3d(0.0, 0.0, 1.0001e-6)};
  REQUIRE(planar_depth(ok, kK, PixelPoint{96.0, 72.0}).has_value());
  CHECK(planar_depth(ok, kK, PixelPoint{96.0, 72.0}).value() ==
        doctest::Approx(1.0 / 1.0001e-6).epsilon(1e-12));
}

TEST_CASE("fit_region_planes recovers the generating plane from a depth map") {
  SplitMix64 rng(47);
  for (int trial = 0; trial < 5; ++trial) {
    const PlaneParams truth = random_plane(rng);
    const Intrinsics k = centered_k(24, 18);
    const DepthMap depth = depth_from_plane(truth, k, 24, 18);
    const auto regions = whole_image_region(24, 18);
    const auto fits = fit_region_planes(depth, regions, k, 1e-8);
    REQUIRE(fits.size() == 1);
    CHECK(fits[0].ok);
    CHECK(fits[0].support == 24 * 18);
    CHECK((fits[0].params.a - truth.a).norm() < 1e-6);
  }
}

TEST_CASE("fit_region_planes skips starved regions and honors the mask") {
  const PlaneParams plane{Eigen::Vector3d(0.0, 0.0, 0.5)};
  DepthMap depth = depth_from_plane(plane, centered_k(8, 8), 8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      depth.set_valid(x, y, y == 0 && x < 2);  // only two valid pixels
    }
  }
  const auto fits = fit_region_planes(depth, whole_image_region(8, 8),
                                      centered_k(8, 8), 1e-8);
  REQUIRE(fits.size() == 1);
  CHECK_FALSE(fits[0].ok);
  CHECK(fits[0].support == 2);
}

TEST_CASE("spp_loss vanishes on plane-consistent depth") {
  SplitMix64 rng(53);
  const PlaneParams truth = random_plane(rng);
  const Intrinsics k = centered_k(24, 18);
  const DepthMap depth = depth_from_plane(truth, k, 24, 18);
  SppOptions opt;
  opt.eps = 1e-8;
  const SppResult res = spp_loss(depth, whole_image_region(24, 18), k, opt);
  CHECK(res.regions_used == 1);
  CHECK(res.value < 1e-6);
}

TEST_CASE("spp_loss against frozen planes, hand-computed") {
  // Plane z = 2 but constant depth 2.5: every residual is exactly 0.5.
  const PlaneParams plane{Eigen::Vector3d(0.0, 0.0, 0.5)};
  DepthMap depth(4, 4, 2.5);
  const auto regions = whole_image_region(4, 4);
  std::vector<RegionPlane> fits(1);
  fits[0].region_id = 0;
  fits[0].params = plane;
  fits[0].ok = true;
  fits[0].support = 16;

  SppOptions opt;
  SUBCASE("normalized") {
    const SppResult res = spp_loss_with_planes(depth, regions, kK, fits, opt);
    CHECK(res.value == doctest::Approx(0.5).epsilon(1e-14));
    for (double g : res.grad) {
      CHECK(g == doctest::Approx(1.0 / 16.0).epsilon(1e-14));
    }
    CHECK(res.region_residuals[0] == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("raw sum") {
    opt.raw_sum = true;
    const SppResult res = spp_loss_with_planes(depth, regions, kK, fits, opt);
    CHECK(res.value == doctest::Approx(8.0).epsilon(1e-14));
    for (double g : res.grad) CHECK(g == 1.0);
  }
}

TEST_CASE("spp_loss normalization across unequal regions") {
  // Region 0: rows 0..1 (8 px), region 1: rows 2..3 (8 px) of a 4x4 map.
  // Frozen planes z=2 and z=1; depths 2.5 and 1.2 give residuals 0.5, 0.2.
  DepthMap depth(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) depth.at(x, y) = y < 2 ? 2.5 : 1.2;
  }
  std::vector<Superpixel> regions(2);
  regions[0].id = 0;
  regions[1].id = 1;
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      regions[y < 2 ? 0 : 1].pixels.push_back({x, y});
    }
  }
  std::vector<RegionPlane> fits(2);
  fits[0] = {0, PlaneParams{Eigen::Vector3d(0, 0, 0.5)}, true, 8};
  fits[1] = {1, PlaneParams{Eigen::Vector3d(0, 0, 1.0)}, true, 8};

  SppOptions opt;
  const SppResult norm = spp_loss_with_planes(depth, regions, kK, fits, opt);
  CHECK(norm.value == doctest::Approx(0.35).epsilon(1e-14));  // (0.5+0.2)/2
  opt.raw_sum = true;
  const SppResult raw = spp_loss_with_planes(depth, regions, kK, fits, opt);
  CHECK(raw.value == doctest::Approx(8 * 0.5 + 8 * 0.2).epsilon(1e-14));
}

TEST_CASE("spp_loss gradient matches finite differences with frozen planes") {
  SplitMix64 rng(59);
  const PlaneParams truth = random_plane(rng);
  const Intrinsics k = centered_k(8, 6);
  DepthMap depth = depth_from_plane(truth, k, 8, 6);
  // push depths off the plane so no residual sits near the |.| kink
  for (double& d : depth.data) d += (rng.next_double() < 0.5 ? -0.3 : 0.3);
  const auto regions = whole_image_region(8, 6);
  const auto fits = fit_region_planes(depth, regions, k, 1e-4);
  SppOptions opt;
  const SppResult res = spp_loss_with_planes(depth, regions, k, fits, opt);
  REQUIRE(res.min_abs_residual > 1e-3);

  const double h = 1e-7;
  for (std::size_t i = 0; i < depth.data.size(); i += 5) {
    DepthMap dp = depth, dm = depth;
    dp.data[i] += h;
    dm.data[i] -= h;
    const double fplus = spp_loss_with_planes(dp, regions, k, fits, opt).value;
    const double fminus =
        spp_loss_with_planes(dm, regions, k, fits, opt).value;
    const double fd = (fplus - fminus) / (2.0 * h);
    CHECK(res.grad[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("regions whose planar depths are all invalid are skipped") {
  DepthMap depth(4, 4, 2.0);
  std::vector<RegionPlane> fits(1);
  fits[0] = {0, PlaneParams{Eigen::Vector3d(0.0, 0.0, -0.5)}, true, 16};
  const SppResult res = spp_loss_with_planes(
      depth, whole_image_region(4, 4), kK, fits, SppOptions{});
  CHECK(res.regions_used == 0);
  CHECK(res.value == 0.0);
  CHECK(std::isnan(res.region_residuals[0]));
}

TEST_SUITE_END();
