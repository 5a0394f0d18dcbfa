#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>

#include "patchdepth/geometry.hpp"
#include "test_support.hpp"

using namespace patchdepth;

namespace {
const Intrinsics kK{100.0, 100.0, 96.0, 72.0};
}

TEST_SUITE_BEGIN("geometry");

TEST_CASE("se3_exp of zero twist is exactly the identity") {
  const PoseSE3 p = se3_exp(Twist{});
  CHECK(p.rotation.isApprox(Eigen::Matrix3d::Identity(), 0.0));
  CHECK(p.translation.norm() == 0.0);
}

TEST_CASE("se3_exp quarter turn about z") {
  Twist xi;
  xi.w = Eigen::Vector3d(0.0, 0.0, std::numbers::pi / 2.0);
  const PoseSE3 p = se3_exp(xi);
  Eigen::Matrix3d expected;
  expected << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
  CHECK((p.rotation - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(p.translation.norm() == 0.0);
}

TEST_CASE("se3_exp translation couples with rotation through V") {
  // Quarter turn about z while translating along x: V != I, so the
  // translation is not copied through. Computed by hand from
  // V = I + (1-cos)/t^2 W + (t-sin)/t^3 W^2 with t = pi/2:
  //   V * (1,0,0) = (sin t / t, (1-cos t)/t, 0) = (2/pi, 2/pi, 0).
  Twist xi;
  xi.v = Eigen::Vector3d(1.0, 0.0, 0.0);
  xi.w = Eigen::Vector3d(0.0, 0.0, std::numbers::pi / 2.0);
  const PoseSE3 p = se3_exp(xi);
  const double two_over_pi = 2.0 / std::numbers::pi;
  CHECK(p.translation.x() == doctest::Approx(two_over_pi).epsilon(1e-12));
  CHECK(p.translation.y() == doctest::Approx(two_over_pi).epsilon(1e-12));
  CHECK(std::abs(p.translation.z()) < 1e-15);
}

TEST_CASE("se3 exp/log roundtrip over random twists") {
  SplitMix64 rng(42);
  for (int i = 0; i < 500; ++i) {
    Twist xi;
    const double angle = rng.next_in(0.0, std::numbers::pi - 0.05);
    xi.w = angle * testsup::random_unit_vector(rng);
    xi.v = Eigen::Vector3d(rng.next_in(-5.0, 5.0), rng.next_in(-5.0, 5.0),
                           rng.next_in(-5.0, 5.0));
    const Twist back = se3_log(se3_exp(xi));
    CHECK((back.w - xi.w).norm() < 1e-9);
    CHECK((back.v - xi.v).norm() < 1e-9 * (1.0 + xi.v.norm()));
  }
}

TEST_CASE("se3 log/exp roundtrip for tiny and near-pi angles") {
  SplitMix64 rng(7);
  for (double angle : {1e-12, 1e-9, 1e-7, 3.0, std::numbers::pi - 1e-7,
                       std::numbers::pi - 1e-9}) {
    const Eigen::Vector3d axis = testsup::random_unit_vector(rng);
    Twist xi;
    xi.w = angle * axis;
    xi.v = Eigen::Vector3d(0.3, -0.2, 0.9);
    const PoseSE3 p = se3_exp(xi);
    const PoseSE3 q = se3_exp(se3_log(p));
    CHECK((q.rotation - p.rotation).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((q.translation - p.translation).norm() < 1e-9);
  }
  // At exactly pi the axis sign is ambiguous; exp(log(R)) must still
  // reproduce R.
  const Eigen::Vector3d axis = testsup::random_unit_vector(rng);
  PoseSE3 p;
  p.rotation = Eigen::AngleAxisd(std::numbers::pi, axis).toRotationMatrix();
  p.translation = Eigen::Vector3d(1.0, 2.0, 3.0);
  const PoseSE3 q = se3_exp(se3_log(p));
  CHECK((q.rotation - p.rotation).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((q.translation - p.translation).norm() < 1e-9);
}

TEST_CASE("se3_log rejects a non-orthonormal matrix") {
  PoseSE3 p;
  p.rotation(0, 0) = 2.0;
  CHECK_THROWS_AS(se3_log(p), ValidationError);
}

TEST_CASE("pose compose and inverse") {
  SplitMix64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const PoseSE3 a = testsup::random_pose(rng);
    const PoseSE3 b = testsup::random_pose(rng);
    const PoseSE3 ab = pose_compose(a, b);
    const Eigen::Vector3d x(rng.next_in(-2.0, 2.0), rng.next_in(-2.0, 2.0),
                            rng.next_in(-2.0, 2.0));
    CHECK((ab.apply(x) - a.apply(b.apply(x))).norm() < 1e-12);
    const PoseSE3 id = pose_compose(a, pose_inverse(a));
    CHECK((id.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK(id.translation.norm() < 1e-12);
  }
}

TEST_CASE("project hand example") {
  const Projection pr = project(Eigen::Vector3d(0.1, 0.0, 2.0), kK);
  CHECK(pr.pixel.x == doctest::Approx(101.0).epsilon(1e-14));
  CHECK(pr.pixel.y == doctest::Approx(72.0).epsilon(1e-14));
  CHECK(pr.depth == doctest::Approx(2.0));
}

TEST_CASE("project rejects points at or behind the camera") {
  CHECK_THROWS_AS(project(Eigen::Vector3d(0.0, 0.0, 0.0), kK),
                  CheiralityError);
  CHECK_THROWS_AS(project(Eigen::Vector3d(0.0, 0.0, 1e-8), kK),
                  CheiralityError);
  CHECK_NOTHROW(project(Eigen::Vector3d(0.0, 0.0, 2e-8), kK));
}

TEST_CASE("backproject rejects non-positive depth") {
  CHECK_THROWS_AS(backproject(PixelPoint{10.0, 10.0}, 0.0, kK),
                  ValidationError);
  CHECK_THROWS_AS(backproject(PixelPoint{10.0, 10.0}, -1.0, kK),
                  ValidationError);
}

TEST_CASE("project after backproject is the identity") {
  SplitMix64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    Intrinsics k{rng.next_in(50.0, 500.0), rng.next_in(50.0, 500.0),
                 rng.next_in(40.0, 200.0), rng.next_in(40.0, 200.0)};
    const PixelPoint p{rng.next_in(0.0, 320.0), rng.next_in(0.0, 240.0)};
    const double d = rng.next_in(0.05, 50.0);
    const Projection pr = project(backproject(p, d, k), k);
    CHECK(std::abs(pr.pixel.x - p.x) < 1e-9);
    CHECK(std::abs(pr.pixel.y - p.y) < 1e-9);
    CHECK(std::abs(pr.depth - d) < 1e-12);
  }
}

TEST_CASE("support_domain layout and center index") {
  const SupportDomain dom = support_domain(PixelPoint{10.0, 20.0}, 3);
  CHECK(dom.samples[0].x == 7.0);
  CHECK(dom.samples[0].y == 17.0);
  CHECK(dom.samples[4].x == 10.0);
  CHECK(dom.samples[4].y == 20.0);
  CHECK(dom.samples[8].x == 13.0);
  CHECK(dom.samples[8].y == 23.0);
  // row-major over (dy, dx)
  CHECK(dom.samples[1].x == 10.0);
  CHECK(dom.samples[1].y == 17.0);
  CHECK(dom.samples[3].x == 7.0);
  CHECK(dom.samples[3].y == 20.0);
  CHECK_THROWS_AS(support_domain(PixelPoint{0.0, 0.0}, 0), ValidationError);
}

TEST_CASE("warp_point under identity pose is a fixpoint") {
  SplitMix64 rng(5);
  const ImageExtent ext{192, 144};
  for (int i = 0; i < 200; ++i) {
    const PixelPoint p{rng.next_in(0.0, 191.0), rng.next_in(0.0, 143.0)};
    const double d = rng.next_in(0.1, 10.0);
    const WarpedPoint wp = warp_point(p, d, kK, PoseSE3::identity(), ext);
    CHECK(wp.valid);
    CHECK(std::abs(wp.pixel.x - p.x) < 1e-9);
    CHECK(std::abs(wp.pixel.y - p.y) < 1e-9);
    CHECK(wp.depth == doctest::Approx(d).epsilon(1e-14));
  }
}

TEST_CASE("warp_point pure x translation shifts the principal ray") {
  PoseSE3 pose;
  pose.translation = Eigen::Vector3d(0.1, 0.0, 0.0);
  const WarpedPoint wp =
      warp_point(PixelPoint{96.0, 72.0}, 2.0, kK, pose, ImageExtent{192, 144});
  CHECK(wp.valid);
  CHECK(wp.pixel.x == doctest::Approx(101.0).epsilon(1e-14));
  CHECK(wp.pixel.y == doctest::Approx(72.0).epsilon(1e-14));
  CHECK(wp.depth == doctest::Approx(2.0));
}

TEST_CASE("warp_point flags cheirality and bounds failures") {
  PoseSE3 behind;
  behind.translation = Eigen::Vector3d(0.0, 0.0, -2.5);
  const WarpedPoint wp = warp_point(PixelPoint{96.0, 72.0}, 2.0, kK, behind,
                                    ImageExtent{192, 144});
  CHECK_FALSE(wp.valid);

  PoseSE3 shift;
  shift.translation = Eigen::Vector3d(5.0, 0.0, 0.0);  // lands far right
  const WarpedPoint oob = warp_point(PixelPoint{96.0, 72.0}, 2.0, kK, shift,
                                     ImageExtent{192, 144});
  CHECK_FALSE(oob.valid);
  CHECK(oob.pixel.x > 191.0);  // projection still reported
}

TEST_CASE("warp_patch shares the center depth across samples") {
  SplitMix64 rng(9);
  const ImageExtent ext{192, 144};
  for (int i = 0; i < 50; ++i) {
    PoseSE3 pose;
    pose.rotation = testsup::random_small_rotation(rng, 0.05);
    pose.translation = 0.05 * testsup::random_unit_vector(rng);
    const PixelPoint c{rng.next_in(10.0, 180.0), rng.next_in(10.0, 130.0)};
    const double d = rng.next_in(1.0, 5.0);
    const SupportDomain dom = support_domain(c, 3);
    const WarpedPatch patch = warp_patch(dom, d, kK, pose, ext);
    for (int j = 0; j < 9; ++j) {
      const WarpedPoint wp = warp_point(dom.samples[j], d, kK, pose, ext);
      CHECK(wp.valid == patch.valid[j]);
      if (!wp.valid) continue;
      CHECK(std::abs(wp.pixel.x - patch.points[j].x) == 0.0);
      CHECK(std::abs(wp.pixel.y - patch.points[j].y) == 0.0);
      CHECK(wp.depth == patch.depths[j]);
    }
  }
}

TEST_CASE("warp forward then inverse returns to the start") {
  SplitMix64 rng(13);
  const ImageExtent ext{192, 144};
  int tested = 0;
  for (int i = 0; i < 500 && tested < 200; ++i) {
    PoseSE3 pose;
    pose.rotation = testsup::random_small_rotation(rng, 0.1);
    pose.translation = 0.1 * testsup::random_unit_vector(rng);
    const PixelPoint p{rng.next_in(20.0, 170.0), rng.next_in(20.0, 120.0)};
    const double d = rng.next_in(1.0, 5.0);
    const WarpedPoint fwd = warp_point(p, d, kK, pose, ext);
    if (!fwd.valid) continue;
    const WarpedPoint back =
        warp_point(fwd.pixel, fwd.depth, kK, pose_inverse(pose), ext);
    if (!back.valid) continue;
    ++tested;
    CHECK(std::abs(back.pixel.x - p.x) < 1e-9);
    CHECK(std::abs(back.pixel.y - p.y) < 1e-9);
    CHECK(std::abs(back.depth - d) < 1e-9);
  }
  CHECK(tested >= 100);
}

TEST_CASE("bilinear midpoint of a 2x2 cell averages the corners") {
  Image img(2, 2, 1);
  img.at(0, 0) = 0.1;
  img.at(1, 0) = 0.2;
  img.at(0, 1) = 0.4;
  img.at(1, 1) = 0.5;
  const SampleResult r = bilinear_sample(img, PixelPoint{0.5, 0.5});
  CHECK(r.valid);
  CHECK(r.value[0] == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("bilinear is exact on the integer lattice including the far edge") {
  SplitMix64 rng(17);
  const Image img = testsup::random_image(rng, 7, 5, 3);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 7; ++x) {
      const SampleResult r = bilinear_sample(
          img, PixelPoint{static_cast<double>(x), static_cast<double>(y)});
      CHECK(r.valid);
      for (int c = 0; c < 3; ++c) {
        CHECK(r.value[c] == img.at(x, y, c));
      }
    }
  }
}

TEST_CASE("bilinear output is bounded by the surrounding pixels") {
  SplitMix64 rng(19);
  const Image img = testsup::random_image(rng, 9, 6, 1);
  for (int i = 0; i < 1000; ++i) {
    const PixelPoint p{rng.next_in(0.0, 8.0), rng.next_in(0.0, 5.0)};
    const SampleResult r = bilinear_sample(img, p);
    REQUIRE(r.valid);
    const int x0 = std::min(static_cast<int>(p.x), 7);
    const int y0 = std::min(static_cast<int>(p.y), 4);
    double lo = 1.0, hi = 0.0;
    for (int dy = 0; dy <= 1; ++dy) {
      for (int dx = 0; dx <= 1; ++dx) {
        lo = std::min(lo, img.at(x0 + dx, y0 + dy, 0));
        hi = std::max(hi, img.at(x0 + dx, y0 + dy, 0));
      }
    }
    CHECK(r.value[0] >= lo - 1e-12);
    CHECK(r.value[0] <= hi + 1e-12);
  }
}

TEST_CASE("bilinear rejects positions outside the valid domain") {
  SplitMix64 rng(23);
  const Image img = testsup::random_image(rng, 4, 4, 1);
  CHECK_FALSE(bilinear_sample(img, PixelPoint{-0.001, 2.0}).valid);
  CHECK_FALSE(bilinear_sample(img, PixelPoint{3.001, 2.0}).valid);
  CHECK_FALSE(bilinear_sample(img, PixelPoint{2.0, -0.5}).valid);
  CHECK_FALSE(bilinear_sample(img, PixelPoint{2.0, 3.2}).valid);
  const double nan = std::nan("");
  CHECK_FALSE(bilinear_sample(img, PixelPoint{nan, 2.0}).valid);
  CHECK(bilinear_sample(img, PixelPoint{3.0, 3.0}).valid);
  CHECK(bilinear_sample(img, PixelPoint{0.0, 0.0}).valid);
}

TEST_CASE("bilinear gradient matches finite differences inside a cell") {
  SplitMix64 rng(29);
  const Image img = testsup::random_image(rng, 12, 10, 3);
  const double h = 1e-7;
  int tested = 0;
  for (int i = 0; i < 300; ++i) {
    // keep the probe and both FD evaluations inside one cell
    const double fx = rng.next_in(0.1, 0.9);
    const double fy = rng.next_in(0.1, 0.9);
    const PixelPoint p{rng.next_below(10) + fx, rng.next_below(8) + fy};
    const SampleGrad g = bilinear_sample_grad(img, p);
    REQUIRE(g.valid);
    const SampleResult xp = bilinear_sample(img, PixelPoint{p.x + h, p.y});
    const SampleResult xm = bilinear_sample(img, PixelPoint{p.x - h, p.y});
    const SampleResult yp = bilinear_sample(img, PixelPoint{p.x, p.y + h});
    const SampleResult ym = bilinear_sample(img, PixelPoint{p.x, p.y - h});
    for (int c = 0; c < 3; ++c) {
      CHECK(g.dx[c] ==
            doctest::Approx((xp.value[c] - xm.value[c]) / (2 * h)).epsilon(1e-5));
      CHECK(g.dy[c] ==
            doctest::Approx((yp.value[c] - ym.value[c]) / (2 * h)).epsilon(1e-5));
      CHECK(g.value[c] == bilinear_sample(img, p).value[c]);
    }
    ++tested;
  }
  CHECK(tested == 300);
}

TEST_CASE("single row or column images interpolate along the live axis") {
  Image row(3, 1, 1);
  row.at(0, 0) = 0.0;
  row.at(1, 0) = 0.5;
  row.at(2, 0) = 1.0;
  const SampleResult r = bilinear_sample(row, PixelPoint{1.5, 0.0});
  CHECK(r.valid);
  CHECK(r.value[0] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK_FALSE(bilinear_sample(row, PixelPoint{1.5, 0.5}).valid);
}

TEST_SUITE_END();
