#include "patchdepth/synth.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "patchdepth/errors.hpp"
#include "patchdepth/rng.hpp"

namespace patchdepth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct GeometryPass {
  DepthMap depth;
  std::vector<int> plane_id;
  std::vector<Eigen::Vector3d> world;

  GeometryPass(int w, int h)
      : depth(w, h), plane_id(static_cast<std::size_t>(w) * h, -1),
        world(static_cast<std::size_t>(w) * h, Eigen::Vector3d::Zero()) {}
};

GeometryPass cast_rays(const SceneSpec& spec, const PoseSE3& view_from_world) {
  if (spec.width < 1 || spec.height < 1) {
    throw ValidationError("scene dimensions must be positive");
  }
  if (spec.planes.empty()) {
    throw ValidationError("scene has no planes");
  }
  spec.k.validate(spec.width, spec.height);

  GeometryPass out(spec.width, spec.height);
  const Eigen::Matrix3d rt = view_from_world.rotation.transpose();
  const Eigen::Vector3d origin = -(rt * view_from_world.translation);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const Eigen::Vector3d ray((x - spec.k.cx) / spec.k.fx,
                                (y - spec.k.cy) / spec.k.fy, 1.0);
      const Eigen::Vector3d dir = rt * ray;
      double best_s = 0.0;
      int best_plane = -1;
      for (std::size_t p = 0; p < spec.planes.size(); ++p) {
        const Eigen::Vector3d& a = spec.planes[p].a;
        const double denom = a.dot(dir);
        if (std::abs(denom) < 1e-12) continue;
        const double s = (1.0 - a.dot(origin)) / denom;
        if (s <= kCheiralityEps) continue;
        if (best_plane < 0 || s < best_s) {
          best_s = s;
          best_plane = static_cast<int>(p);
        }
      }
      if (best_plane < 0) {
        throw CoverageError("pixel (" + std::to_string(x) + ", " +
                            std::to_string(y) +
                            ") misses every plane of the scene");
      }
      const std::size_t i = out.depth.index(x, y);
      // view coordinates of the hit are s * ray, so its depth is exactly s
      out.depth.data[i] = best_s;
      out.plane_id[i] = best_plane;
      out.world[i] = origin + best_s * dir;
    }
  }
  return out;
}

}  // namespace

double SinusoidTexture::eval(int channel, double u, double v) const {
  if (channel < 0 || channel >= static_cast<int>(channels.size())) {
    throw ValidationError("texture channel out of range");
  }
  double value = 0.5;
  for (const Wave& w : channels[channel]) {
    const double along = std::cos(w.angle) * u + std::sin(w.angle) * v;
    value += w.amp * std::sin(kTwoPi * w.freq * along + w.phase);
  }
  return value;
}

void make_plane_frame(PlanePrimitive& plane) {
  const double norm2 = plane.a.squaredNorm();
  if (!(norm2 > 0.0) || !plane.a.allFinite()) {
    throw ValidationError("plane parameters must be finite and nonzero");
  }
  const Eigen::Vector3d n = plane.a / std::sqrt(norm2);
  plane.origin = plane.a / norm2;
  const Eigen::Vector3d helper =
      std::abs(n.z()) < 0.9 ? Eigen::Vector3d::UnitZ()
                            : Eigen::Vector3d::UnitX();
  plane.e1 = helper.cross(n).normalized();
  plane.e2 = n.cross(plane.e1);
}

RenderedView render_view(const SceneSpec& spec,
                         const PoseSE3& view_from_world) {
  if (spec.channels != 1 && spec.channels != 3) {
    throw ValidationError("scenes render 1 or 3 channels");
  }
  GeometryPass geo = cast_rays(spec, view_from_world);
  RenderedView out{Image(spec.width, spec.height, spec.channels),
                   std::move(geo.depth), std::move(geo.plane_id)};
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * spec.width + x;
      const PlanePrimitive& plane =
          spec.planes[static_cast<std::size_t>(out.plane_id[i])];
      const Eigen::Vector3d local = geo.world[i] - plane.origin;
      const double u = plane.e1.dot(local);
      const double v = plane.e2.dot(local);
      for (int c = 0; c < spec.channels; ++c) {
        out.image.at(x, y, c) =
            std::clamp(plane.texture.eval(c, u, v), 0.0, 1.0);
      }
    }
  }
  return out;
}

SyntheticScene make_scene(const SceneSpec& spec) {
  SyntheticScene scene;
  scene.target = render_view(spec, PoseSE3::identity());
  scene.sources.reserve(spec.source_poses.size());
  for (const PoseSE3& pose : spec.source_poses) {
    scene.sources.push_back(render_view(spec, pose));
  }
  return scene;
}

SceneSpec default_scene_spec(int num_sources, std::uint64_t seed, int width,
                             int height) {
  if (num_sources != 2 && num_sources != 4) {
    throw ValidationError("default scenes have 2 or 4 sources");
  }
  SceneSpec spec;
  spec.width = width;
  spec.height = height;
  spec.channels = 3;
  spec.k = Intrinsics{100.0, 100.0, (width - 1) / 2.0, (height - 1) / 2.0};

  // back wall z = 4, floor y = 1.2, side wall x = 1.6
  const Eigen::Vector3d plane_params[3] = {
      {0.0, 0.0, 0.25}, {0.0, 1.0 / 1.2, 0.0}, {0.625, 0.0, 0.0}};
  for (const Eigen::Vector3d& a : plane_params) {
    PlanePrimitive plane;
    plane.a = a;
    make_plane_frame(plane);
    spec.planes.push_back(plane);
  }

  // small sideways baselines with mild rotations, camera centers c mapped to
  // poses via t = -R c
  const Eigen::Vector3d centers[4] = {{0.05, 0.0, 0.0},
                                      {-0.05, 0.0, 0.0},
                                      {0.0, 0.05, 0.0},
                                      {0.0, -0.05, 0.0}};
  const Eigen::Vector3d spins[4] = {{0.002, -0.004, 0.001},
                                    {-0.002, 0.004, -0.001},
                                    {-0.004, 0.001, 0.002},
                                    {0.004, -0.001, -0.002}};
  for (int s = 0; s < num_sources; ++s) {
    Twist xi;
    xi.w = spins[s];
    PoseSE3 pose = se3_exp(xi);
    pose.translation = -(pose.rotation * centers[s]);
    spec.source_poses.push_back(pose);
  }

  // band-limit prepass: largest world step between same-plane neighbor
  // pixels across all views bounds the image-space frequency of a wave
  std::vector<double> max_step(spec.planes.size(), 0.0);
  std::vector<PoseSE3> views = spec.source_poses;
  views.insert(views.begin(), PoseSE3::identity());
  for (const PoseSE3& pose : views) {
    const GeometryPass geo = cast_rays(spec, pose);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::size_t i = geo.depth.index(x, y);
        for (const std::size_t j :
             {x + 1 < width ? geo.depth.index(x + 1, y) : i,
              y + 1 < height ? geo.depth.index(x, y + 1) : i}) {
          if (j == i || geo.plane_id[j] != geo.plane_id[i]) continue;
          const double step = (geo.world[j] - geo.world[i]).norm();
          double& acc = max_step[static_cast<std::size_t>(geo.plane_id[i])];
          acc = std::max(acc, step);
        }
      }
    }
  }

  // keep rendered textures far below the pixel Nyquist rate
  constexpr double kMaxCyclesPerPixel = 0.04;
  constexpr int kWavesPerChannel = 3;
  constexpr double kAmpBudget = 0.40;
  SplitMix64 rng(seed);
  for (std::size_t p = 0; p < spec.planes.size(); ++p) {
    const double fallback = 4.0 / spec.k.fx;  // typical depth over focal
    const double step = max_step[p] > 0.0 ? max_step[p] : fallback;
    const double max_freq = kMaxCyclesPerPixel / step;
    SinusoidTexture& tex = spec.planes[p].texture;
    tex.channels.assign(spec.channels, {});
    for (int c = 0; c < spec.channels; ++c) {
      std::vector<Wave>& waves = tex.channels[c];
      double amp_sum = 0.0;
      for (int k = 0; k < kWavesPerChannel; ++k) {
        Wave w;
        w.amp = rng.next_in(0.5, 1.0);
        amp_sum += w.amp;
        w.freq = max_freq * rng.next_in(0.3, 1.0);
        w.angle = rng.next_in(0.0, std::numbers::pi);
        w.phase = rng.next_in(0.0, kTwoPi);
        waves.push_back(w);
      }
      for (Wave& w : waves) w.amp *= kAmpBudget / amp_sum;
    }
  }
  return spec;
}

}  // namespace patchdepth
