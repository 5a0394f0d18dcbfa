#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "patchdepth/geometry.hpp"
#include "patchdepth/types.hpp"

namespace patchdepth {

// Piecewise-planar scenes with analytic textures. Every view is rendered by
// exact ray casting, so depths, labels, and cross-view correspondences are
// known in closed form and usable as references in tests.

struct Wave {
  double amp = 0.0;
  double freq = 0.0;   // cycles per world unit
  double angle = 0.0;  // orientation of the wavefront in the plane
  double phase = 0.0;
};

// Per-channel sum of plane waves around a 0.5 bias. Amplitudes are budgeted
// so values stay well inside (0, 1).
struct SinusoidTexture {
  std::vector<std::vector<Wave>> channels;

  double eval(int channel, double u, double v) const;
};

// A textured infinite plane a^T X = 1. The texture lives in a fixed
// orthonormal frame of the plane, so it moves rigidly with the geometry.
struct PlanePrimitive {
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
  SinusoidTexture texture;
  // local texture frame, derived from a by make_plane_frame
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d e1 = Eigen::Vector3d::Zero();
  Eigen::Vector3d e2 = Eigen::Vector3d::Zero();
};

// Fills origin/e1/e2 with the point of the plane closest to the world origin
// and an orthonormal in-plane basis. Throws ValidationError for a zero a.
void make_plane_frame(PlanePrimitive& plane);

struct SceneSpec {
  int width = 0;
  int height = 0;
  int channels = 3;
  Intrinsics k;
  std::vector<PlanePrimitive> planes;
  // source_from_target, one per source view; the target camera is the world
  // frame
  std::vector<PoseSE3> source_poses;
};

struct RenderedView {
  Image image;
  DepthMap depth;
  std::vector<int> plane_id;  // per pixel, index into SceneSpec::planes
};

struct SyntheticScene {
  RenderedView target;
  std::vector<RenderedView> sources;
};

// Casts one ray per pixel from the camera at view_from_world and keeps the
// nearest hit in front of the camera. Throws CoverageError when any pixel
// misses every plane; the scene contract is full coverage in every view.
RenderedView render_view(const SceneSpec& spec, const PoseSE3& view_from_world);

// Renders the target (identity pose) and all sources.
SyntheticScene make_scene(const SceneSpec& spec);

// Three-plane room (back wall, floor, side wall) with small sideways source
// baselines and mild rotations. Textures are synthesized from the seed and
// band-limited per plane: a geometry prepass measures the largest world-space
// step between adjacent pixels over all views, and wave frequencies are
// capped so the rendered images stay far from the pixel Nyquist rate.
// num_sources must be 2 or 4.
SceneSpec default_scene_spec(int num_sources, std::uint64_t seed,
                             int width = 192, int height = 144);

}  // namespace patchdepth
