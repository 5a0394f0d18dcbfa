#pragma once

#include <vector>

#include "patchdepth/bundle.hpp"
#include "patchdepth/losses.hpp"

namespace patchdepth {

struct SolverConfig {
  int iters = 500;
  double lr_depth = 1e-2;  // log-depth grid step size
  double lr_pose = 1e-3;   // twist step size
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool fix_poses = false;
  bool fix_depth = false;
  double depth_min = 0.1;  // clamp applied to the grid after each step
  double depth_max = 10.0;
  TotalLossOptions loss;

  void validate() const;
};

struct IterationTrace {
  int iter = 0;
  double total = 0.0;
  double photometric = 0.0;
  double smoothness = 0.0;
  double planar = 0.0;
  int surviving_points = 0;
};

struct SolverResult {
  FrameBundle bundle;                // refined parameters
  std::vector<IterationTrace> trace; // one entry per iteration plus the end
  TotalLossResult final_eval;        // evaluated at the refined parameters
};

// First-order refinement of the log-depth grid and the source twists with
// per-parameter adaptive steps (decaying first and second moment averages
// with bias correction). Twist moments live in the left-increment chart: each
// step composes exp(step) onto the current pose and re-extracts the twist.
// Throws NumericError, with the iteration in the message, when the loss
// stops being finite or every keypoint loses image support.
SolverResult refine(FrameBundle bundle, const SolverConfig& config);

}  // namespace patchdepth
