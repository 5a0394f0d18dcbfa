#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace patchdepth {

// Everything the command line can set, with the project defaults baked in.
// A JSON config file fills this first, explicit flags override, and the
// fully resolved struct is written back to the output directory so runs can
// be reproduced from their artifacts alone.
struct RunConfig {
  std::string command;
  std::string out_dir;

  // inputs
  std::string scene_dir;            // directory produced by `synth`
  std::string input_image;          // keypoints / segment
  std::string target_path;          // refine with explicit files
  std::vector<std::string> source_paths;
  std::string intrinsics_path;
  std::string init_depth_path;      // optional PFM for refine
  std::string pred_depth_path;      // eval
  std::string gt_depth_path;        // eval
  std::string pred_pose_path;       // eval (optional)
  std::string gt_pose_path;         // eval (optional)

  // synth
  int width = 192;
  int height = 144;
  int frames = 3;  // target plus sources; 3 or 5 at the CLI
  std::uint64_t seed = 1;

  // keypoints
  int keypoint_count = 3000;
  int block_size = 16;
  double grad_threshold = 7.0 / 255.0;

  // segmentation
  double felz_k = 300.0 / 255.0;
  double felz_sigma = 0.8;
  int felz_min_size = 100;
  int min_area = 1000;

  // loss
  int window = 3;
  double alpha = 0.85;
  double lambda1 = 0.001;
  double lambda2 = 0.05;
  double spp_epsilon = 1e-4;
  bool spp_raw_sum = false;

  // solver
  int iters = 500;
  double lr_depth = 1e-2;
  double lr_pose = 1e-3;
  int grid_scale = 4;
  double init_depth_value = 2.0;
  std::string init_poses = "identity";  // identity | gt (scene dirs only)
  bool fix_poses = false;
  bool fix_depth = false;

  // eval
  bool median_scale = true;
  int normal_window = 5;

  // gradcheck
  int gradcheck_samples = 50;

  void validate() const;
};

// Runs one subcommand to completion. Throws ValidationError / NumericError;
// the CLI wrapper maps those to exit codes 1 and 2.
void run(const RunConfig& cfg);

// Full argv-level entry point (parsing, config file merge, error mapping).
// Kept in the library so tests can drive the exact CLI surface in-process.
int cli_main(int argc, const char* const* argv);

}  // namespace patchdepth
