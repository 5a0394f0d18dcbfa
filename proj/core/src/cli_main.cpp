#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "patchdepth/pipeline.hpp"
#include "patchdepth/serialize.hpp"

namespace patchdepth {

namespace {

// Binds every option onto cfg. Called twice when a config file is in play:
// once to discover --config, once more so explicit flags overwrite the file's
// values (defaults < config file < flags).
void add_options(CLI::App& app, RunConfig& cfg, std::string& config_path) {
  app.require_subcommand(1);

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path,
                    "JSON config applied before the flags");
    sub->add_option("--out", cfg.out_dir, "output directory (required)");
    sub->add_option("--seed", cfg.seed, "PRNG seed");
  };

  CLI::App* synth = app.add_subcommand(
      "synth", "render a piecewise-planar scene with ground truth");
  common(synth);
  synth->add_option("--frames", cfg.frames,
                    "frame count including the target: 3 or 5");
  synth->add_option("--width", cfg.width, "image width");
  synth->add_option("--height", cfg.height, "image height");

  CLI::App* keypoints = app.add_subcommand(
      "keypoints", "select gradient keypoints and visualize them");
  common(keypoints);
  keypoints->add_option("--input", cfg.input_image, "input image");
  keypoints->add_option("--keypoints", cfg.keypoint_count, "point budget");
  keypoints->add_option("--window-n", cfg.window,
                        "support spread, sets the border margin");
  keypoints->add_option("--block-size", cfg.block_size, "selection cell edge");
  keypoints->add_option("--grad-threshold", cfg.grad_threshold,
                        "required lead over the cell median");

  CLI::App* segment = app.add_subcommand(
      "segment", "graph-based segmentation and large-region extraction");
  common(segment);
  segment->add_option("--input", cfg.input_image, "input image");
  segment->add_option("--min-area", cfg.min_area,
                      "plane regions must exceed this pixel count");
  segment->add_option("--felz-k", cfg.felz_k, "merge threshold scale");
  segment->add_option("--felz-sigma", cfg.felz_sigma, "pre-smoothing sigma");
  segment->add_option("--felz-min-size", cfg.felz_min_size,
                      "post-merge minimum segment size");

  const auto loss_flags = [&](CLI::App* sub) {
    sub->add_option("--alpha", cfg.alpha, "SSIM weight in the photo loss");
    sub->add_option("--lambda1", cfg.lambda1, "smoothness weight");
    sub->add_option("--lambda2", cfg.lambda2, "plane-consistency weight");
    sub->add_option("--window-n", cfg.window, "support offsets are {-N,0,N}");
    sub->add_option("--keypoints", cfg.keypoint_count, "point budget");
    sub->add_option("--min-area", cfg.min_area, "plane region area floor");
    sub->add_option("--grid-scale", cfg.grid_scale,
                    "pixels per log-depth grid cell");
    sub->add_option("--spp-eps", cfg.spp_epsilon, "plane-fit ridge strength");
    sub->add_flag("--spp-raw-sum", cfg.spp_raw_sum,
                  "skip the plane-term averaging");
  };

  CLI::App* refine = app.add_subcommand(
      "refine", "optimize the depth grid and source poses");
  common(refine);
  loss_flags(refine);
  refine->add_option("--scene", cfg.scene_dir, "scene directory from synth");
  refine->add_option("--target", cfg.target_path, "target image");
  refine->add_option("--source", cfg.source_paths, "source image (repeat)");
  refine->add_option("--intrinsics", cfg.intrinsics_path, "intrinsics JSON");
  refine->add_option("--init-depth", cfg.init_depth_path,
                     "initial depth PFM (default: constant)");
  refine->add_option("--init-depth-value", cfg.init_depth_value,
                     "constant initial depth");
  refine->add_option("--init-poses", cfg.init_poses, "identity or gt");
  refine->add_option("--iters", cfg.iters, "optimization iterations");
  refine->add_option("--lr-depth", cfg.lr_depth, "depth step size");
  refine->add_option("--lr-pose", cfg.lr_pose, "pose step size");
  refine->add_flag("--fix-poses", cfg.fix_poses, "do not update poses");
  refine->add_flag("--fix-depth", cfg.fix_depth, "do not update depth");
  refine->add_option("--normal-window", cfg.normal_window,
                     "plane-fit window for normal metrics");
  refine->add_flag("!--no-median-scale", cfg.median_scale,
                   "skip median scaling in the metrics");

  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "compare analytic gradients against finite differences");
  common(gradcheck);
  loss_flags(gradcheck);
  gradcheck->add_option("--samples", cfg.gradcheck_samples,
                        "random log-depth coordinates to probe");
  gradcheck->add_option("--frames", cfg.frames,
                        "frame count including the target: 3 or 5");
  gradcheck->add_option("--width", cfg.width, "image width");
  gradcheck->add_option("--height", cfg.height, "image height");

  CLI::App* eval = app.add_subcommand(
      "eval", "score a predicted depth map against ground truth");
  common(eval);
  eval->add_option("--pred", cfg.pred_depth_path, "predicted depth PFM");
  eval->add_option("--gt", cfg.gt_depth_path, "ground-truth depth PFM");
  eval->add_option("--scene", cfg.scene_dir,
                   "scene directory providing gt depth/poses/intrinsics");
  eval->add_option("--intrinsics", cfg.intrinsics_path,
                   "intrinsics JSON for normal metrics");
  eval->add_option("--pred-poses", cfg.pred_pose_path, "predicted poses JSON");
  eval->add_option("--gt-poses", cfg.gt_pose_path, "ground-truth poses JSON");
  eval->add_option("--normal-window", cfg.normal_window,
                   "plane-fit window for normal metrics");
  eval->add_flag("!--no-median-scale", cfg.median_scale,
                 "skip median scaling");
}

std::string parsed_command(const CLI::App& app) {
  const auto subs = app.get_subcommands();
  return subs.empty() ? std::string() : subs.front()->get_name();
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  RunConfig cfg;
  std::string config_path;
  CLI::App app{"patch-based photometric depth refinement"};
  add_options(app, cfg, config_path);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // help/version exit cleanly; anything else is a validation failure
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (!config_path.empty()) {
      RunConfig merged;
      run_config_apply_json(read_text_file(config_path), merged);
      std::string ignored;
      CLI::App reparse{"patch-based photometric depth refinement"};
      add_options(reparse, merged, ignored);
      try {
        reparse.parse(argc, argv);
      } catch (const CLI::ParseError& e) {
        return reparse.exit(e) == 0 ? 0 : 1;
      }
      cfg = merged;
    }
    cfg.command = parsed_command(app);
    run(cfg);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 2;
  }
  return 0;
}

}  // namespace patchdepth
