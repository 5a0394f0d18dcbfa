#include "patchdepth/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "patchdepth/eval.hpp"
#include "patchdepth/image_io.hpp"
#include "patchdepth/losses.hpp"
#include "patchdepth/rng.hpp"
#include "patchdepth/serialize.hpp"
#include "patchdepth/solver.hpp"
#include "patchdepth/synth.hpp"

namespace patchdepth {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void prepare_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) {
    throw ValidationError("cannot create output directory " + cfg.out_dir +
                          ": " + ec.message());
  }
  // First artifact of every run, so even failed runs stay reproducible.
  write_text_file(join(cfg.out_dir, "resolved_config.json"),
                  run_config_to_json(cfg));
}

int source_count(int frames) { return frames - 1; }

KeypointSet pick_keypoints(const Image& img, const RunConfig& cfg) {
  KeypointParams params;
  params.count = cfg.keypoint_count;
  params.block_size = cfg.block_size;
  params.margin = cfg.window + 1;  // keeps every support sample in bounds
  params.grad_threshold = cfg.grad_threshold;
  return select_keypoints(gradient_map(img), params, cfg.seed);
}

std::vector<Superpixel> pick_regions(const Image& img, const RunConfig& cfg,
                                     LabelMap* labels_out = nullptr) {
  FelzParams params;
  params.k = cfg.felz_k;
  params.sigma = cfg.felz_sigma;
  params.min_size = cfg.felz_min_size;
  LabelMap labels = felzenszwalb_segment(img, params);
  auto regions = large_regions(labels, cfg.min_area);
  if (labels_out != nullptr) {
    *labels_out = std::move(labels);
  }
  return regions;
}

TotalLossOptions loss_options(const RunConfig& cfg) {
  TotalLossOptions opt;
  opt.alpha = cfg.alpha;
  opt.lambda_smooth = cfg.lambda1;
  opt.lambda_planar = cfg.lambda2;
  opt.window = cfg.window;
  opt.spp_eps = cfg.spp_epsilon;
  opt.spp_raw_sum = cfg.spp_raw_sum;
  return opt;
}

// What refine/gradcheck/eval can pull out of a directory written by synth.
struct LoadedScene {
  Image target;
  std::vector<Image> sources;
  Intrinsics k;
  std::vector<PoseSE3> gt_poses;  // empty when the file is absent
  DepthMap gt_depth;              // empty() when the file is absent
};

LoadedScene load_scene_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw ValidationError("scene directory " + dir + " does not exist");
  }
  LoadedScene scene;
  scene.target = read_image(join(dir, "target.png"));
  for (int i = 1;; ++i) {
    const std::string path =
        join(dir, "source_" + std::to_string(i) + ".png");
    if (!fs::exists(path)) {
      break;
    }
    scene.sources.push_back(read_image(path));
  }
  if (scene.sources.empty()) {
    throw ValidationError("scene directory " + dir +
                          " has no source_*.png frames");
  }
  scene.k = intrinsics_from_json(read_text_file(join(dir, "intrinsics.json")));
  if (fs::exists(join(dir, "gt_poses.json"))) {
    scene.gt_poses = poses_from_json(read_text_file(join(dir, "gt_poses.json")));
  }
  if (fs::exists(join(dir, "gt_depth.pfm"))) {
    scene.gt_depth = read_depth_pfm(join(dir, "gt_depth.pfm"));
  }
  return scene;
}

void run_synth(const RunConfig& cfg) {
  const SceneSpec spec = default_scene_spec(source_count(cfg.frames), cfg.seed,
                                            cfg.width, cfg.height);
  const SyntheticScene scene = make_scene(spec);
  write_image(join(cfg.out_dir, "target.png"), scene.target.image);
  for (std::size_t i = 0; i < scene.sources.size(); ++i) {
    write_image(join(cfg.out_dir, "source_" + std::to_string(i + 1) + ".png"),
                scene.sources[i].image);
  }
  write_depth_pfm(join(cfg.out_dir, "gt_depth.pfm"), scene.target.depth);
  write_image(join(cfg.out_dir, "gt_depth_preview.png"),
              depth_preview(scene.target.depth));
  LabelMap labels;
  labels.width = spec.width;
  labels.height = spec.height;
  labels.labels = scene.target.plane_id;
  labels.num_segments = static_cast<int>(spec.planes.size());
  write_labels_png(join(cfg.out_dir, "gt_labels.png"), labels);
  write_text_file(join(cfg.out_dir, "intrinsics.json"),
                  intrinsics_to_json(spec.k));
  write_text_file(join(cfg.out_dir, "gt_poses.json"),
                  poses_to_json(spec.source_poses));
  write_text_file(join(cfg.out_dir, "scene_spec.json"),
                  scene_spec_to_json(spec));
  std::printf("synth: %dx%d scene with %zu sources -> %s\n", spec.width,
              spec.height, scene.sources.size(), cfg.out_dir.c_str());
}

void run_keypoints(const RunConfig& cfg) {
  if (cfg.input_image.empty()) {
    throw ValidationError("keypoints needs --input <image>");
  }
  const Image img = read_image(cfg.input_image);
  const KeypointSet set = pick_keypoints(img, cfg);
  write_text_file(join(cfg.out_dir, "keypoints.csv"), keypoints_to_csv(set));
  write_image(join(cfg.out_dir, "keypoints.png"), keypoint_overlay(img, set));
  std::printf("keypoints: %zu points -> %s\n", set.points.size(),
              cfg.out_dir.c_str());
}

void run_segment(const RunConfig& cfg) {
  if (cfg.input_image.empty()) {
    throw ValidationError("segment needs --input <image>");
  }
  const Image img = read_image(cfg.input_image);
  LabelMap labels;
  const auto regions = pick_regions(img, cfg, &labels);
  write_labels_png(join(cfg.out_dir, "labels.png"), labels);
  write_image(join(cfg.out_dir, "regions.png"), region_overlay(img, labels));
  write_text_file(join(cfg.out_dir, "large_regions.json"),
                  regions_to_json(regions));
  std::printf("segment: %d segments, %zu large regions -> %s\n",
              labels.num_segments, regions.size(), cfg.out_dir.c_str());
}

// Pose error rows for sources whose translations support the metric; a zero
// translation on either side has no direction or scale to compare.
std::vector<PoseMetrics> safe_pose_metrics(const std::vector<PoseSE3>& est,
                                           const std::vector<PoseSE3>& gt) {
  std::vector<PoseMetrics> out;
  if (est.size() != gt.size()) {
    return out;
  }
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (est[i].translation.norm() < 1e-12 ||
        gt[i].translation.norm() < 1e-12) {
      continue;
    }
    out.push_back(pose_metrics(est[i], gt[i]));
  }
  return out;
}

void run_refine(const RunConfig& cfg) {
  FrameBundle bundle;
  std::vector<PoseSE3> gt_poses;
  DepthMap gt_depth;
  if (!cfg.scene_dir.empty()) {
    LoadedScene scene = load_scene_dir(cfg.scene_dir);
    bundle.target = std::move(scene.target);
    bundle.sources = std::move(scene.sources);
    bundle.k = scene.k;
    gt_poses = std::move(scene.gt_poses);
    gt_depth = std::move(scene.gt_depth);
  } else {
    if (cfg.target_path.empty() || cfg.source_paths.empty() ||
        cfg.intrinsics_path.empty()) {
      throw ValidationError(
          "refine needs --scene, or --target with --source (repeatable) "
          "and --intrinsics");
    }
    bundle.target = read_image(cfg.target_path);
    for (const auto& path : cfg.source_paths) {
      bundle.sources.push_back(read_image(path));
    }
    bundle.k =
        intrinsics_from_json(read_text_file(cfg.intrinsics_path));
  }

  if (!cfg.init_depth_path.empty()) {
    bundle.grid = DepthGrid::from_depth_map(read_depth_pfm(cfg.init_depth_path),
                                            cfg.grid_scale);
    if (bundle.grid.width != bundle.target.width ||
        bundle.grid.height != bundle.target.height) {
      throw ValidationError("--init-depth extent does not match the target");
    }
  } else {
    bundle.grid = DepthGrid::make(bundle.target.width, bundle.target.height,
                                  cfg.grid_scale, cfg.init_depth_value);
  }

  if (cfg.init_poses == "gt") {
    if (gt_poses.size() != bundle.sources.size()) {
      throw ValidationError(
          "--init-poses gt needs a scene directory with gt_poses.json");
    }
    for (const auto& pose : gt_poses) {
      bundle.twists.push_back(se3_log(pose));
    }
  } else {
    bundle.twists.assign(bundle.sources.size(), Twist{});
  }

  bundle.keypoints = pick_keypoints(bundle.target, cfg);
  bundle.regions = pick_regions(bundle.target, cfg);
  bundle.validate();

  SolverConfig solver;
  solver.iters = cfg.iters;
  solver.lr_depth = cfg.lr_depth;
  solver.lr_pose = cfg.lr_pose;
  solver.fix_poses = cfg.fix_poses;
  solver.fix_depth = cfg.fix_depth;
  solver.loss = loss_options(cfg);
  const SolverResult result = refine(std::move(bundle), solver);

  DepthMap depth = result.bundle.grid.upsample();
  // Snap to the precision of the shipped PFM so the metrics below describe
  // the artifact itself; a later eval of depth.pfm then agrees exactly.
  for (auto& d : depth.data) {
    d = static_cast<double>(static_cast<float>(d));
  }
  write_depth_pfm(join(cfg.out_dir, "depth.pfm"), depth);
  write_image(join(cfg.out_dir, "preview.png"), depth_preview(depth));
  write_text_file(join(cfg.out_dir, "trace.jsonl"),
                  trace_to_jsonl(result.trace));
  write_text_file(join(cfg.out_dir, "poses.json"),
                  poses_to_json(result.bundle.poses()));

  SppOptions spp_opt;
  spp_opt.eps = cfg.spp_epsilon;
  spp_opt.raw_sum = cfg.spp_raw_sum;
  const auto planes = fit_region_planes(depth, result.bundle.regions,
                                        result.bundle.k, spp_opt.eps);
  const auto spp = spp_loss_with_planes(depth, result.bundle.regions,
                                        result.bundle.k, planes, spp_opt);
  write_text_file(join(cfg.out_dir, "planes.json"),
                  planes_to_json(planes, result.bundle.regions,
                                 spp.region_residuals));

  if (!gt_depth.empty()) {
    EvalReport report;
    report.depth = depth_metrics(depth, gt_depth, cfg.median_scale);
    report.normals = normal_metrics(depth, gt_depth, result.bundle.k,
                                    cfg.normal_window);
    report.poses = safe_pose_metrics(result.bundle.poses(), gt_poses);
    write_text_file(join(cfg.out_dir, "metrics.json"), report_to_json(report));
    write_text_file(join(cfg.out_dir, "metrics.txt"), report_to_table(report));
  }

  const auto& first = result.trace.front();
  const auto& last = result.trace.back();
  std::printf("refine: total %.6g -> %.6g over %d iterations -> %s\n",
              first.total, last.total, last.iter, cfg.out_dir.c_str());
}

// One finite-difference read of the loss along a single coordinate,
// with the step-halving smoothness probe used to recognize brackets that
// straddle a bilinear cell boundary or a min-switch; those mix one-sided
// slopes and say nothing about the analytic gradient.
struct FdProbe {
  double fd = 0.0;
  bool smooth = false;
};

template <typename F>
FdProbe fd_probe(F&& value_at, double h) {
  const double wide = (value_at(h) - value_at(-h)) / (2.0 * h);
  const double narrow = (value_at(h / 4.0) - value_at(-h / 4.0)) / (h / 2.0);
  const double scale = std::max({std::abs(wide), std::abs(narrow), 1e-6});
  return {wide, std::abs(wide - narrow) / scale < 3e-5};
}

void run_gradcheck(const RunConfig& cfg) {
  const SceneSpec spec = default_scene_spec(source_count(cfg.frames), cfg.seed,
                                            cfg.width, cfg.height);
  const SyntheticScene scene = make_scene(spec);

  FrameBundle bundle;
  bundle.target = scene.target.image;
  for (const auto& src : scene.sources) {
    bundle.sources.push_back(src.image);
  }
  bundle.k = spec.k;
  bundle.grid = DepthGrid::from_depth_map(scene.target.depth, cfg.grid_scale);
  SplitMix64 rng(cfg.seed ^ 0x67dc4d55u);
  for (auto& l : bundle.grid.log_depth) {
    l += 0.1 * (rng.next_double() - 0.5);  // move off the oracle optimum
  }
  // Jitter the poses too. The synthetic sources sit symmetrically around the
  // target, which leaves many keypoints with their two source costs tied;
  // finite differences across such a tie mix the two one-sided slopes. A
  // generic nearby point in pose space has no such ties.
  for (const auto& pose : spec.source_poses) {
    Twist jitter;
    for (int i = 0; i < 3; ++i) {
      jitter.v(i) = 0.01 * (rng.next_double() - 0.5);
    }
    for (int i = 0; i < 3; ++i) {
      jitter.w(i) = 0.002 * (rng.next_double() - 0.5);
    }
    bundle.twists.push_back(se3_log(pose_compose(se3_exp(jitter), pose)));
  }
  bundle.keypoints = pick_keypoints(bundle.target, cfg);
  bundle.regions = pick_regions(bundle.target, cfg);
  bundle.validate();

  const TotalLossOptions opt = loss_options(cfg);
  const TotalLossResult at_point = total_loss_and_grad(bundle, opt);

  double max_rel = 0.0;
  int checked = 0;
  int skipped = 0;
  const auto record = [&](const FdProbe& probe, double analytic) {
    const double scale = std::max({std::abs(probe.fd), std::abs(analytic), 1e-6});
    const double rel = std::abs(probe.fd - analytic) / scale;
    // a mismatch only gets excused when the probe itself detected a kink;
    // agreeing probes count even there, since agreement cannot be luck
    if (rel >= 1e-4 && !probe.smooth) {
      ++skipped;
      return;
    }
    max_rel = std::max(max_rel, rel);
    ++checked;
  };

  const std::size_t nodes = bundle.grid.log_depth.size();
  FrameBundle probe_bundle = bundle;
  for (int s = 0; s < cfg.gradcheck_samples; ++s) {
    const std::size_t i = static_cast<std::size_t>(rng.next_below(
        static_cast<std::uint64_t>(nodes)));
    const double backup = probe_bundle.grid.log_depth[i];
    const auto value_at = [&](double h) {
      probe_bundle.grid.log_depth[i] = backup + h;
      const double v = total_loss_value(probe_bundle, opt, at_point.planes);
      probe_bundle.grid.log_depth[i] = backup;
      return v;
    };
    record(fd_probe(value_at, 1e-5), at_point.grads.grid[i]);
  }

  for (std::size_t s = 0; s < bundle.twists.size(); ++s) {
    for (int c = 0; c < 6; ++c) {
      const auto value_at = [&](double h) {
        Twist delta;
        if (c < 3) {
          delta.v(c) = h;
        } else {
          delta.w(c - 3) = h;
        }
        // left-multiplicative increment, matching the analytic convention
        probe_bundle.twists[s] =
            se3_log(pose_compose(se3_exp(delta), se3_exp(bundle.twists[s])));
        const double v = total_loss_value(probe_bundle, opt, at_point.planes);
        probe_bundle.twists[s] = bundle.twists[s];
        return v;
      };
      record(fd_probe(value_at, 1e-7), at_point.grads.twists[s](c));
    }
  }

  const int total = cfg.gradcheck_samples +
                    6 * static_cast<int>(bundle.twists.size());
  const bool too_many_skips = skipped > std::max(3, total / 10);
  const bool passed = checked > 0 && max_rel < 1e-4 && !too_many_skips;

  char summary[256];
  std::snprintf(summary, sizeof(summary),
                "{\n  \"max_rel_err\": %.17g,\n  \"checked\": %d,\n"
                "  \"skipped\": %d,\n  \"threshold\": 1e-4,\n"
                "  \"passed\": %s\n}\n",
                max_rel, checked, skipped, passed ? "true" : "false");
  write_text_file(join(cfg.out_dir, "gradcheck.json"), summary);
  std::printf(
      "gradcheck: max rel err %.3g over %d coordinates (%d near a kink)\n",
      max_rel, checked, skipped);
  if (!passed) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "gradient check failed: max rel err %.3g over %d "
                  "coordinates, %d skipped",
                  max_rel, checked, skipped);
    throw NumericError(msg);
  }
}

void run_eval(const RunConfig& cfg) {
  if (cfg.pred_depth_path.empty()) {
    throw ValidationError("eval needs --pred <depth.pfm>");
  }
  const DepthMap pred = read_depth_pfm(cfg.pred_depth_path);

  DepthMap gt;
  Intrinsics k;
  bool have_k = false;
  std::vector<PoseSE3> gt_poses;
  if (!cfg.scene_dir.empty()) {
    gt = read_depth_pfm(join(cfg.scene_dir, "gt_depth.pfm"));
    k = intrinsics_from_json(
        read_text_file(join(cfg.scene_dir, "intrinsics.json")));
    have_k = true;
    if (fs::exists(join(cfg.scene_dir, "gt_poses.json"))) {
      gt_poses =
          poses_from_json(read_text_file(join(cfg.scene_dir, "gt_poses.json")));
    }
  } else {
    if (cfg.gt_depth_path.empty()) {
      throw ValidationError("eval needs --gt <depth.pfm> or --scene <dir>");
    }
    gt = read_depth_pfm(cfg.gt_depth_path);
    if (!cfg.intrinsics_path.empty()) {
      k = intrinsics_from_json(read_text_file(cfg.intrinsics_path));
      have_k = true;
    }
  }
  if (!cfg.gt_pose_path.empty()) {
    gt_poses = poses_from_json(read_text_file(cfg.gt_pose_path));
  }

  EvalReport report;
  report.depth = depth_metrics(pred, gt, cfg.median_scale);
  if (have_k) {
    report.normals = normal_metrics(pred, gt, k, cfg.normal_window);
  }
  if (!cfg.pred_pose_path.empty() && !gt_poses.empty()) {
    const auto pred_poses =
        poses_from_json(read_text_file(cfg.pred_pose_path));
    report.poses = safe_pose_metrics(pred_poses, gt_poses);
  }

  write_text_file(join(cfg.out_dir, "metrics.json"), report_to_json(report));
  const std::string table = report_to_table(report);
  write_text_file(join(cfg.out_dir, "metrics.txt"), table);
  std::fputs(table.c_str(), stdout);
}

}  // namespace

void RunConfig::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string(name) + " must be positive");
    }
  };
  if (command != "synth" && command != "keypoints" && command != "segment" &&
      command != "refine" && command != "gradcheck" && command != "eval") {
    throw ValidationError("unknown command \"" + command + "\"");
  }
  if (out_dir.empty()) {
    throw ValidationError("--out <dir> is required");
  }
  if (frames != 3 && frames != 5) {
    throw ValidationError("--frames must be 3 or 5");
  }
  if (width < 16 || height < 16) {
    throw ValidationError("scene extent must be at least 16x16");
  }
  if (keypoint_count < 1) {
    throw ValidationError("--keypoints must be at least 1");
  }
  if (block_size < 1) {
    throw ValidationError("block size must be at least 1");
  }
  if (!(grad_threshold >= 0.0) || !std::isfinite(grad_threshold)) {
    throw ValidationError("gradient threshold must be non-negative");
  }
  positive(felz_k, "felzenszwalb k");
  if (!(felz_sigma >= 0.0) || !std::isfinite(felz_sigma)) {
    throw ValidationError("felzenszwalb sigma must be non-negative");
  }
  if (felz_min_size < 1) {
    throw ValidationError("felzenszwalb min size must be at least 1");
  }
  if (min_area < 0) {
    throw ValidationError("--min-area must be non-negative");
  }
  if (window < 1 || window > 8) {
    throw ValidationError("--window-n must be in [1, 8]");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ValidationError("--alpha must be in [0, 1]");
  }
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
    throw ValidationError("loss weights must be non-negative");
  }
  positive(spp_epsilon, "spp epsilon");
  if (iters < 0) {
    throw ValidationError("--iters must be non-negative");
  }
  positive(lr_depth, "depth learning rate");
  positive(lr_pose, "pose learning rate");
  if (grid_scale < 1) {
    throw ValidationError("--grid-scale must be at least 1");
  }
  positive(init_depth_value, "initial depth");
  if (init_poses != "identity" && init_poses != "gt") {
    throw ValidationError("--init-poses must be identity or gt");
  }
  if (normal_window < 3 || normal_window % 2 == 0) {
    throw ValidationError("normal window must be odd and at least 3");
  }
  if (gradcheck_samples < 1) {
    throw ValidationError("--samples must be at least 1");
  }
}

void run(const RunConfig& cfg) {
  cfg.validate();
  prepare_out_dir(cfg);
  if (cfg.command == "synth") {
    run_synth(cfg);
  } else if (cfg.command == "keypoints") {
    run_keypoints(cfg);
  } else if (cfg.command == "segment") {
    run_segment(cfg);
  } else if (cfg.command == "refine") {
    run_refine(cfg);
  } else if (cfg.command == "gradcheck") {
    run_gradcheck(cfg);
  } else {
    run_eval(cfg);
  }
}

}  // namespace patchdepth
