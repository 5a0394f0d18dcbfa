// Microbenchmarks for the hot paths: patch warping and scoring, the full
// objective evaluation, segmentation, plane fitting, and a whole solver
// iteration. Run with --benchmark_min_time=... for tighter numbers.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "patchdepth/bundle.hpp"
#include "patchdepth/geometry.hpp"
#include "patchdepth/keypoints.hpp"
#include "patchdepth/losses.hpp"
#include "patchdepth/planes.hpp"
#include "patchdepth/rng.hpp"
#include "patchdepth/solver.hpp"
#include "patchdepth/superpixels.hpp"
#include "patchdepth/synth.hpp"

namespace {

using namespace patchdepth;

constexpr std::uint64_t kSeed = 3;

const SceneSpec& spec() {
  static const SceneSpec s = default_scene_spec(2, kSeed);
  return s;
}

const SyntheticScene& scene() {
  static const SyntheticScene s = make_scene(spec());
  return s;
}

std::vector<Superpixel> plane_regions() {
  const RenderedView& view = scene().target;
  int max_id = 0;
  for (int id : view.plane_id) max_id = std::max(max_id, id);
  std::vector<Superpixel> regions(static_cast<std::size_t>(max_id) + 1);
  for (int i = 0; i <= max_id; ++i) regions[static_cast<std::size_t>(i)].id = i;
  for (int y = 0; y < spec().height; ++y) {
    for (int x = 0; x < spec().width; ++x) {
      const int id =
          view.plane_id[static_cast<std::size_t>(y) * spec().width + x];
      regions[static_cast<std::size_t>(id)].pixels.emplace_back(x, y);
    }
  }
  return regions;
}

FrameBundle working_bundle(int keypoints) {
  FrameBundle bundle;
  bundle.target = scene().target.image;
  for (const auto& src : scene().sources) bundle.sources.push_back(src.image);
  bundle.k = spec().k;
  KeypointParams params;
  params.count = keypoints;
  params.margin = 4;
  bundle.keypoints = select_keypoints(gradient_map(bundle.target), params,
                                      kSeed);
  bundle.regions = plane_regions();
  DepthMap off = scene().target.depth;
  for (double& d : off.data) d *= 1.1;
  bundle.grid = DepthGrid::from_depth_map(off, 4);
  for (const auto& pose : spec().source_poses) {
    bundle.twists.push_back(se3_log(pose));
  }
  return bundle;
}

void bm_bilinear_sample(benchmark::State& state) {
  const Image& img = scene().target.image;
  SplitMix64 rng(kSeed);
  std::vector<PixelPoint> points(1024);
  for (auto& p : points) {
    p.x = rng.next_in(1.0, img.width - 2.0);
    p.y = rng.next_in(1.0, img.height - 2.0);
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const SampleResult s = bilinear_sample(img, points[i & 1023]);
    benchmark::DoNotOptimize(s.value);
    ++i;
  }
}
BENCHMARK(bm_bilinear_sample);

void bm_warp_patch(benchmark::State& state) {
  const PoseSE3 pose = spec().source_poses[0];
  const ImageExtent ext{spec().width, spec().height};
  const SupportDomain dom = support_domain({96.0, 72.0}, 3);
  const double depth = scene().target.depth.at(96, 72);
  for (auto _ : state) {
    const WarpedPatch wp = warp_patch(dom, depth, spec().k, pose, ext);
    benchmark::DoNotOptimize(wp.valid_count());
  }
}
BENCHMARK(bm_warp_patch);

void bm_eval_patch_term(benchmark::State& state) {
  const bool with_grad = state.range(0) != 0;
  const PoseSE3 pose = spec().source_poses[0];
  const SupportDomain dom = support_domain({96.0, 72.0}, 3);
  const double depth = 1.1 * scene().target.depth.at(96, 72);
  const PhotoOptions opt;
  for (auto _ : state) {
    const PatchTerm term =
        eval_patch_term(scene().target.image, scene().sources[0].image, dom,
                        depth, spec().k, pose, opt, with_grad);
    benchmark::DoNotOptimize(term.value);
  }
}
BENCHMARK(bm_eval_patch_term)->Arg(0)->Arg(1)->ArgName("grad");

void bm_total_loss_and_grad(benchmark::State& state) {
  const FrameBundle bundle = working_bundle(static_cast<int>(state.range(0)));
  const TotalLossOptions opt;
  for (auto _ : state) {
    const TotalLossResult r = total_loss_and_grad(bundle, opt);
    benchmark::DoNotOptimize(r.breakdown.total);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_total_loss_and_grad)->Arg(1000)->Arg(3000)->ArgName("keypoints");

void bm_felzenszwalb_segment(benchmark::State& state) {
  const Image& img = scene().target.image;
  const FelzParams params;
  for (auto _ : state) {
    const LabelMap lm = felzenszwalb_segment(img, params);
    benchmark::DoNotOptimize(lm.num_segments);
  }
}
BENCHMARK(bm_felzenszwalb_segment);

void bm_fit_plane(benchmark::State& state) {
  SplitMix64 rng(kSeed);
  std::vector<Eigen::Vector3d> points(50);
  for (auto& p : points) {
    const double x = rng.next_in(-2.0, 2.0);
    const double y = rng.next_in(-2.0, 2.0);
    p = Eigen::Vector3d(x, y, 2.0 + 0.3 * x - 0.2 * y);
  }
  for (auto _ : state) {
    const PlaneParams fit = fit_plane(points, 1e-8);
    benchmark::DoNotOptimize(fit.a);
  }
}
BENCHMARK(bm_fit_plane);

void bm_refine_iteration(benchmark::State& state) {
  FrameBundle bundle = working_bundle(3000);
  SolverConfig cfg;
  cfg.iters = 1;
  for (auto _ : state) {
    SolverResult res = refine(bundle, cfg);
    benchmark::DoNotOptimize(res.trace.back().total);
  }
}
BENCHMARK(bm_refine_iteration)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
