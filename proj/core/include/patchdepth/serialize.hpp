#pragma once

#include <optional>
#include <string>
#include <vector>

#include "patchdepth/eval.hpp"
#include "patchdepth/geometry.hpp"
#include "patchdepth/keypoints.hpp"
#include "patchdepth/pipeline.hpp"
#include "patchdepth/planes.hpp"
#include "patchdepth/solver.hpp"
#include "patchdepth/superpixels.hpp"
#include "patchdepth/synth.hpp"
#include "patchdepth/types.hpp"

// Text formats used by the command line tools. Everything round-trips:
// numbers are written shortest-round-trip, so parse(serialize(x)) == x
// bit for bit and re-running from serialized artifacts is reproducible.
// All parsers throw ValidationError with a hint at the offending content.

namespace patchdepth {

// Whole-file helpers; both throw ValidationError naming the path.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// {"fx":..,"fy":..,"cx":..,"cy":..}
std::string intrinsics_to_json(const Intrinsics& k);
Intrinsics intrinsics_from_json(const std::string& text);

// {"rotation":[9 row-major],"translation":[3]}
std::string pose_to_json(const PoseSE3& pose);
PoseSE3 pose_from_json(const std::string& text);

// {"poses":[pose, ...]}, source_from_target in source order
std::string poses_to_json(const std::vector<PoseSE3>& poses);
std::vector<PoseSE3> poses_from_json(const std::string& text);

// Header line "x,y,origin", then one "12,34,gradient|random" line per point.
std::string keypoints_to_csv(const KeypointSet& keypoints);
KeypointSet keypoints_from_csv(const std::string& text);

// [{"id":..,"area":..}, ...] in the order given (empty list serializes as []).
std::string regions_to_json(const std::vector<Superpixel>& regions);

// Fitted planes as [{"id":..,"a":[3],"area":..,"residual":..}]. The three
// inputs are parallel per region; entries without a usable fit are skipped.
std::string planes_to_json(const std::vector<RegionPlane>& planes,
                           const std::vector<Superpixel>& regions,
                           const std::vector<double>& residuals);

// One compact JSON object per line:
// {"iter":..,"total":..,"photometric":..,"smoothness":..,"planar":..,"surviving":..}
std::string trace_to_jsonl(const std::vector<IterationTrace>& trace);
std::vector<IterationTrace> trace_from_jsonl(const std::string& text);

// Evaluation results for one run: depth always, normals when a window was
// evaluated, one pose entry per source when ground-truth poses were given.
struct EvalReport {
  DepthMetrics depth;
  std::optional<NormalMetrics> normals;
  std::vector<PoseMetrics> poses;
};

// Flat JSON object; pose metrics keyed rot_deg_1, tr_deg_1, tr_cm_1, ...
std::string report_to_json(const EvalReport& report);

// Fixed-width table, one header and one value row per metric family,
// columns in the conventional benchmark order.
std::string report_to_table(const EvalReport& report);

// Full scene description. Plane frames (origin/e1/e2) are derived data and
// are rebuilt on load, not stored.
std::string scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const std::string& text);

// Every RunConfig field under its struct name. Loading applies the file's
// keys onto cfg so command-line flags can still override afterwards;
// unknown keys are rejected.
std::string run_config_to_json(const RunConfig& cfg);
void run_config_apply_json(const std::string& text, RunConfig& cfg);

}  // namespace patchdepth
