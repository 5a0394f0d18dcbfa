#include "patchdepth/serialize.hpp"

#include <Eigen/LU>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace patchdepth {

using json = nlohmann::ordered_json;

namespace {

json parse(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw ValidationError(std::string("malformed JSON in ") + what);
  }
  return j;
}

double need_number(const json& j, const char* key, const char* what) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number()) {
    throw ValidationError(std::string(what) + ": missing numeric field \"" +
                          key + "\"");
  }
  return it->get<double>();
}

std::vector<double> need_array(const json& j, const char* key,
                               std::size_t count, const char* what) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array() || it->size() != count) {
    throw ValidationError(std::string(what) + ": field \"" + key +
                          "\" must be an array of " + std::to_string(count) +
                          " numbers");
  }
  std::vector<double> out;
  out.reserve(count);
  for (const auto& v : *it) {
    if (!v.is_number()) {
      throw ValidationError(std::string(what) + ": field \"" + key +
                            "\" must be numeric");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

json intrinsics_node(const Intrinsics& k) {
  return json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}};
}

Intrinsics intrinsics_from_node(const json& j) {
  Intrinsics k;
  k.fx = need_number(j, "fx", "intrinsics");
  k.fy = need_number(j, "fy", "intrinsics");
  k.cx = need_number(j, "cx", "intrinsics");
  k.cy = need_number(j, "cy", "intrinsics");
  k.validate();
  return k;
}

json pose_node(const PoseSE3& pose) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      rot.push_back(pose.rotation(r, c));
    }
  }
  json tr = json::array();
  for (int i = 0; i < 3; ++i) {
    tr.push_back(pose.translation(i));
  }
  return json{{"rotation", rot}, {"translation", tr}};
}

PoseSE3 pose_from_node(const json& j) {
  const auto rot = need_array(j, "rotation", 9, "pose");
  const auto tr = need_array(j, "translation", 3, "pose");
  PoseSE3 pose;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      pose.rotation(r, c) = rot[static_cast<std::size_t>(r) * 3 + c];
    }
  }
  pose.translation = Eigen::Vector3d(tr[0], tr[1], tr[2]);
  const Eigen::Matrix3d gram =
      pose.rotation.transpose() * pose.rotation - Eigen::Matrix3d::Identity();
  if (gram.cwiseAbs().maxCoeff() > 1e-6 || pose.rotation.determinant() < 0.0) {
    throw ValidationError("pose: rotation is not a proper rotation matrix");
  }
  return pose;
}

std::string dump_pretty(const json& j) { return j.dump(2) + "\n"; }

const char* origin_word(KeypointOrigin origin) {
  return origin == KeypointOrigin::kGradient ? "gradient" : "random";
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot open " + path + " for reading");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof()) {
    throw ValidationError("failed while reading " + path);
  }
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ValidationError("cannot open " + path + " for writing");
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out.good()) {
    throw ValidationError("failed while writing " + path);
  }
}

std::string intrinsics_to_json(const Intrinsics& k) {
  return dump_pretty(intrinsics_node(k));
}

Intrinsics intrinsics_from_json(const std::string& text) {
  return intrinsics_from_node(parse(text, "intrinsics"));
}

std::string pose_to_json(const PoseSE3& pose) {
  return dump_pretty(pose_node(pose));
}

PoseSE3 pose_from_json(const std::string& text) {
  return pose_from_node(parse(text, "pose"));
}

std::string poses_to_json(const std::vector<PoseSE3>& poses) {
  json list = json::array();
  for (const auto& pose : poses) {
    list.push_back(pose_node(pose));
  }
  return dump_pretty(json{{"poses", list}});
}

std::vector<PoseSE3> poses_from_json(const std::string& text) {
  const json j = parse(text, "poses");
  auto it = j.find("poses");
  if (it == j.end() || !it->is_array()) {
    throw ValidationError("poses: missing \"poses\" array");
  }
  std::vector<PoseSE3> out;
  out.reserve(it->size());
  for (const auto& node : *it) {
    out.push_back(pose_from_node(node));
  }
  return out;
}

std::string keypoints_to_csv(const KeypointSet& keypoints) {
  std::string out = "x,y,origin\n";
  for (const auto& p : keypoints.points) {
    out += std::to_string(p.x);
    out += ',';
    out += std::to_string(p.y);
    out += ',';
    out += origin_word(p.origin);
    out += '\n';
  }
  return out;
}

KeypointSet keypoints_from_csv(const std::string& text) {
  KeypointSet set;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    if (lineno == 1 && line == "x,y,origin") {
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw ValidationError("keypoint CSV line " + std::to_string(lineno) +
                            " is not \"x,y,origin\": " + line);
    }
    Keypoint p;
    try {
      std::size_t used = 0;
      p.x = std::stoi(line.substr(0, c1), &used);
      if (used != c1) {
        throw std::invalid_argument("trailing");
      }
      const std::string ytok = line.substr(c1 + 1, c2 - c1 - 1);
      p.y = std::stoi(ytok, &used);
      if (used != ytok.size()) {
        throw std::invalid_argument("trailing");
      }
    } catch (const std::exception&) {
      throw ValidationError("keypoint CSV line " + std::to_string(lineno) +
                            " has non-integer coordinates: " + line);
    }
    const std::string word = line.substr(c2 + 1);
    if (word == "gradient") {
      p.origin = KeypointOrigin::kGradient;
    } else if (word == "random") {
      p.origin = KeypointOrigin::kRandom;
    } else {
      throw ValidationError("keypoint CSV line " + std::to_string(lineno) +
                            " has unknown origin \"" + word + "\"");
    }
    set.points.push_back(p);
  }
  return set;
}

std::string regions_to_json(const std::vector<Superpixel>& regions) {
  json list = json::array();
  for (const auto& region : regions) {
    list.push_back(json{{"id", region.id},
                        {"area", static_cast<int>(region.pixels.size())}});
  }
  return dump_pretty(list);
}

std::string planes_to_json(const std::vector<RegionPlane>& planes,
                           const std::vector<Superpixel>& regions,
                           const std::vector<double>& residuals) {
  if (planes.size() != regions.size() || residuals.size() != regions.size()) {
    throw ValidationError("plane export inputs are not parallel");
  }
  json list = json::array();
  for (std::size_t i = 0; i < planes.size(); ++i) {
    if (!planes[i].ok || !std::isfinite(residuals[i])) {
      continue;
    }
    const auto& a = planes[i].params.a;
    list.push_back(json{{"id", planes[i].region_id},
                        {"a", {a.x(), a.y(), a.z()}},
                        {"area", static_cast<int>(regions[i].pixels.size())},
                        {"residual", residuals[i]}});
  }
  return dump_pretty(list);
}

std::string trace_to_jsonl(const std::vector<IterationTrace>& trace) {
  std::string out;
  for (const auto& t : trace) {
    const json j{{"iter", t.iter},
                 {"total", t.total},
                 {"photometric", t.photometric},
                 {"smoothness", t.smoothness},
                 {"planar", t.planar},
                 {"surviving", t.surviving_points}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<IterationTrace> trace_from_jsonl(const std::string& text) {
  std::vector<IterationTrace> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    const json j = parse(line, "trace line");
    IterationTrace t;
    t.iter = static_cast<int>(need_number(j, "iter", "trace"));
    t.total = need_number(j, "total", "trace");
    t.photometric = need_number(j, "photometric", "trace");
    t.smoothness = need_number(j, "smoothness", "trace");
    t.planar = need_number(j, "planar", "trace");
    t.surviving_points =
        static_cast<int>(need_number(j, "surviving", "trace"));
    out.push_back(t);
  }
  return out;
}

std::string report_to_json(const EvalReport& report) {
  json j{{"rms", report.depth.rms},       {"rel", report.depth.rel},
         {"log10", report.depth.log10},   {"delta1", report.depth.delta1},
         {"delta2", report.depth.delta2}, {"delta3", report.depth.delta3},
         {"scale", report.depth.scale},   {"depth_pixels", report.depth.pixels}};
  if (report.normals) {
    j["normal_mean_deg"] = report.normals->mean_angle;
    j["normal_pct_11_25"] = report.normals->pct_11_25;
    j["normal_pct_22_5"] = report.normals->pct_22_5;
    j["normal_pct_30"] = report.normals->pct_30;
    j["normal_pixels"] = report.normals->pixels;
  }
  for (std::size_t i = 0; i < report.poses.size(); ++i) {
    const std::string tag = "_" + std::to_string(i + 1);
    j["rot_deg" + tag] = report.poses[i].rot_deg;
    j["tr_deg" + tag] = report.poses[i].tr_angle_deg;
    j["tr_cm" + tag] = report.poses[i].tr_cm;
  }
  return dump_pretty(j);
}

std::string report_to_table(const EvalReport& report) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-9s %8s %8s %8s %8s %8s %8s\n", "depth",
                "rms", "rel", "log10", "d<1.25", "d<1.25^2", "d<1.25^3");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-9s %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f\n",
                "", report.depth.rms, report.depth.rel, report.depth.log10,
                report.depth.delta1, report.depth.delta2, report.depth.delta3);
  out += buf;
  if (report.normals) {
    std::snprintf(buf, sizeof(buf), "%-9s %8s %8s %8s %8s\n", "normals",
                  "mean", "11.25", "22.5", "30");
    out += buf;
    std::snprintf(buf, sizeof(buf), "%-9s %8.4f %8.4f %8.4f %8.4f\n", "",
                  report.normals->mean_angle, report.normals->pct_11_25,
                  report.normals->pct_22_5, report.normals->pct_30);
    out += buf;
  }
  if (!report.poses.empty()) {
    std::snprintf(buf, sizeof(buf), "%-9s %8s %8s %8s\n", "pose", "rot(deg)",
                  "tr(deg)", "tr(cm)");
    out += buf;
    for (std::size_t i = 0; i < report.poses.size(); ++i) {
      const std::string label = "src " + std::to_string(i + 1);
      std::snprintf(buf, sizeof(buf), "%-9s %8.4f %8.4f %8.4f\n",
                    label.c_str(), report.poses[i].rot_deg,
                    report.poses[i].tr_angle_deg, report.poses[i].tr_cm);
      out += buf;
    }
  }
  return out;
}

std::string scene_spec_to_json(const SceneSpec& spec) {
  json planes = json::array();
  for (const auto& plane : spec.planes) {
    json channels = json::array();
    for (const auto& waves : plane.texture.channels) {
      json list = json::array();
      for (const auto& w : waves) {
        list.push_back(json{{"amp", w.amp},
                            {"freq", w.freq},
                            {"angle", w.angle},
                            {"phase", w.phase}});
      }
      channels.push_back(list);
    }
    planes.push_back(json{{"a", {plane.a.x(), plane.a.y(), plane.a.z()}},
                          {"waves", channels}});
  }
  json sources = json::array();
  for (const auto& pose : spec.source_poses) {
    sources.push_back(pose_node(pose));
  }
  const json j{{"width", spec.width},   {"height", spec.height},
               {"channels", spec.channels}, {"intrinsics", intrinsics_node(spec.k)},
               {"planes", planes},      {"source_poses", sources}};
  return dump_pretty(j);
}

SceneSpec scene_spec_from_json(const std::string& text) {
  const json j = parse(text, "scene spec");
  SceneSpec spec;
  spec.width = static_cast<int>(need_number(j, "width", "scene spec"));
  spec.height = static_cast<int>(need_number(j, "height", "scene spec"));
  spec.channels = static_cast<int>(need_number(j, "channels", "scene spec"));
  auto kit = j.find("intrinsics");
  if (kit == j.end() || !kit->is_object()) {
    throw ValidationError("scene spec: missing \"intrinsics\" object");
  }
  spec.k = intrinsics_from_node(*kit);
  auto pit = j.find("planes");
  if (pit == j.end() || !pit->is_array() || pit->empty()) {
    throw ValidationError("scene spec: missing non-empty \"planes\" array");
  }
  for (const auto& node : *pit) {
    PlanePrimitive plane;
    const auto a = need_array(node, "a", 3, "scene plane");
    plane.a = Eigen::Vector3d(a[0], a[1], a[2]);
    auto wit = node.find("waves");
    if (wit == node.end() || !wit->is_array()) {
      throw ValidationError("scene plane: missing \"waves\" array");
    }
    for (const auto& channel : *wit) {
      if (!channel.is_array()) {
        throw ValidationError("scene plane: \"waves\" must hold arrays");
      }
      std::vector<Wave> waves;
      for (const auto& wnode : channel) {
        Wave w;
        w.amp = need_number(wnode, "amp", "wave");
        w.freq = need_number(wnode, "freq", "wave");
        w.angle = need_number(wnode, "angle", "wave");
        w.phase = need_number(wnode, "phase", "wave");
        waves.push_back(w);
      }
      plane.texture.channels.push_back(std::move(waves));
    }
    if (static_cast<int>(plane.texture.channels.size()) != spec.channels) {
      throw ValidationError(
          "scene plane: wave channel count does not match \"channels\"");
    }
    make_plane_frame(plane);
    spec.planes.push_back(std::move(plane));
  }
  auto sit = j.find("source_poses");
  if (sit == j.end() || !sit->is_array()) {
    throw ValidationError("scene spec: missing \"source_poses\" array");
  }
  for (const auto& node : *sit) {
    spec.source_poses.push_back(pose_from_node(node));
  }
  return spec;
}

std::string run_config_to_json(const RunConfig& cfg) {
  json sources = json::array();
  for (const auto& p : cfg.source_paths) {
    sources.push_back(p);
  }
  const json j{
      {"command", cfg.command},
      {"out_dir", cfg.out_dir},
      {"scene_dir", cfg.scene_dir},
      {"input_image", cfg.input_image},
      {"target_path", cfg.target_path},
      {"source_paths", sources},
      {"intrinsics_path", cfg.intrinsics_path},
      {"init_depth_path", cfg.init_depth_path},
      {"pred_depth_path", cfg.pred_depth_path},
      {"gt_depth_path", cfg.gt_depth_path},
      {"pred_pose_path", cfg.pred_pose_path},
      {"gt_pose_path", cfg.gt_pose_path},
      {"width", cfg.width},
      {"height", cfg.height},
      {"frames", cfg.frames},
      {"seed", cfg.seed},
      {"keypoint_count", cfg.keypoint_count},
      {"block_size", cfg.block_size},
      {"grad_threshold", cfg.grad_threshold},
      {"felz_k", cfg.felz_k},
      {"felz_sigma", cfg.felz_sigma},
      {"felz_min_size", cfg.felz_min_size},
      {"min_area", cfg.min_area},
      {"window", cfg.window},
      {"alpha", cfg.alpha},
      {"lambda1", cfg.lambda1},
      {"lambda2", cfg.lambda2},
      {"spp_epsilon", cfg.spp_epsilon},
      {"spp_raw_sum", cfg.spp_raw_sum},
      {"iters", cfg.iters},
      {"lr_depth", cfg.lr_depth},
      {"lr_pose", cfg.lr_pose},
      {"grid_scale", cfg.grid_scale},
      {"init_depth_value", cfg.init_depth_value},
      {"init_poses", cfg.init_poses},
      {"fix_poses", cfg.fix_poses},
      {"fix_depth", cfg.fix_depth},
      {"median_scale", cfg.median_scale},
      {"normal_window", cfg.normal_window},
      {"gradcheck_samples", cfg.gradcheck_samples},
  };
  return dump_pretty(j);
}

void run_config_apply_json(const std::string& text, RunConfig& cfg) {
  const json j = parse(text, "run config");
  if (!j.is_object()) {
    throw ValidationError("run config: top level must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    const auto str = [&](std::string& dst) { dst = value.get<std::string>(); };
    const auto num = [&](double& dst) { dst = value.get<double>(); };
    const auto integer = [&](int& dst) { dst = value.get<int>(); };
    const auto flag = [&](bool& dst) { dst = value.get<bool>(); };
    try {
      if (key == "command") str(cfg.command);
      else if (key == "out_dir") str(cfg.out_dir);
      else if (key == "scene_dir") str(cfg.scene_dir);
      else if (key == "input_image") str(cfg.input_image);
      else if (key == "target_path") str(cfg.target_path);
      else if (key == "source_paths") {
        cfg.source_paths = value.get<std::vector<std::string>>();
      }
      else if (key == "intrinsics_path") str(cfg.intrinsics_path);
      else if (key == "init_depth_path") str(cfg.init_depth_path);
      else if (key == "pred_depth_path") str(cfg.pred_depth_path);
      else if (key == "gt_depth_path") str(cfg.gt_depth_path);
      else if (key == "pred_pose_path") str(cfg.pred_pose_path);
      else if (key == "gt_pose_path") str(cfg.gt_pose_path);
      else if (key == "width") integer(cfg.width);
      else if (key == "height") integer(cfg.height);
      else if (key == "frames") integer(cfg.frames);
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "keypoint_count") integer(cfg.keypoint_count);
      else if (key == "block_size") integer(cfg.block_size);
      else if (key == "grad_threshold") num(cfg.grad_threshold);
      else if (key == "felz_k") num(cfg.felz_k);
      else if (key == "felz_sigma") num(cfg.felz_sigma);
      else if (key == "felz_min_size") integer(cfg.felz_min_size);
      else if (key == "min_area") integer(cfg.min_area);
      else if (key == "window") integer(cfg.window);
      else if (key == "alpha") num(cfg.alpha);
      else if (key == "lambda1") num(cfg.lambda1);
      else if (key == "lambda2") num(cfg.lambda2);
      else if (key == "spp_epsilon") num(cfg.spp_epsilon);
      else if (key == "spp_raw_sum") flag(cfg.spp_raw_sum);
      else if (key == "iters") integer(cfg.iters);
      else if (key == "lr_depth") num(cfg.lr_depth);
      else if (key == "lr_pose") num(cfg.lr_pose);
      else if (key == "grid_scale") integer(cfg.grid_scale);
      else if (key == "init_depth_value") num(cfg.init_depth_value);
      else if (key == "init_poses") str(cfg.init_poses);
      else if (key == "fix_poses") flag(cfg.fix_poses);
      else if (key == "fix_depth") flag(cfg.fix_depth);
      else if (key == "median_scale") flag(cfg.median_scale);
      else if (key == "normal_window") integer(cfg.normal_window);
      else if (key == "gradcheck_samples") integer(cfg.gradcheck_samples);
      else {
        throw ValidationError("run config: unknown option \"" + key + "\"");
      }
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception&) {
      throw ValidationError("run config: option \"" + key +
                            "\" has the wrong type");
    }
  }
}

}  // namespace patchdepth
