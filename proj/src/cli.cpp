#include "far3d/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "far3d/error.hpp"
#include "far3d/json_codec.hpp"
#include "far3d/report.hpp"
#include "far3d/visibility.hpp"

namespace far3d::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(std::string_view text, std::string_view what) {
  try {
    std::size_t used = 0;
    const std::string s(text);
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string(what) + ": '" + std::string(text) + "' is not a number");
}

ClassId class_named(std::string_view name) {
  if (const auto c = parse_class(name)) return *c;
  std::string valid;
  for (ClassId c : kAllClasses) valid += (valid.empty() ? "" : "|") + std::string(to_string(c));
  throw ConfigError("unknown class '" + std::string(name) + "' (valid: " + valid + ")");
}

std::map<ClassId, double> class_map(const json& j) {
  std::map<ClassId, double> out;
  for (const auto& [k, v] : j.items()) out[class_named(k)] = v.get<double>();
  return out;
}

OcclusionConfig occlusion_from(const json& j) {
  OcclusionConfig o;
  o.rect_iou_threshold = j.at("rect_iou_threshold").get<double>();
  o.box_depth_margin = j.at("box_depth_margin").get<double>();
  o.point_depth_margin = j.at("point_depth_margin").get<double>();
  o.min_points_in_front = j.at("min_points_in_front").get<int>();
  o.points_from_all_sweeps = j.at("points_from_all_sweeps").get<bool>();
  o.validate();
  return o;
}

DistanceBand band_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("a band must be [min, max]");
  const DistanceBand b{j[0].get<double>(), j[1].get<double>()};
  if (!(b.min_m >= 0.0 && b.min_m < b.max_m)) throw ConfigError("band " + b.label() + " is empty or negative");
  return b;
}

// Keys whose default is an empty object are free-form maps.
void check_keys(const json& cfg, const json& defaults, const std::string& where) {
  if (!cfg.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : cfg.items()) {
    const std::string path = where + "/" + k;
    if (!defaults.contains(k)) throw ConfigError("unknown config key " + path);
    const json& d = defaults.at(k);
    if (d.is_object() && !d.empty()) {
      check_keys(v, d, path);
    } else if (d.is_number() && !v.is_number()) {
      throw ConfigError(path + " must be a number");
    } else if (d.is_string() && !v.is_string()) {
      throw ConfigError(path + " must be a string");
    } else if (d.is_boolean() && !v.is_boolean()) {
      throw ConfigError(path + " must be true or false");
    }
  }
}

std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

std::string require_path(const json& cfg, const char* key, const char* flag) {
  const std::string p = cfg.at(key).get<std::string>();
  if (p.empty()) throw ConfigError(std::string("missing input: pass ") + flag);
  return p;
}

struct Run {
  std::string command;
  json cfg;
  fs::path out_dir;
  bool to_stdout = false;
  std::ostream& out;
  std::ostream& err;

  void write(const std::string& name, const std::string& text) const {
    write_text_file(out_dir / name, text);
    err << "wrote " << (out_dir / name).string() << "\n";
  }
  void emit(const std::string& text) const {
    if (to_stdout) out << text;
  }
};

void cmd_synth(const Run& r) {
  const SynthConfig sc = synth_config_from(r.cfg);
  const SynthOutput data = synth_generate(sc);
  r.write("scenes.json", dump_scenes(data.scenes));
  r.write("dets_lidar.json", dump_detections(data.lidar));
  r.write("dets_camera.json", dump_detections(data.camera));
  std::size_t frames = 0;
  std::size_t annotations = 0;
  for (const Scene& s : data.scenes) {
    frames += s.frames.size();
    for (const Frame& f : s.frames) annotations += f.annotations.size();
  }
  r.emit(json{{"scenes", data.scenes.size()}, {"frames", frames}, {"annotations", annotations}}.dump() + "\n");
}

void cmd_evaluate(const Run& r) {
  const EvalConfig ec = eval_config_from(r.cfg);
  const auto scenes = load_scenes(require_path(r.cfg, "scenes", "--scenes"));
  const json& dets = r.cfg.at("evaluate").at("dets");
  if (dets.empty()) throw ConfigError("missing input: pass at least one --dets [label=]path");
  const EvalGroundTruth gt = build_eval_gt(scenes, ec.gt_mode, ec.occlusion);
  std::vector<MethodReport> methods;
  for (const json& d : dets) {
    const auto path = d.at("path").get<std::string>();
    methods.push_back({d.at("label").get<std::string>(), evaluate(load_detections(path), scenes, gt, ec)});
  }
  const std::string md = report_markdown(methods);
  r.write("report.json", report_to_json(methods).dump(2) + "\n");
  r.write("report.md", md);
  r.emit(md);
}

void cmd_fuse(const Run& r) {
  const FusionOptions opts = fusion_options_from(r.cfg);
  const auto scenes = load_scenes(require_path(r.cfg, "scenes", "--scenes"));
  const json& f = r.cfg.at("fuse");
  const std::string lidar = f.at("lidar").get<std::string>();
  const std::string camera = f.at("camera").get<std::string>();
  if (lidar.empty() || camera.empty()) throw ConfigError("missing input: pass --lidar and --camera");
  const std::string text = dump_detections(fuse(load_detections(lidar), load_detections(camera), scenes, opts));
  r.write("fused.json", text);
  r.emit(text);
}

void cmd_visibility(const Run& r) {
  const auto scenes = load_scenes(require_path(r.cfg, "scenes", "--scenes"));
  const json& v = r.cfg.at("visibility");
  const auto mode = parse_count_mode(v.at("mode").get<std::string>());
  if (!mode) throw ConfigError("unknown --mode '" + v.at("mode").get<std::string>() + "' (valid: current|ten-sweep)");
  const DistanceBand band = band_from(v.at("band"));
  const OcclusionConfig occ = occlusion_from(r.cfg.at("occlusion"));
  const std::string stats = zero_lidar_stats_to_json(zero_lidar_stats(scenes, *mode, band, occ), *mode, band).dump(2) + "\n";
  r.write("zero_lidar_stats.json", stats);
  r.write("verdicts.json", verdicts_to_json(scenes, occ).dump(2) + "\n");
  r.emit(stats);
}

void cmd_audit(const Run& r) {
  const auto scenes = load_scenes(require_path(r.cfg, "scenes", "--scenes"));
  const json& a = r.cfg.at("audit");
  const int sample = a.at("sample").get<int>();
  if (sample < 0) throw ConfigError("--sample must be >= 0");
  const auto seed = r.cfg.at("seed").get<std::uint64_t>();
  try {
    const std::string csv = density_csv(annotation_density(scenes, a.at("bin_width").get<double>(), a.at("max_range").get<double>()));
    json samples = json::array();
    for (const Scene& s : scenes) {
      const auto entries = audit_sample(s, static_cast<std::size_t>(sample), seed);
      samples.push_back(audit_to_json(s, entries));
    }
    r.write("density.csv", csv);
    r.write("audit_sample.json", samples.dump(2) + "\n");
    r.emit(csv);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

json default_config() {
  const SynthConfig s;
  const EvalConfig e;
  const FusionOptions f;
  json occlusion = {{"rect_iou_threshold", e.occlusion.rect_iou_threshold},
                    {"box_depth_margin", e.occlusion.box_depth_margin},
                    {"point_depth_margin", e.occlusion.point_depth_margin},
                    {"min_points_in_front", e.occlusion.min_points_in_front},
                    {"points_from_all_sweeps", e.occlusion.points_from_all_sweeps}};
  json bands = json::array();
  for (const DistanceBand& b : e.bands) bands.push_back({b.min_m, b.max_m});
  json classes = json::array();
  for (ClassId c : e.classes) classes.push_back(to_string(c));
  return {
      {"seed", s.seed},
      {"scenes", ""},
      {"occlusion", occlusion},
      {"synth",
       {{"num_scenes", s.num_scenes},
        {"frames_per_scene", s.frames_per_scene},
        {"sweeps_per_frame", s.sweeps_per_frame},
        {"objects_per_scene", s.objects_per_scene},
        {"class_weights", json::object()},
        {"min_distance", s.min_distance},
        {"max_distance", s.max_distance},
        {"ego_speed", s.ego_speed},
        {"beam_constant", s.beam_constant},
        {"max_points_per_object", s.max_points_per_object},
        {"lidar_max_recall", s.lidar_max_recall},
        {"lidar_points_midpoint", s.lidar_points_midpoint},
        {"lidar_points_scale", s.lidar_points_scale},
        {"sigma_lidar", s.sigma_lidar},
        {"camera_recall", s.camera_recall},
        {"kappa", s.kappa},
        {"sigma_lateral", s.sigma_lateral},
        {"fp_rate_lidar", s.fp_rate_lidar},
        {"fp_rate_camera", s.fp_rate_camera},
        {"fp_score_factor", s.fp_score_factor},
        {"score_jitter", s.score_jitter}}},
      {"evaluate",
       {{"dets", json::array()},
        {"scheme", e.scheme.name()},
        {"bands", bands},
        {"classes", classes},
        {"max_range", e.max_range},
        {"legacy_ranges", false},
        {"ap_mode", to_string(e.ap_mode)},
        {"gt_mode", to_string(e.gt_mode)},
        {"threads", e.threads}}},
      {"fuse",
       {{"lidar", ""},
        {"camera", ""},
        {"method", to_string(f.method)},
        {"iou", f.nms_iou},
        {"iou_kind", "bev"},
        {"d1", f.ada.d1},
        {"c1", f.ada.c1},
        {"d2", f.ada.d2},
        {"c2", f.ada.c2},
        {"tc", f.distance.default_t_c},
        {"tc_per_class", json::object()},
        {"far_source", "adanms"},
        {"bayes_pair_iou", f.bayes_pair_iou},
        {"scorer_weights", f.scorer.w},
        {"scorer_bias", f.scorer.b},
        {"calibration", json::object()}}},
      {"visibility", {{"mode", "current"}, {"band", {50.0, 80.0}}}},
      {"audit", {{"sample", 20}, {"bin_width", 5.0}, {"max_range", 80.0}}},
  };
}

void check_config_keys(const json& cfg) { check_keys(cfg, default_config(), ""); }

SynthConfig synth_config_from(const json& cfg) {
  const json& j = cfg.at("synth");
  SynthConfig s;
  s.num_scenes = j.at("num_scenes").get<int>();
  s.frames_per_scene = j.at("frames_per_scene").get<int>();
  s.sweeps_per_frame = j.at("sweeps_per_frame").get<int>();
  s.objects_per_scene = j.at("objects_per_scene").get<double>();
  s.class_weights = class_map(j.at("class_weights"));
  s.min_distance = j.at("min_distance").get<double>();
  s.max_distance = j.at("max_distance").get<double>();
  s.ego_speed = j.at("ego_speed").get<double>();
  s.beam_constant = j.at("beam_constant").get<double>();
  s.max_points_per_object = j.at("max_points_per_object").get<int>();
  s.lidar_max_recall = j.at("lidar_max_recall").get<double>();
  s.lidar_points_midpoint = j.at("lidar_points_midpoint").get<double>();
  s.lidar_points_scale = j.at("lidar_points_scale").get<double>();
  s.sigma_lidar = j.at("sigma_lidar").get<double>();
  s.camera_recall = j.at("camera_recall").get<double>();
  s.kappa = j.at("kappa").get<double>();
  s.sigma_lateral = j.at("sigma_lateral").get<double>();
  s.fp_rate_lidar = j.at("fp_rate_lidar").get<double>();
  s.fp_rate_camera = j.at("fp_rate_camera").get<double>();
  s.fp_score_factor = j.at("fp_score_factor").get<double>();
  s.score_jitter = j.at("score_jitter").get<double>();
  s.seed = cfg.at("seed").get<std::uint64_t>();
  s.validate();
  return s;
}

EvalConfig eval_config_from(const json& cfg) {
  const json& j = cfg.at("evaluate");
  EvalConfig e;
  const auto scheme_name = j.at("scheme").get<std::string>();
  const auto scheme = ThresholdScheme::parse(scheme_name);
  if (!scheme) throw ConfigError("unknown scheme '" + scheme_name + "' (valid: " + std::string(kSchemeNames) + ")");
  e.scheme = *scheme;
  e.bands.clear();
  for (const json& b : j.at("bands")) e.bands.push_back(band_from(b));
  e.classes.clear();
  for (const json& c : j.at("classes")) e.classes.push_back(class_named(c.get<std::string>()));
  e.max_range = j.at("max_range").get<double>();
  if (j.at("legacy_ranges").get<bool>()) e.per_class_legacy_ranges = legacy_class_ranges();
  const auto ap = parse_ap_mode(j.at("ap_mode").get<std::string>());
  if (!ap) throw ConfigError("unknown ap mode '" + j.at("ap_mode").get<std::string>() + "' (valid: full-area|nuscenes)");
  e.ap_mode = *ap;
  const auto gm = parse_gt_mode(j.at("gt_mode").get<std::string>());
  if (!gm) {
    throw ConfigError("unknown gt mode '" + j.at("gt_mode").get<std::string>() +
                      "' (valid: drop-zero-lidar|include-unoccluded|include-all)");
  }
  e.gt_mode = *gm;
  e.threads = j.at("threads").get<int>();
  e.occlusion = occlusion_from(cfg.at("occlusion"));
  e.validate();
  return e;
}

FusionOptions fusion_options_from(const json& cfg) {
  const json& j = cfg.at("fuse");
  FusionOptions f;
  const auto method_name = j.at("method").get<std::string>();
  const auto method = parse_fusion_method(method_name);
  if (!method) throw ConfigError("unknown fusion method '" + method_name + "' (valid: nms|adanms|distance|bayes|clocs)");
  f.method = *method;
  f.nms_iou = j.at("iou").get<double>();
  if (!(f.nms_iou >= 0.0 && f.nms_iou <= 1.0)) throw ConfigError("--iou must be in [0, 1]");
  const auto kind = j.at("iou_kind").get<std::string>();
  if (kind != "bev" && kind != "3d") throw ConfigError("unknown iou kind '" + kind + "' (valid: bev|3d)");
  f.iou_kind = kind == "bev" ? IouKind::Bev : IouKind::ThreeD;
  f.ada = {j.at("d1").get<double>(), j.at("d2").get<double>(), j.at("c1").get<double>(), j.at("c2").get<double>()};
  f.ada.validate();
  f.distance.default_t_c = j.at("tc").get<double>();
  f.distance.t_c = class_map(j.at("tc_per_class"));
  const auto far = j.at("far_source").get<std::string>();
  if (far == "nms") {
    f.distance.far_source = FarSource::NmsFused;
  } else if (far == "adanms") {
    f.distance.far_source = FarSource::AdaNmsFused;
  } else if (far == "camera") {
    f.distance.far_source = FarSource::CameraOnly;
  } else {
    throw ConfigError("unknown far source '" + far + "' (valid: nms|adanms|camera)");
  }
  f.bayes_pair_iou = j.at("bayes_pair_iou").get<double>();
  const json& w = j.at("scorer_weights");
  if (!w.is_array() || w.size() != f.scorer.w.size()) throw ConfigError("scorer_weights needs exactly 5 numbers");
  for (std::size_t i = 0; i < w.size(); ++i) f.scorer.w[i] = w[i].get<double>();
  f.scorer.b = j.at("scorer_bias").get<double>();
  for (const auto& [k, v] : j.at("calibration").items()) {
    if (!v.is_array() || v.size() != 2) throw ConfigError("calibration for " + k + " must be [scale, offset]");
    f.calibration.camera_affine[class_named(k)] = {v[0].get<double>(), v[1].get<double>()};
  }
  return f;
}

json parse_bands(std::string_view text) {
  json out = json::array();
  for (const std::string& part : split(text, ',')) {
    const auto dash = part.find('-', 1);
    if (dash == std::string::npos) throw ConfigError("band '" + part + "' must look like MIN-MAX");
    out.push_back({parse_number(std::string_view(part).substr(0, dash), "band"),
                   parse_number(std::string_view(part).substr(dash + 1), "band")});
  }
  return out;
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Far-field 3D detection evaluation and late fusion toolkit", "far3d"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "far3d_out";
  std::uint64_t seed = 0;
  bool to_stdout = false;
  app.add_option("--config", config_path, "JSON config merged over the defaults");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "Random seed (synth, audit)");
  app.add_flag("--stdout", to_stdout, "Also print the primary output on stdout");

  // Flag overrides: applied only when the flag was given.
  std::vector<std::function<void(json&)>> overrides;
  const auto bind = [&](CLI::App* sub, const std::string& flag, const std::string& pointer, const std::string& help,
                        std::function<json(const std::string&)> convert) {
    auto value = std::make_shared<std::string>();
    auto* opt = sub->add_option(flag, *value, help);
    overrides.push_back([opt, value, pointer, convert, sub](json& cfg) {
      if (sub->parsed() && opt->count() > 0) cfg[json::json_pointer(pointer)] = convert(*value);
    });
  };
  const auto as_string = [](const std::string& v) { return json(v); };
  const auto as_path = [](const std::string& v) { return json(absolute(v)); };
  const auto as_number = [](const std::string& v) { return json(parse_number(v, "flag value")); };
  const auto as_int = [](const std::string& v) {
    const double d = parse_number(v, "flag value");
    if (d != std::floor(d)) throw ConfigError("'" + v + "' is not an integer");
    return json(static_cast<std::int64_t>(d));
  };

  auto* synth = app.add_subcommand("synth", "Generate synthetic scenes with simulated lidar and camera detections");
  bind(synth, "--num-scenes", "/synth/num_scenes", "Number of scenes", as_int);
  bind(synth, "--frames-per-scene", "/synth/frames_per_scene", "Keyframes per scene", as_int);
  bind(synth, "--objects-per-scene", "/synth/objects_per_scene", "Mean objects per scene", as_number);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score detection files against scene ground truth");
  bind(evaluate_cmd, "--scenes", "/scenes", "Scene file", as_path);
  std::vector<std::string> dets_args;
  auto* dets_opt = evaluate_cmd->add_option("--dets", dets_args, "Detection file as [label=]path (repeatable)");
  bind(evaluate_cmd, "--scheme", "/evaluate/scheme", "Matching scheme: " + std::string(kSchemeNames), as_string);
  bind(evaluate_cmd, "--bands", "/evaluate/bands", "Distance bands, e.g. 0-50,50-80",
       [](const std::string& v) { return parse_bands(v); });
  bind(evaluate_cmd, "--gt-mode", "/evaluate/gt_mode", "drop-zero-lidar|include-unoccluded|include-all", as_string);
  bind(evaluate_cmd, "--ap-mode", "/evaluate/ap_mode", "full-area|nuscenes", as_string);
  bind(evaluate_cmd, "--classes", "/evaluate/classes", "Comma-separated class names", [](const std::string& v) {
    json arr = json::array();
    for (const std::string& c : split(v, ',')) arr.push_back(c);
    return arr;
  });
  bind(evaluate_cmd, "--max-range", "/evaluate/max_range", "Evaluation range in meters", as_number);
  bind(evaluate_cmd, "--threads", "/evaluate/threads", "Worker threads (0: all cores)", as_int);
  bool legacy = false;
  auto* legacy_opt = evaluate_cmd->add_flag("--legacy-ranges", legacy, "Apply per-class benchmark ranges");

  auto* fuse_cmd = app.add_subcommand("fuse", "Late-fuse lidar and camera detections");
  bind(fuse_cmd, "--scenes", "/scenes", "Scene file (ego poses)", as_path);
  bind(fuse_cmd, "--lidar", "/fuse/lidar", "Lidar detection file", as_path);
  bind(fuse_cmd, "--camera", "/fuse/camera", "Camera detection file", as_path);
  bind(fuse_cmd, "--method", "/fuse/method", "nms|adanms|distance|bayes|clocs", as_string);
  bind(fuse_cmd, "--iou", "/fuse/iou", "Plain NMS IoU threshold", as_number);
  bind(fuse_cmd, "--iou-kind", "/fuse/iou_kind", "bev|3d", as_string);
  bind(fuse_cmd, "--d1", "/fuse/d1", "AdaNMS near distance", as_number);
  bind(fuse_cmd, "--c1", "/fuse/c1", "AdaNMS near threshold", as_number);
  bind(fuse_cmd, "--d2", "/fuse/d2", "AdaNMS far distance", as_number);
  bind(fuse_cmd, "--c2", "/fuse/c2", "AdaNMS far threshold", as_number);
  std::string tc_arg;
  auto* tc_opt = fuse_cmd->add_option("--tc", tc_arg, "Distance gate: meters, or class=meters list");
  bind(fuse_cmd, "--far-source", "/fuse/far_source", "Far side of distance fusion: nms|adanms|camera", as_string);
  bind(fuse_cmd, "--scorer-weights", "/fuse/scorer_weights", "Five comma-separated logistic weights",
       [](const std::string& v) {
         json arr = json::array();
         for (const std::string& w : split(v, ',')) arr.push_back(parse_number(w, "--scorer-weights"));
         return arr;
       });
  bind(fuse_cmd, "--scorer-bias", "/fuse/scorer_bias", "Logistic bias", as_number);

  auto* vis_cmd = app.add_subcommand("visibility", "Zero-lidar statistics and occlusion verdicts");
  bind(vis_cmd, "--scenes", "/scenes", "Scene file", as_path);
  bind(vis_cmd, "--mode", "/visibility/mode", "current|ten-sweep", as_string);
  bind(vis_cmd, "--band", "/visibility/band", "Distance band, e.g. 50-80",
       [](const std::string& v) { return parse_bands(v).at(0); });

  auto* audit_cmd = app.add_subcommand("audit", "Annotation density and frame sample for manual audit");
  bind(audit_cmd, "--scenes", "/scenes", "Scene file", as_path);
  bind(audit_cmd, "--sample", "/audit/sample", "Frames sampled per scene", as_int);
  bind(audit_cmd, "--bin-width", "/audit/bin_width", "Density bin width in meters", as_number);

  for (CLI::App* sub : {synth, evaluate_cmd, fuse_cmd, vis_cmd, audit_cmd}) sub->fallthrough();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  try {
    json cfg = default_config();
    if (!config_path.empty()) {
      json file = codec::parse_json(read_text_file(config_path), "config file");
      if (file.is_object()) file.erase("command");
      check_config_keys(file);
      cfg.merge_patch(file);
    }
    if (seed_opt->count() > 0) cfg["seed"] = seed;
    for (const auto& apply : overrides) apply(cfg);
    if (dets_opt->count() > 0) {
      json list = json::array();
      for (const std::string& d : dets_args) {
        const auto eq = d.find('=');
        const std::string path = eq == std::string::npos ? d : d.substr(eq + 1);
        const std::string label = eq == std::string::npos ? fs::path(d).stem().string() : d.substr(0, eq);
        if (label.empty() || path.empty()) throw ConfigError("--dets expects [label=]path, got '" + d + "'");
        list.push_back({{"label", label}, {"path", absolute(path)}});
      }
      cfg["evaluate"]["dets"] = list;
    }
    if (legacy_opt->count() > 0) cfg["evaluate"]["legacy_ranges"] = legacy;
    if (tc_opt->count() > 0) {
      if (tc_arg.find('=') == std::string::npos) {
        cfg["fuse"]["tc"] = parse_number(tc_arg, "--tc");
      } else {
        json per_class = json::object();
        for (const std::string& item : split(tc_arg, ',')) {
          const auto eq = item.find('=');
          if (eq == std::string::npos) throw ConfigError("--tc list expects class=meters, got '" + item + "'");
          const std::string name = item.substr(0, eq);
          const double v = parse_number(item.substr(eq + 1), "--tc");
          if (name == "default") {
            cfg["fuse"]["tc"] = v;
          } else {
            per_class[std::string(to_string(class_named(name)))] = v;
          }
        }
        cfg["fuse"]["tc_per_class"] = per_class;
      }
    }
    check_config_keys(cfg);

    Run r{app.get_subcommands().front()->get_name(), cfg, out_dir, to_stdout, out, err};
    const std::map<std::string, std::function<void(const Run&)>> commands{{"synth", cmd_synth},
                                                                          {"evaluate", cmd_evaluate},
                                                                          {"fuse", cmd_fuse},
                                                                          {"visibility", cmd_visibility},
                                                                          {"audit", cmd_audit}};
    // Validate everything the command reads before touching the output directory.
    if (r.command == "synth") synth_config_from(cfg);
    if (r.command == "evaluate") eval_config_from(cfg);
    if (r.command == "fuse") fusion_options_from(cfg);
    ensure_dir(r.out_dir);
    json echo = cfg;
    echo["command"] = r.command;
    r.write("resolved_config.json", echo.dump(2) + "\n");
    commands.at(r.command)(r);
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const far3d::ParseError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
  } catch (const nlohmann::json::exception& e) {
    err << "error: bad config value: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace far3d::cli
