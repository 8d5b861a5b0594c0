#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "far3d/dataset.hpp"
#include "far3d/error.hpp"
#include "far3d/json_codec.hpp"

namespace far3d {

namespace codec {

namespace {

const json& field(const json& obj, const char* key) {
  if (!obj.is_object()) throw ValidationError("expected a JSON object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(std::string("missing field '") + key + "'");
  return *it;
}

double finite_number(const json& j, const char* what) {
  if (!j.is_number()) throw ValidationError(std::string("field '") + what + "' must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(std::string("field '") + what + "' must be finite");
  return v;
}

std::array<double, 3> triple(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(std::string("field '") + what + "' must be [a, b, c]");
  return {finite_number(j[0], what), finite_number(j[1], what), finite_number(j[2], what)};
}

Box3D box_from_json(const json& j) {
  const auto c = triple(field(j, "center"), "center");
  const auto s = triple(field(j, "size"), "size");
  Box3D box{{c[0], c[1], c[2]}, s[0], s[1], s[2], normalize_angle(finite_number(field(j, "yaw"), "yaw")),
            FrameTag::Global};
  if (!box.valid()) throw ValidationError("box size must be positive");
  return box;
}

void box_to_json(json& j, const Box3D& b) {
  j["center"] = {b.center.x, b.center.y, b.center.z};
  j["size"] = {b.length, b.width, b.height};
  j["yaw"] = b.yaw;
}

}  // namespace

json vec3_to_json(const Vec3& v) { return {v.x, v.y, v.z}; }

Vec3 vec3_from_json(const json& j) {
  const auto t = triple(j, "point");
  return {t[0], t[1], t[2]};
}

json pose_to_json(const Pose& p) {
  return {{"translation", vec3_to_json(p.translation)},
          {"rotation", {p.rotation.w, p.rotation.x, p.rotation.y, p.rotation.z}}};
}

Pose pose_from_json(const json& j) {
  const auto t = triple(field(j, "translation"), "translation");
  const json& r = field(j, "rotation");
  if (!r.is_array() || r.size() != 4) throw ValidationError("field 'rotation' must be [w, x, y, z]");
  const Quaternion q{finite_number(r[0], "rotation"), finite_number(r[1], "rotation"), finite_number(r[2], "rotation"),
                     finite_number(r[3], "rotation")};
  if (std::abs(q.norm() - 1.0) > 1e-9) throw ValidationError("rotation quaternion is not unit norm");
  return {{t[0], t[1], t[2]}, q};
}

json detection_to_json(const Detection& d) {
  json j;
  j["class"] = std::string(to_string(d.cls));
  j["score"] = d.score;
  box_to_json(j, d.box);
  j["modality"] = std::string(to_string(d.modality));
  if (d.provenance) j["provenance"] = std::string(to_string(*d.provenance));
  return j;
}

Detection detection_from_json(const json& j) {
  Detection d;
  const json& cls = field(j, "class");
  if (!cls.is_string()) throw ValidationError("field 'class' must be a string");
  const auto parsed = parse_class(cls.get<std::string>());
  if (!parsed) throw ValidationError("unknown class '" + cls.get<std::string>() + "'");
  d.cls = *parsed;
  d.score = finite_number(field(j, "score"), "score");
  if (d.score < 0.0 || d.score > 1.0) throw ValidationError("score outside [0, 1]");
  d.box = box_from_json(j);
  if (const auto it = j.find("modality"); it != j.end()) {
    const auto m = it->is_string() ? parse_modality(it->get<std::string>()) : std::nullopt;
    if (!m) throw ValidationError("unknown modality");
    d.modality = *m;
  }
  if (const auto it = j.find("provenance"); it != j.end() && !it->is_null()) {
    const auto m = it->is_string() ? parse_modality(it->get<std::string>()) : std::nullopt;
    if (!m) throw ValidationError("unknown provenance");
    d.provenance = *m;
  }
  return d;
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1;
    std::size_t line_start = 0;
    for (std::size_t i = 0; i < byte; ++i) {
      if (text[i] == '\n') {
        ++line;
        line_start = i + 1;
      }
    }
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    std::string excerpt(text.substr(line_start, std::min<std::size_t>(line_end - line_start, 120)));
    std::ostringstream msg;
    msg << what << ": JSON syntax error at line " << line << ", column " << (byte - line_start + 1) << ": "
        << e.what() << "\n  | " << excerpt;
    throw ParseError(msg.str());
  }
}

}  // namespace codec

using codec::json;

namespace {

std::string context(const std::string& token) { return token.empty() ? std::string("<unnamed>") : token; }

template <typename Fn>
auto with_context(const std::string& where, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  } catch (const json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

std::string string_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw ValidationError(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

std::int64_t int_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number_integer()) throw ValidationError(std::string("missing integer field '") + key + "'");
  return it->get<std::int64_t>();
}

double number_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number() || !std::isfinite(it->get<double>())) {
    throw ValidationError(std::string("missing numeric field '") + key + "'");
  }
  return it->get<double>();
}

CameraModel camera_from_json(const json& j) {
  CameraModel cam;
  cam.id = string_field(j, "id");
  return with_context("camera " + context(cam.id), [&] {
    cam.fx = number_field(j, "fx");
    cam.fy = number_field(j, "fy");
    cam.cx = number_field(j, "cx");
    cam.cy = number_field(j, "cy");
    cam.image_width = number_field(j, "width");
    cam.image_height = number_field(j, "height");
    cam.extrinsic = codec::pose_from_json(j.at("extrinsic"));
    if (!cam.valid()) throw ValidationError("focal lengths and image size must be positive");
    return cam;
  });
}

json camera_to_json(const CameraModel& c) {
  return {{"id", c.id},          {"fx", c.fx},        {"fy", c.fy},
          {"cx", c.cx},          {"cy", c.cy},        {"width", c.image_width},
          {"height", c.image_height}, {"extrinsic", codec::pose_to_json(c.extrinsic)}};
}

struct ParsedAnnotation {
  Annotation ann;
  bool has_current = false;
};

ParsedAnnotation annotation_from_json(const json& j) {
  ParsedAnnotation out;
  Annotation& a = out.ann;
  a.token = string_field(j, "token");
  return with_context("annotation " + context(a.token), [&] {
    a.instance_id = string_field(j, "instance_id");
    const std::string cls = string_field(j, "class");
    const auto parsed = parse_class(cls);
    if (!parsed) throw ValidationError("unknown class '" + cls + "'");
    a.cls = *parsed;
    a.box = codec::box_from_json(j);
    if (const auto it = j.find("num_lidar_pts"); it != j.end()) {
      if (!it->is_number_integer() || it->get<long long>() < 0) throw ValidationError("num_lidar_pts must be >= 0");
      a.num_lidar_pts_current = it->get<int>();
      out.has_current = true;
    }
    if (const auto it = j.find("num_lidar_pts_10sweep"); it != j.end() && !it->is_null()) {
      if (!it->is_number_integer() || it->get<long long>() < 0) {
        throw ValidationError("num_lidar_pts_10sweep must be >= 0");
      }
      a.num_lidar_pts_10sweep = it->get<int>();
    }
    return out;
  });
}

json annotation_to_json(const Annotation& a) {
  json j{{"token", a.token},
         {"instance_id", a.instance_id},
         {"class", std::string(to_string(a.cls))},
         {"center", codec::vec3_to_json(a.box.center)},
         {"size", {a.box.length, a.box.width, a.box.height}},
         {"yaw", a.box.yaw},
         {"num_lidar_pts", a.num_lidar_pts_current}};
  if (a.num_lidar_pts_10sweep) j["num_lidar_pts_10sweep"] = *a.num_lidar_pts_10sweep;
  return j;
}

LidarSweep sweep_from_json(const json& j) {
  LidarSweep s;
  s.timestamp_us = int_field(j, "timestamp_us");
  s.ego_pose = codec::pose_from_json(j.at("ego_pose"));
  const json& pts = j.at("points");
  if (!pts.is_array()) throw ValidationError("field 'points' must be an array");
  s.points.reserve(pts.size());
  for (const json& p : pts) s.points.push_back(codec::vec3_from_json(p));
  return s;
}

json sweep_to_json(const LidarSweep& s) {
  json pts = json::array();
  for (const Vec3& p : s.points) pts.push_back(codec::vec3_to_json(p));
  return {{"timestamp_us", s.timestamp_us}, {"ego_pose", codec::pose_to_json(s.ego_pose)}, {"points", std::move(pts)}};
}

Frame frame_from_json(const json& j, std::vector<bool>& has_current) {
  Frame f;
  f.token = string_field(j, "token");
  return with_context("frame " + context(f.token), [&] {
    f.timestamp_us = int_field(j, "timestamp_us");
    f.ego_pose = codec::pose_from_json(j.at("ego_pose"));
    std::set<std::string> camera_ids;
    for (const json& c : j.value("cameras", json::array())) {
      f.cameras.push_back(camera_from_json(c));
      if (!camera_ids.insert(f.cameras.back().id).second) {
        throw ValidationError("duplicate camera id '" + f.cameras.back().id + "'");
      }
    }
    std::set<std::string> tokens;
    for (const json& a : j.value("annotations", json::array())) {
      ParsedAnnotation parsed = annotation_from_json(a);
      if (!tokens.insert(parsed.ann.token).second) {
        throw ValidationError("duplicate annotation token '" + parsed.ann.token + "'");
      }
      has_current.push_back(parsed.has_current);
      f.annotations.push_back(std::move(parsed.ann));
    }
    for (const json& s : j.value("sweeps", json::array())) f.sweeps.push_back(sweep_from_json(s));
    for (std::size_t i = 1; i < f.sweeps.size(); ++i) {
      if (f.sweeps[i].timestamp_us <= f.sweeps[i - 1].timestamp_us) {
        throw ValidationError("sweep timestamps must be strictly increasing");
      }
    }
    if (!f.sweeps.empty()) {
      if (f.sweeps.size() > 10) throw ValidationError("at most 10 sweeps per frame");
      if (f.keyframe_sweep() == nullptr) {
        throw ValidationError("the last sweep must be the keyframe sweep (timestamp equal to the frame's)");
      }
    }
    return f;
  });
}

json frame_to_json(const Frame& f) {
  json cams = json::array();
  for (const auto& c : f.cameras) cams.push_back(camera_to_json(c));
  json anns = json::array();
  for (const auto& a : f.annotations) anns.push_back(annotation_to_json(a));
  json sweeps = json::array();
  for (const auto& s : f.sweeps) sweeps.push_back(sweep_to_json(s));
  return {{"token", f.token},
          {"timestamp_us", f.timestamp_us},
          {"ego_pose", codec::pose_to_json(f.ego_pose)},
          {"cameras", std::move(cams)},
          {"annotations", std::move(anns)},
          {"sweeps", std::move(sweeps)}};
}

}  // namespace

std::vector<Scene> parse_scenes(std::string_view text) {
  const json root = codec::parse_json(text, "scene file");
  if (!root.is_object() || !root.contains("scenes") || !root["scenes"].is_array()) {
    throw ValidationError("scene file: top level must be {\"scenes\": [...]}");
  }
  std::vector<Scene> scenes;
  std::set<std::string> frame_tokens;
  for (const json& js : root["scenes"]) {
    Scene scene;
    scene.scene_id = with_context("scene", [&] { return string_field(js, "scene_id"); });
    with_context("scene " + context(scene.scene_id), [&] {
      std::vector<std::vector<bool>> has_current;
      for (const json& jf : js.value("frames", json::array())) {
        has_current.emplace_back();
        scene.frames.push_back(frame_from_json(jf, has_current.back()));
        const Frame& f = scene.frames.back();
        if (!frame_tokens.insert(f.token).second) throw ValidationError("duplicate frame token '" + f.token + "'");
        if (scene.frames.size() > 1 && f.timestamp_us <= scene.frames[scene.frames.size() - 2].timestamp_us) {
          throw ValidationError("frame " + f.token + ": timestamps must be strictly increasing within a scene");
        }
      }
      // Counts absent from the file are computed from the stored sweeps.
      for (std::size_t fi = 0; fi < scene.frames.size(); ++fi) {
        Frame& f = scene.frames[fi];
        for (std::size_t ai = 0; ai < f.annotations.size(); ++ai) {
          Annotation& a = f.annotations[ai];
          if (!has_current[fi][ai]) a.num_lidar_pts_current = count_points_in_annotation(f, a, CountMode::CurrentSweep);
          if (!a.num_lidar_pts_10sweep) {
            a.num_lidar_pts_10sweep = count_points_in_annotation(f, a, CountMode::TenSweepInterpolated,
                                                                 previous_keyframe(scene, fi, a.instance_id));
          }
        }
      }
      return 0;
    });
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

std::vector<Scene> load_scenes(const std::filesystem::path& path) { return parse_scenes(read_text_file(path)); }

std::string dump_scenes(const std::vector<Scene>& scenes) {
  json arr = json::array();
  for (const Scene& s : scenes) {
    json frames = json::array();
    for (const Frame& f : s.frames) frames.push_back(frame_to_json(f));
    arr.push_back({{"scene_id", s.scene_id}, {"frames", std::move(frames)}});
  }
  return json{{"scenes", std::move(arr)}}.dump() + "\n";
}

void save_scenes(const std::filesystem::path& path, const std::vector<Scene>& scenes) {
  write_text_file(path, dump_scenes(scenes));
}

DetectionMap parse_detections(std::string_view text, LoadPolicy policy, LoadReport* report) {
  const json root = codec::parse_json(text, "detection file");
  if (!root.is_object()) throw ValidationError("detection file: top level must be an object keyed by frame token");
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  rep = {};
  DetectionMap out;
  for (const auto& [token, list] : root.items()) {
    if (!list.is_array()) throw ValidationError("frame " + token + ": detections must be an array");
    auto& dst = out[token];
    for (std::size_t i = 0; i < list.size(); ++i) {
      ++rep.records_in;
      try {
        dst.push_back(codec::detection_from_json(list[i]));
        ++rep.records_loaded;
      } catch (const std::exception& e) {
        if (policy == LoadPolicy::Strict) {
          throw ValidationError("frame " + token + ", detection " + std::to_string(i) + ": " + e.what());
        }
        rep.rejections.push_back({token, i, e.what()});
      }
    }
  }
  return out;
}

DetectionMap load_detections(const std::filesystem::path& path, LoadPolicy policy, LoadReport* report) {
  return parse_detections(read_text_file(path), policy, report);
}

std::string dump_detections(const DetectionMap& dets) {
  json root = json::object();
  for (const auto& [token, list] : dets) {
    json arr = json::array();
    for (const Detection& d : list) arr.push_back(codec::detection_to_json(d));
    root[token] = std::move(arr);
  }
  return root.dump() + "\n";
}

void save_detections(const std::filesystem::path& path, const DetectionMap& dets) {
  write_text_file(path, dump_detections(dets));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace far3d
