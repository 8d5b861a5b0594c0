#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "far3d/dataset.hpp"

namespace far3d {

namespace {

constexpr std::array<std::string_view, 10> kClassNames{
    "car",        "truck",      "bus",     "trailer",      "construction_vehicle",
    "pedestrian", "motorcycle", "bicycle", "traffic_cone", "barrier"};

constexpr std::array<std::string_view, 3> kModalityNames{"lidar", "camera", "fused"};

int count_inside(const std::vector<Vec3>& points, const Box3D& box) {
  return static_cast<int>(std::count_if(points.begin(), points.end(), [&](const Vec3& p) { return point_in_box(p, box); }));
}

}  // namespace

std::string_view to_string(ClassId c) { return kClassNames[static_cast<std::size_t>(c)]; }

std::optional<ClassId> parse_class(std::string_view name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (kClassNames[i] == name) return static_cast<ClassId>(i);
  }
  return std::nullopt;
}

std::string_view to_string(Modality m) { return kModalityNames[static_cast<std::size_t>(m)]; }

std::optional<Modality> parse_modality(std::string_view name) {
  for (std::size_t i = 0; i < kModalityNames.size(); ++i) {
    if (kModalityNames[i] == name) return static_cast<Modality>(i);
  }
  return std::nullopt;
}

const LidarSweep* Frame::keyframe_sweep() const {
  if (sweeps.empty() || sweeps.back().timestamp_us != timestamp_us) return nullptr;
  return &sweeps.back();
}

const Annotation* Frame::find_instance(std::string_view instance_id) const {
  for (const Annotation& a : annotations) {
    if (a.instance_id == instance_id) return &a;
  }
  return nullptr;
}

Pose ego_from_global(const Pose& ego_pose) {
  // Quarter turn maps the vehicle's forward axis (+x) onto +y.
  return Pose::from_yaw({}, std::numbers::pi / 2.0) * ego_pose.inverse();
}

Vec3 to_ego_point(const Frame& frame, const Vec3& p_global) { return ego_from_global(frame.ego_pose).apply(p_global); }

Box3D to_ego_frame(const Frame& frame, const Box3D& box) {
  Box3D out = transform_box(ego_from_global(frame.ego_pose), box);
  out.frame = FrameTag::Ego;
  return out;
}

double ego_distance(const Pose& ego_pose, const Box3D& box_global) {
  return std::hypot(box_global.center.x - ego_pose.translation.x, box_global.center.y - ego_pose.translation.y);
}

Box3D interpolate_annotation(const Annotation& prev, const Annotation& next, double t) {
  if (prev.instance_id != next.instance_id) {
    throw std::invalid_argument("cannot interpolate between instances '" + prev.instance_id + "' and '" +
                                next.instance_id + "'");
  }
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("interpolation parameter outside [0, 1]");
  if (t == 0.0) return prev.box;
  if (t == 1.0) return next.box;
  Box3D out = next.box;
  out.center = (1.0 - t) * prev.box.center + t * next.box.center;
  out.yaw = normalize_angle(prev.box.yaw + t * normalize_angle(next.box.yaw - prev.box.yaw));
  return out;
}

int count_points_in_annotation(const Frame& frame, const Annotation& ann, CountMode mode,
                               const std::optional<PreviousKeyframe>& prev) {
  if (mode == CountMode::CurrentSweep) {
    const LidarSweep* key = frame.keyframe_sweep();
    return key ? count_inside(key->points, ann.box) : 0;
  }
  int total = 0;
  for (const LidarSweep& sweep : frame.sweeps) {
    Box3D box = ann.box;
    if (prev && prev->annotation && frame.timestamp_us > prev->timestamp_us) {
      const double span = static_cast<double>(frame.timestamp_us - prev->timestamp_us);
      const double t = std::clamp(static_cast<double>(sweep.timestamp_us - prev->timestamp_us) / span, 0.0, 1.0);
      box = interpolate_annotation(*prev->annotation, ann, t);
    }
    total += count_inside(sweep.points, box);
  }
  return total;
}

std::optional<PreviousKeyframe> previous_keyframe(const Scene& scene, std::size_t frame_index,
                                                  std::string_view instance_id) {
  if (frame_index == 0 || frame_index >= scene.frames.size()) return std::nullopt;
  const Frame& before = scene.frames[frame_index - 1];
  const Annotation* a = before.find_instance(instance_id);
  if (!a) return std::nullopt;
  return PreviousKeyframe{before.timestamp_us, a};
}

void fill_point_counts(Scene& scene) {
  for (std::size_t i = 0; i < scene.frames.size(); ++i) {
    Frame& frame = scene.frames[i];
    for (Annotation& ann : frame.annotations) {
      ann.num_lidar_pts_current = count_points_in_annotation(frame, ann, CountMode::CurrentSweep);
      ann.num_lidar_pts_10sweep = count_points_in_annotation(frame, ann, CountMode::TenSweepInterpolated,
                                                             previous_keyframe(scene, i, ann.instance_id));
    }
  }
}

std::string_view to_string(CountMode m) { return m == CountMode::CurrentSweep ? "current" : "ten-sweep"; }

std::optional<CountMode> parse_count_mode(std::string_view name) {
  if (name == "current") return CountMode::CurrentSweep;
  if (name == "ten-sweep") return CountMode::TenSweepInterpolated;
  return std::nullopt;
}

}  // namespace far3d
