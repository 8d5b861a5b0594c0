#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "far3d/geom.hpp"

namespace far3d {

enum class ClassId {
  Car,
  Truck,
  Bus,
  Trailer,
  ConstructionVehicle,
  Pedestrian,
  Motorcycle,
  Bicycle,
  TrafficCone,
  Barrier,
};

inline constexpr std::array<ClassId, 10> kAllClasses{
    ClassId::Car,        ClassId::Truck,      ClassId::Bus,     ClassId::Trailer,     ClassId::ConstructionVehicle,
    ClassId::Pedestrian, ClassId::Motorcycle, ClassId::Bicycle, ClassId::TrafficCone, ClassId::Barrier};

std::string_view to_string(ClassId c);
std::optional<ClassId> parse_class(std::string_view name);

enum class Modality { Lidar, Camera, Fused };

std::string_view to_string(Modality m);
std::optional<Modality> parse_modality(std::string_view name);

struct Annotation {
  std::string token;
  std::string instance_id;
  Box3D box;  // global frame
  ClassId cls = ClassId::Car;
  int num_lidar_pts_current = 0;
  std::optional<int> num_lidar_pts_10sweep;
};

struct Detection {
  Box3D box;  // global frame
  ClassId cls = ClassId::Car;
  double score = 0.0;
  Modality modality = Modality::Lidar;
  // Source modality of a fused detection.
  std::optional<Modality> provenance;
};

struct LidarSweep {
  std::int64_t timestamp_us = 0;
  Pose ego_pose;
  std::vector<Vec3> points;  // global frame
};

struct Frame {
  std::string token;
  std::int64_t timestamp_us = 0;
  Pose ego_pose;  // global-from-ego, ego heading along its local +x
  std::vector<CameraModel> cameras;
  std::vector<Annotation> annotations;
  // Time-ordered; the last one is the keyframe sweep (timestamp == frame timestamp).
  std::vector<LidarSweep> sweeps;

  const LidarSweep* keyframe_sweep() const;
  const Annotation* find_instance(std::string_view instance_id) const;
};

struct Scene {
  std::string scene_id;
  std::vector<Frame> frames;
};

using DetectionMap = std::map<std::string, std::vector<Detection>>;

// Ego-frame pose convention: ego at origin, heading along +y, lateral along +x.
Pose ego_from_global(const Pose& ego_pose);
Vec3 to_ego_point(const Frame& frame, const Vec3& p_global);
Box3D to_ego_frame(const Frame& frame, const Box3D& box);
// Ground-plane distance from the ego origin; needs only the ego position.
double ego_distance(const Pose& ego_pose, const Box3D& box_global);
inline double ego_distance(const Frame& frame, const Box3D& box_global) {
  return ego_distance(frame.ego_pose, box_global);
}

// Center is linear in t, yaw follows the shorter arc, size comes from `next`.
// Throws std::invalid_argument when the instance ids differ or t is outside [0, 1].
Box3D interpolate_annotation(const Annotation& prev, const Annotation& next, double t);

enum class CountMode { CurrentSweep, TenSweepInterpolated };

std::string_view to_string(CountMode m);  // "current", "ten-sweep"
std::optional<CountMode> parse_count_mode(std::string_view name);

struct PreviousKeyframe {
  std::int64_t timestamp_us = 0;
  const Annotation* annotation = nullptr;
};

// Counts lidar points inside the annotation. In TenSweepInterpolated mode every
// stored sweep contributes, with the box interpolated from `prev` to the sweep
// timestamp; without `prev` the current box is used for all sweeps.
int count_points_in_annotation(const Frame& frame, const Annotation& ann, CountMode mode,
                               const std::optional<PreviousKeyframe>& prev = std::nullopt);

// Previous keyframe's annotation of the same instance, if any.
std::optional<PreviousKeyframe> previous_keyframe(const Scene& scene, std::size_t frame_index,
                                                  std::string_view instance_id);

// Fills num_lidar_pts_current and num_lidar_pts_10sweep for every annotation.
void fill_point_counts(Scene& scene);

// --- I/O -------------------------------------------------------------------

struct Rejection {
  std::string frame_token;
  std::size_t index = 0;
  std::string reason;
};

struct LoadReport {
  std::size_t records_in = 0;
  std::size_t records_loaded = 0;
  std::vector<Rejection> rejections;
};

enum class LoadPolicy { Strict, Lenient };

std::vector<Scene> parse_scenes(std::string_view text);
std::vector<Scene> load_scenes(const std::filesystem::path& path);
std::string dump_scenes(const std::vector<Scene>& scenes);
void save_scenes(const std::filesystem::path& path, const std::vector<Scene>& scenes);

// Strict throws ValidationError on the first bad record; Lenient records it in
// `report` and skips it.
DetectionMap parse_detections(std::string_view text, LoadPolicy policy = LoadPolicy::Strict,
                              LoadReport* report = nullptr);
DetectionMap load_detections(const std::filesystem::path& path, LoadPolicy policy = LoadPolicy::Strict,
                             LoadReport* report = nullptr);
std::string dump_detections(const DetectionMap& dets);
void save_detections(const std::filesystem::path& path, const DetectionMap& dets);

std::string read_text_file(const std::filesystem::path& path);
// Both throw IoError.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace far3d
