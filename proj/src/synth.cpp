#include "far3d/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace far3d {

namespace {

constexpr std::int64_t kKeyframeIntervalUs = 500'000;
constexpr std::int64_t kSweepIntervalUs = 50'000;
constexpr std::int64_t kStartUs = 1'000'000'000;

using Rng = std::mt19937_64;

struct SimObject {
  ClassId cls;
  Box3D box0;  // global pose at the scene start
  Vec3 velocity;
  std::string instance_id;

  Box3D at(double seconds) const {
    Box3D b = box0;
    b.center = box0.center + seconds * velocity;
    return b;
  }
};

struct Ego {
  Vec3 origin;
  double heading = 0.0;
  double speed = 0.0;

  Pose at(double seconds) const {
    const Vec3 dir{std::cos(heading), std::sin(heading), 0.0};
    return Pose::from_yaw(origin + (seconds * speed) * dir, heading);
  }
};

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
double normal(Rng& rng, double sigma) { return sigma > 0.0 ? std::normal_distribution<double>(0.0, sigma)(rng) : 0.0; }
bool bernoulli(Rng& rng, double p) { return std::bernoulli_distribution(std::clamp(p, 0.0, 1.0))(rng); }

double max_speed(ClassId c) {
  switch (c) {
    case ClassId::Pedestrian: return 1.5;
    case ClassId::Bicycle: return 4.0;
    case ClassId::TrafficCone:
    case ClassId::Barrier: return 0.0;
    default: return 8.0;
  }
}

ClassId draw_class(Rng& rng, const std::vector<std::pair<ClassId, double>>& weights) {
  std::vector<double> w;
  w.reserve(weights.size());
  for (const auto& [c, v] : weights) w.push_back(v);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  return weights[pick(rng)].first;
}

// Area-uniform position in the annulus around `center`.
Vec2 annulus_point(Rng& rng, const Vec3& center, double r_min, double r_max) {
  const double r = std::sqrt(uniform(rng, r_min * r_min, r_max * r_max));
  const double theta = uniform(rng, -std::numbers::pi, std::numbers::pi);
  return {center.x + r * std::cos(theta), center.y + r * std::sin(theta)};
}

Box3D template_box(Rng& rng, ClassId c, const Vec2& xy, double yaw) {
  const auto s = class_template_size(c);
  const double k = uniform(rng, 0.9, 1.1);
  return {{xy.x, xy.y, k * s[2] / 2.0}, k * s[0], k * s[1], k * s[2], normalize_angle(yaw), FrameTag::Global};
}

double clamp_score(double s) { return std::clamp(s, 0.0, 1.0); }

Detection lidar_detection(Rng& rng, const SynthConfig& cfg, const Box3D& truth, double p) {
  Detection d;
  d.box = truth;
  d.box.center = truth.center + Vec3{normal(rng, cfg.sigma_lidar), normal(rng, cfg.sigma_lidar), normal(rng, cfg.sigma_lidar)};
  d.box.length *= std::max(0.5, 1.0 + normal(rng, 0.03));
  d.box.width *= std::max(0.5, 1.0 + normal(rng, 0.03));
  d.box.height *= std::max(0.5, 1.0 + normal(rng, 0.03));
  d.box.yaw = normalize_angle(truth.yaw + normal(rng, 0.05));
  d.score = clamp_score(p + normal(rng, cfg.score_jitter));
  d.modality = Modality::Lidar;
  return d;
}

Detection camera_detection(Rng& rng, const SynthConfig& cfg, const Box3D& truth, const Pose& ego, double p) {
  const double dx = truth.center.x - ego.translation.x;
  const double dy = truth.center.y - ego.translation.y;
  const double d = std::hypot(dx, dy);
  const Vec3 ray = d > 0.0 ? Vec3{dx / d, dy / d, 0.0} : Vec3{1.0, 0.0, 0.0};
  const Vec3 lateral{-ray.y, ray.x, 0.0};
  Detection det;
  det.box = truth;
  det.box.center = truth.center + normal(rng, camera_depth_sigma(cfg, d)) * ray + normal(rng, cfg.sigma_lateral) * lateral +
                   Vec3{0.0, 0.0, normal(rng, 0.1)};
  det.box.length *= std::max(0.5, 1.0 + normal(rng, 0.08));
  det.box.width *= std::max(0.5, 1.0 + normal(rng, 0.08));
  det.box.height *= std::max(0.5, 1.0 + normal(rng, 0.08));
  det.box.yaw = normalize_angle(truth.yaw + normal(rng, 0.15));
  det.score = clamp_score(p + normal(rng, cfg.score_jitter));
  det.modality = Modality::Camera;
  return det;
}

void sample_points(Rng& rng, const SynthConfig& cfg, const Box3D& box, double expected, std::vector<Vec3>& out) {
  int n = 0;
  if (expected < 1.0) {
    n = bernoulli(rng, expected) ? 1 : 0;
  } else {
    n = std::poisson_distribution<int>(expected)(rng);
  }
  n = std::min(n, cfg.max_points_per_object);
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  for (int i = 0; i < n; ++i) {
    // Strictly inside so that containment is unambiguous.
    const double lx = uniform(rng, -0.49, 0.49) * box.length;
    const double ly = uniform(rng, -0.49, 0.49) * box.width;
    const double lz = uniform(rng, -0.49, 0.49) * box.height;
    out.push_back({box.center.x + c * lx - s * ly, box.center.y + s * lx + c * ly, box.center.z + lz});
  }
}

}  // namespace

void SynthConfig::validate() const {
  const auto rate = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + " must be in [0, 1]");
  };
  const auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be >= 0");
  };
  rate(lidar_max_recall, "lidar_max_recall");
  rate(camera_recall, "camera_recall");
  rate(fp_rate_lidar, "fp_rate_lidar");
  rate(fp_rate_camera, "fp_rate_camera");
  rate(fp_score_factor, "fp_score_factor");
  nonneg(sigma_lidar, "sigma_lidar");
  nonneg(sigma_lateral, "sigma_lateral");
  nonneg(kappa, "kappa");
  nonneg(score_jitter, "score_jitter");
  nonneg(beam_constant, "beam_constant");
  nonneg(objects_per_scene, "objects_per_scene");
  nonneg(ego_speed, "ego_speed");
  if (!(lidar_points_scale > 0.0)) throw std::invalid_argument("lidar_points_scale must be > 0");
  if (num_scenes < 0 || frames_per_scene < 0) throw std::invalid_argument("scene and frame counts must be >= 0");
  if (sweeps_per_frame < 1 || sweeps_per_frame > 10) throw std::invalid_argument("sweeps_per_frame must be in [1, 10]");
  if (max_points_per_object < 0) throw std::invalid_argument("max_points_per_object must be >= 0");
  if (!(min_distance >= 0.0 && min_distance < max_distance)) {
    throw std::invalid_argument("distance range must satisfy 0 <= min < max");
  }
  for (const auto& [c, w] : class_weights) nonneg(w, "class weight");
}

std::map<ClassId, double> default_class_weights() {
  return {{ClassId::Car, 0.45},         {ClassId::Truck, 0.12},      {ClassId::Bus, 0.03},
          {ClassId::Trailer, 0.02},     {ClassId::ConstructionVehicle, 0.02}, {ClassId::Pedestrian, 0.20},
          {ClassId::Motorcycle, 0.03},  {ClassId::Bicycle, 0.03},    {ClassId::TrafficCone, 0.06},
          {ClassId::Barrier, 0.04}};
}

std::array<double, 3> class_template_size(ClassId c) {
  switch (c) {
    case ClassId::Car: return {4.6, 1.9, 1.7};
    case ClassId::Truck: return {7.0, 2.5, 3.0};
    case ClassId::Bus: return {11.0, 2.9, 3.5};
    case ClassId::Trailer: return {12.0, 2.9, 3.8};
    case ClassId::ConstructionVehicle: return {6.5, 2.8, 3.2};
    case ClassId::Pedestrian: return {0.7, 0.7, 1.75};
    case ClassId::Motorcycle: return {2.1, 0.8, 1.5};
    case ClassId::Bicycle: return {1.7, 0.6, 1.3};
    case ClassId::TrafficCone: return {0.4, 0.4, 1.0};
    case ClassId::Barrier: return {2.5, 0.5, 1.0};
  }
  return {1.0, 1.0, 1.0};
}

double silhouette_area(const Box3D& box) { return std::sqrt(box.length * box.width) * box.height; }

double expected_lidar_points(const SynthConfig& cfg, const Box3D& box, double distance) {
  const double d = std::max(distance, 1.0);
  return cfg.beam_constant * silhouette_area(box) / (d * d);
}

double lidar_recall(const SynthConfig& cfg, double expected_points) {
  return cfg.lidar_max_recall / (1.0 + std::exp(-(expected_points - cfg.lidar_points_midpoint) / cfg.lidar_points_scale));
}

double camera_depth_sigma(const SynthConfig& cfg, double distance) { return cfg.kappa * distance * distance; }

std::vector<CameraModel> default_camera_rig() {
  const std::array<std::pair<const char*, double>, 6> mounts{{{"CAM_FRONT", 0.0},
                                                              {"CAM_FRONT_LEFT", std::numbers::pi / 3.0},
                                                              {"CAM_BACK_LEFT", 2.0 * std::numbers::pi / 3.0},
                                                              {"CAM_BACK", std::numbers::pi},
                                                              {"CAM_BACK_RIGHT", -2.0 * std::numbers::pi / 3.0},
                                                              {"CAM_FRONT_RIGHT", -std::numbers::pi / 3.0}}};
  std::vector<CameraModel> rig;
  for (const auto& [id, offset] : mounts) {
    CameraModel cam;
    cam.id = id;
    cam.fx = cam.fy = 1266.0;
    cam.cx = 800.0;
    cam.cy = 450.0;
    cam.image_width = 1600.0;
    cam.image_height = 900.0;
    // Ego forward is +y, i.e. azimuth pi/2.
    cam.extrinsic = camera_from_ego_looking({0.0, 0.0, 1.5}, std::numbers::pi / 2.0 + offset);
    rig.push_back(cam);
  }
  return rig;
}

SynthOutput synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto weights_map = cfg.class_weights.empty() ? default_class_weights() : cfg.class_weights;
  std::vector<std::pair<ClassId, double>> weights(weights_map.begin(), weights_map.end());
  double weight_sum = 0.0;
  for (const auto& [c, w] : weights) weight_sum += w;
  const auto rig = default_camera_rig();

  SynthOutput out;
  for (int si = 0; si < cfg.num_scenes; ++si) {
    Scene scene;
    scene.scene_id = "scene-" + std::to_string(si);
    Ego ego{{uniform(rng, -500.0, 500.0), uniform(rng, -500.0, 500.0), 0.0}, uniform(rng, -std::numbers::pi, std::numbers::pi),
            cfg.ego_speed};

    const int n_objects =
        cfg.objects_per_scene > 0.0 && weight_sum > 0.0 ? std::poisson_distribution<int>(cfg.objects_per_scene)(rng) : 0;
    std::vector<SimObject> objects;
    for (int oi = 0; oi < n_objects; ++oi) {
      const ClassId cls = draw_class(rng, weights);
      const Vec2 xy = annulus_point(rng, ego.origin, cfg.min_distance, cfg.max_distance);
      const double yaw = uniform(rng, -std::numbers::pi, std::numbers::pi);
      const Box3D box = template_box(rng, cls, xy, yaw);
      const double speed = uniform(rng, 0.0, max_speed(cls));
      objects.push_back({cls, box, {speed * std::cos(yaw), speed * std::sin(yaw), 0.0},
                         scene.scene_id + "-obj-" + std::to_string(oi)});
    }

    for (int fi = 0; fi < cfg.frames_per_scene; ++fi) {
      Frame frame;
      frame.token = scene.scene_id + "-frame-" + std::to_string(fi);
      frame.timestamp_us = kStartUs + fi * kKeyframeIntervalUs;
      const double t_key = static_cast<double>(fi * kKeyframeIntervalUs) / 1e6;
      frame.ego_pose = ego.at(t_key);
      frame.cameras = rig;

      for (std::size_t oi = 0; oi < objects.size(); ++oi) {
        Annotation a;
        a.token = frame.token + "-ann-" + std::to_string(oi);
        a.instance_id = objects[oi].instance_id;
        a.cls = objects[oi].cls;
        a.box = objects[oi].at(t_key);
        frame.annotations.push_back(std::move(a));
      }

      for (int k = cfg.sweeps_per_frame - 1; k >= 0; --k) {
        LidarSweep sweep;
        sweep.timestamp_us = frame.timestamp_us - k * kSweepIntervalUs;
        const double t_sweep = t_key - static_cast<double>(k * kSweepIntervalUs) / 1e6;
        sweep.ego_pose = ego.at(t_sweep);
        for (const SimObject& obj : objects) {
          const Box3D box = obj.at(t_sweep);
          const double expected = expected_lidar_points(cfg, box, ego_distance(sweep.ego_pose, box));
          sample_points(rng, cfg, box, expected, sweep.points);
        }
        frame.sweeps.push_back(std::move(sweep));
      }

      auto& lidar = out.lidar[frame.token];
      auto& camera = out.camera[frame.token];
      for (const Annotation& a : frame.annotations) {
        const double d = ego_distance(frame.ego_pose, a.box);
        const double p_lidar = lidar_recall(cfg, expected_lidar_points(cfg, a.box, d));
        if (bernoulli(rng, p_lidar)) {
          Detection det = lidar_detection(rng, cfg, a.box, p_lidar);
          det.cls = a.cls;
          lidar.push_back(det);
        }
        if (bernoulli(rng, cfg.camera_recall)) {
          Detection det = camera_detection(rng, cfg, a.box, frame.ego_pose, cfg.camera_recall);
          det.cls = a.cls;
          camera.push_back(det);
        }
      }

      const auto false_positives = [&](double rate, Modality modality, std::vector<Detection>& dst) {
        const int n = std::binomial_distribution<int>(static_cast<int>(frame.annotations.size()), rate)(rng);
        for (int i = 0; i < n; ++i) {
          const ClassId cls = draw_class(rng, weights);
          const Vec2 xy = annulus_point(rng, frame.ego_pose.translation, cfg.min_distance, cfg.max_distance);
          Detection det;
          det.cls = cls;
          det.box = template_box(rng, cls, xy, uniform(rng, -std::numbers::pi, std::numbers::pi));
          const double p = modality == Modality::Lidar
                               ? lidar_recall(cfg, expected_lidar_points(cfg, det.box, ego_distance(frame.ego_pose, det.box)))
                               : cfg.camera_recall;
          det.score = clamp_score(cfg.fp_score_factor * p + normal(rng, cfg.score_jitter));
          det.modality = modality;
          dst.push_back(det);
        }
      };
      false_positives(cfg.fp_rate_lidar, Modality::Lidar, lidar);
      false_positives(cfg.fp_rate_camera, Modality::Camera, camera);

      scene.frames.push_back(std::move(frame));
    }
    fill_point_counts(scene);
    out.scenes.push_back(std::move(scene));
  }
  return out;
}

}  // namespace far3d
