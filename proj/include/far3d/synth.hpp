#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "far3d/dataset.hpp"

namespace far3d {

// Desk-scale scene simulator. Lidar returns fall off with the square of range
// and vanish on small distant targets; the camera detector keeps its recall
// out to the far field but its depth error grows quadratically with range.
struct SynthConfig {
  int num_scenes = 60;
  int frames_per_scene = 4;
  int sweeps_per_frame = 10;  // keyframe sweep plus preceding sweeps, 1..10
  double objects_per_scene = 25.0;  // Poisson mean
  std::map<ClassId, double> class_weights;  // empty means the built-in mix
  double min_distance = 0.0;
  double max_distance = 80.0;
  double ego_speed = 5.0;  // m/s along the ego heading

  // Beam model: expected returns per sweep = beam_constant * silhouette / d^2,
  // silhouette = sqrt(length * width) * height. Below one expected return a
  // sweep yields a single point with probability equal to the expectation.
  double beam_constant = 700.0;
  int max_points_per_object = 48;

  // Lidar detector: recall = lidar_max_recall * logistic((expected - midpoint) / scale).
  double lidar_max_recall = 0.97;
  double lidar_points_midpoint = 1.2;
  double lidar_points_scale = 0.4;
  double sigma_lidar = 0.15;

  // Camera detector: constant recall; depth noise kappa * d^2 along the viewing
  // ray, sigma_lateral across it.
  double camera_recall = 0.7;
  double kappa = 0.0008;
  double sigma_lateral = 0.3;

  double fp_rate_lidar = 0.1;   // per ground-truth object and frame
  double fp_rate_camera = 0.1;
  double fp_score_factor = 0.5;  // false-positive score relative to the true-positive probability
  double score_jitter = 0.05;

  std::uint64_t seed = 7;

  // Throws std::invalid_argument when a rate leaves [0, 1] or a sigma is negative.
  void validate() const;
};

struct SynthOutput {
  std::vector<Scene> scenes;
  DetectionMap lidar;
  DetectionMap camera;
};

SynthOutput synth_generate(const SynthConfig& cfg);

std::map<ClassId, double> default_class_weights();
// Mean (length, width, height) of a class in the simulator.
std::array<double, 3> class_template_size(ClassId c);

double silhouette_area(const Box3D& box);
double expected_lidar_points(const SynthConfig& cfg, const Box3D& box, double distance);
double lidar_recall(const SynthConfig& cfg, double expected_points);
double camera_depth_sigma(const SynthConfig& cfg, double distance);

// Six cameras covering the full circle, nuScenes-like intrinsics.
std::vector<CameraModel> default_camera_rig();

}  // namespace far3d
