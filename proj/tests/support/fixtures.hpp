#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "far3d/dataset.hpp"
#include "oracles.hpp"

namespace fixtures {

using far3d::Box3D;

inline Box3D box(double x, double y, double z, double l, double w, double h, double yaw = 0.0,
                 far3d::FrameTag frame = far3d::FrameTag::Global) {
  return {{x, y, z}, l, w, h, yaw, frame};
}

inline far3d::Detection det(const Box3D& b, double score, far3d::ClassId cls = far3d::ClassId::Car,
                            far3d::Modality m = far3d::Modality::Lidar) {
  far3d::Detection d;
  d.box = b;
  d.cls = cls;
  d.score = score;
  d.modality = m;
  return d;
}

inline far3d::Annotation ann(const std::string& token, const Box3D& b, far3d::ClassId cls = far3d::ClassId::Car,
                             int points = 1, const std::string& instance = "") {
  far3d::Annotation a;
  a.token = token;
  a.instance_id = instance.empty() ? token : instance;
  a.box = b;
  a.cls = cls;
  a.num_lidar_pts_current = points;
  return a;
}

// Camera at the ego origin, 1.5 m up, looking along ego +y.
far3d::CameraModel forward_camera(double fx = 1000.0);

// Frame with an identity ego pose (global == ego up to the +y heading
// convention: the vehicle faces global +x, which is ego +y).
far3d::Frame frame_at(const std::string& token, const far3d::Pose& ego = far3d::Pose::from_yaw({}, 0.0));

// Global point `forward` meters ahead and `right` meters to the right of an identity-pose ego.
inline far3d::Vec3 ahead(double forward, double right = 0.0, double z = 0.0) { return {forward, -right, z}; }

struct EvalCase {
  std::vector<far3d::Scene> scenes;
  far3d::DetectionMap dets;
  std::vector<oracle::OracleFrame> frames;
};

// Small random scenes: up to 10 ground truths and 20 detections per class and frame.
EvalCase random_eval_case(std::mt19937_64& rng, const std::vector<far3d::ClassId>& classes);

struct OracleComparison {
  std::size_t label_mismatches = 0;  // greedy labels and ranked TP flags
  std::size_t checked_labels = 0;
  double max_ap_error = 0.0;
  std::size_t ap_presence_mismatches = 0;  // one side reports no AP
};

// Runs the library's greedy matcher and evaluate() on the case and compares
// both against the oracle, for every class and band of `cfg`.
OracleComparison compare_with_oracle(const EvalCase& c, const far3d::EvalConfig& cfg);

// Clustered detections with plenty of overlap, mixed classes and modalities.
std::vector<far3d::Detection> random_detections(std::mt19937_64& rng, int max_count, const far3d::Vec3& around,
                                                double spread);

}  // namespace fixtures
