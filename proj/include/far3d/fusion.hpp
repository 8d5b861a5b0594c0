#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "far3d/dataset.hpp"

namespace far3d {

enum class IouKind { Bev, ThreeD };

double detection_iou(const Box3D& a, const Box3D& b, IouKind kind);

// Greedy NMS by descending score (ties keep input order). A candidate is
// dropped when its IoU with an already kept box of the same class exceeds the
// threshold. Output is in ranked order.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold, IouKind kind = IouKind::Bev);

struct AdaNmsConfig {
  double d1 = 10.0;
  double d2 = 70.0;
  double c1 = 0.2;
  double c2 = 0.05;

  void validate() const;
};

// Linear in distance between (d1, c1) and (d2, c2), clamped to the endpoint values.
double adanms_threshold(double d, const AdaNmsConfig& cfg = {});

// NMS whose threshold for a pair is adanms_threshold at the mean of the two
// boxes' ego distances. Boxes are global; only the ego position is used.
std::vector<Detection> adanms(std::span<const Detection> dets, const AdaNmsConfig& cfg, const Pose& ego_pose,
                              IouKind kind = IouKind::Bev);

// Per-class affine rescale s' = clamp(scale * s + offset) applied to camera scores before fusion.
struct ScoreCalibration {
  std::map<ClassId, std::pair<double, double>> camera_affine;

  std::vector<Detection> apply(std::span<const Detection> camera) const;
};

// Union of both sets suppressed with plain NMS (`threshold`) or AdaNMS (`ada`).
// Output boxes are tagged Fused with their source modality as provenance.
struct NmsFusionOptions {
  std::optional<double> iou_threshold;  // plain NMS when set
  AdaNmsConfig ada;
  IouKind iou_kind = IouKind::Bev;
  ScoreCalibration calibration;
};

std::vector<Detection> nms_fusion(std::span<const Detection> lidar, std::span<const Detection> camera,
                                  const NmsFusionOptions& opts, const Pose& ego_pose);

enum class FarSource { NmsFused, AdaNmsFused, CameraOnly };

struct DistanceFusionConfig {
  std::map<ClassId, double> t_c;  // per-class gate; classes not listed use default_t_c
  double default_t_c = 50.0;
  FarSource far_source = FarSource::AdaNmsFused;

  double gate(ClassId c) const;
};

// Lidar detections closer than t_c, far-source detections at or beyond it.
std::vector<Detection> distance_fusion(std::span<const Detection> lidar, std::span<const Detection> far,
                                       const DistanceFusionConfig& cfg, const Pose& ego_pose);

// Odds product of two conditionally independent detectors under a uniform prior.
double bayes_combine(double s_lidar, double s_camera);

// Cross-modality same-class pairs with BEV IoU above the threshold are matched
// greedily, highest IoU first. A pair becomes the lidar box with the combined
// score; unpaired boxes pass through.
std::vector<Detection> bayes_score_fusion(std::span<const Detection> lidar, std::span<const Detection> camera,
                                          double pair_iou_threshold = 0.1);

struct ClocsFeature {
  double iou3d = 0.0;
  double s_i = 0.0;   // lidar score
  double s_j = 0.0;   // camera score
  double d_ij = 0.0;  // meters between candidate centers
  double d_j = 0.0;   // ego distance of the camera candidate
};

struct ClocsEntry {
  std::size_t lidar_index = 0;
  std::size_t camera_index = 0;
  ClocsFeature feature;
};

// Sparse tensor over same-class pairs with positive 3D IoU, sorted by (lidar, camera) index.
std::vector<ClocsEntry> clocs_features(std::span<const Detection> lidar, std::span<const Detection> camera,
                                       const Pose& ego_pose);

using ClocsScorer = std::function<double(const ClocsFeature&)>;

// logistic(w . [iou3d, s_i, s_j, -d_ij/10, d_j/80] + b)
struct LogisticScorer {
  std::array<double, 5> w{2.0, 3.0, 2.0, 1.0, 0.5};
  double b = -3.5;

  double operator()(const ClocsFeature& f) const;
};

// Each lidar detection with a partner takes the scorer's output (clamped to
// [0, 1]) over its highest-IoU partner; the rest keep their score.
std::vector<Detection> clocs_score(std::span<const Detection> lidar, std::span<const ClocsEntry> features,
                                   const ClocsScorer& scorer);

enum class FusionMethod { Nms, AdaNms, Distance, Bayes, Clocs };

std::string_view to_string(FusionMethod m);
std::optional<FusionMethod> parse_fusion_method(std::string_view name);

struct FusionOptions {
  FusionMethod method = FusionMethod::AdaNms;
  double nms_iou = 0.2;
  AdaNmsConfig ada;
  IouKind iou_kind = IouKind::Bev;
  ScoreCalibration calibration;
  DistanceFusionConfig distance;
  double bayes_pair_iou = 0.1;
  LogisticScorer scorer;
};

// Frame-by-frame fusion. Every frame present in either input appears in the
// output. Ego poses come from `scenes`; a frame missing there is an error.
DetectionMap fuse(const DetectionMap& lidar, const DetectionMap& camera, const std::vector<Scene>& scenes,
                  const FusionOptions& opts);

}  // namespace far3d
