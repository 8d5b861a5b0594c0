#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "far3d/dataset.hpp"

namespace far3d {

enum class OcclusionReason { BoxInFront, PointsInFront };

struct VisibilityVerdict {
  enum class Kind { Occluded, Unoccluded, NotVisibleInAnyCamera };
  Kind kind = Kind::NotVisibleInAnyCamera;
  OcclusionReason reason = OcclusionReason::BoxInFront;  // meaningful only when Occluded

  static VisibilityVerdict occluded(OcclusionReason r) { return {Kind::Occluded, r}; }
  static VisibilityVerdict unoccluded() { return {Kind::Unoccluded, OcclusionReason::BoxInFront}; }
  static VisibilityVerdict not_visible() { return {Kind::NotVisibleInAnyCamera, OcclusionReason::BoxInFront}; }

  bool operator==(const VisibilityVerdict& o) const {
    return kind == o.kind && (kind != Kind::Occluded || reason == o.reason);
  }
};

std::string to_string(const VisibilityVerdict& v);

struct OcclusionConfig {
  double rect_iou_threshold = 0.5;
  double box_depth_margin = 5.0;     // meters, ego-center distance
  double point_depth_margin = 10.0;  // meters, camera-frame depth
  int min_points_in_front = 1;
  bool points_from_all_sweeps = false;  // keyframe sweep only by default

  void validate() const;
};

VisibilityVerdict classify_occlusion(const Frame& frame, const Annotation& ann, const OcclusionConfig& cfg = {});
// Verdicts for every annotation of the frame, in annotation order.
std::vector<VisibilityVerdict> classify_frame(const Frame& frame, const OcclusionConfig& cfg = {});

struct DistanceBand {
  double min_m = 0.0;
  double max_m = 80.0;

  bool contains(double d) const { return d >= min_m && d < max_m; }
  std::string label() const;
  friend bool operator==(const DistanceBand&, const DistanceBand&) = default;
};

struct ZeroLidarStats {
  std::int64_t total = 0;
  std::int64_t zero_count = 0;
  double zero_fraction = 0.0;  // 0 when total is 0
  std::int64_t unoccluded_zero_count = 0;
};

ZeroLidarStats zero_lidar_stats(const std::vector<Scene>& scenes, CountMode mode, const DistanceBand& band,
                                const OcclusionConfig& occ = {});

enum class GtMode { DropAllZeroLidar, IncludeUnoccludedZeroLidar, IncludeAll };

std::string_view to_string(GtMode m);
std::optional<GtMode> parse_gt_mode(std::string_view name);

// Frame token -> annotations kept for evaluation.
using EvalGroundTruth = std::map<std::string, std::vector<Annotation>>;

EvalGroundTruth build_eval_gt(const std::vector<Scene>& scenes, GtMode mode, const OcclusionConfig& occ = {});

struct DensityBin {
  double start = 0.0;
  double end = 0.0;
  std::map<ClassId, double> per_class;  // average annotations per frame
  double total = 0.0;
};

struct DensityReport {
  double bin_width = 5.0;
  std::int64_t frame_count = 0;
  std::vector<DensityBin> bins;
};

// Annotations at or beyond max_range are not binned.
DensityReport annotation_density(const std::vector<Scene>& scenes, double bin_width = 5.0, double max_range = 80.0);

struct AuditEntry {
  std::string frame_token;
  int far_field_annotations = 0;  // ego distance > 50 m
};

// Deterministic sample without replacement, returned in scene order.
std::vector<AuditEntry> audit_sample(const Scene& scene, std::size_t n = 20, std::uint64_t seed = 0);

}  // namespace far3d
