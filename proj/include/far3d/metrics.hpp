#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "far3d/dataset.hpp"
#include "far3d/visibility.hpp"

namespace far3d {

// Distance-adaptive matching tolerance, meters. thresh_linear(50) == 4.
double thresh_linear(double d);
// 0.5 m at 10 m, 1 m at 20 m, 4 m at 50 m.
double thresh_quadratic(double d);

// Ellipse test in ego coordinates (+y longitudinal). The longitudinal semi-axis
// is twice the lateral one. A ground truth at the ego origin only accepts an
// exact hit.
bool elliptical_match(const Vec2& pred_ego, const Vec2& gt_ego);

enum class SchemeKind { DefaultSet, Fixed, Linear, Quadratic, Elliptical };

struct ThresholdScheme {
  SchemeKind kind = SchemeKind::Linear;
  double fixed_threshold = 4.0;
  std::vector<double> default_thresholds{0.5, 1.0, 2.0, 4.0};

  static ThresholdScheme default_set() { return {SchemeKind::DefaultSet}; }
  static ThresholdScheme fixed(double t) { return {SchemeKind::Fixed, t}; }
  static ThresholdScheme linear() { return {SchemeKind::Linear}; }
  static ThresholdScheme quadratic() { return {SchemeKind::Quadratic}; }
  static ThresholdScheme elliptical() { return {SchemeKind::Elliptical}; }

  // "default", "fixed4" (or "fixed:<meters>"), "linear", "quadratic", "elliptical"
  static std::optional<ThresholdScheme> parse(std::string_view name);
  std::string name() const;
  void validate() const;
};

inline constexpr std::string_view kSchemeNames = "default|fixed4|linear|quadratic|elliptical";

// One matching pass. DefaultSet expands into four fixed matchers.
struct Matcher {
  SchemeKind kind = SchemeKind::Fixed;
  double fixed_threshold = 4.0;

  // Both boxes in the ego frame; the tolerance is taken at the ground truth's distance.
  bool accepts(const Box3D& pred_ego, const Box3D& gt_ego) const;
  std::string label() const;
};

std::vector<Matcher> matchers_for(const ThresholdScheme& scheme);
Matcher match_tolerance(SchemeKind kind, double fixed_threshold = 4.0);

struct MatchResult {
  // Indexed like the input detections: matched ground-truth index, or nullopt for a false positive.
  std::vector<std::optional<std::size_t>> det_to_gt;
  std::vector<std::size_t> unmatched_gt;
};

// Detections are visited by descending score, ties in input order. Each takes
// the nearest still-unmatched ground truth the matcher accepts. Boxes must be
// in the ego frame.
MatchResult greedy_match(std::span<const Detection> dets, std::span<const Annotation> gts, const Matcher& matcher);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
  double score = 0.0;
};

struct PRCurve {
  std::vector<PrPoint> points;  // one per detection in ranked order
  int num_gt = 0;
};

struct RankedLabel {
  double score = 0.0;
  bool tp = false;
};

// One operating point per detection; `ranked` is in descending-score order.
PRCurve build_pr_curve(std::span<const RankedLabel> ranked, int num_gt);

enum class ApMode { FullArea, NuScenesNormalized };

std::string_view to_string(ApMode m);
std::optional<ApMode> parse_ap_mode(std::string_view name);

inline constexpr double kMinRecall = 0.1;
inline constexpr double kMinPrecision = 0.1;

// nullopt when the curve has no ground truth (the class/band is then left out of mAP).
std::optional<double> average_precision(const PRCurve& curve, ApMode mode);

struct EvalConfig {
  std::vector<DistanceBand> bands{{0.0, 50.0}, {50.0, 80.0}};
  std::vector<ClassId> classes{ClassId::Car, ClassId::Truck, ClassId::Pedestrian};
  ThresholdScheme scheme = ThresholdScheme::linear();
  double max_range = 80.0;
  std::optional<std::map<ClassId, double>> per_class_legacy_ranges;
  ApMode ap_mode = ApMode::NuScenesNormalized;
  GtMode gt_mode = GtMode::IncludeUnoccludedZeroLidar;
  OcclusionConfig occlusion;
  int threads = 0;  // 0: hardware concurrency

  void validate() const;
};

// Per-class evaluation ranges of the original nuScenes benchmark.
std::map<ClassId, double> legacy_class_ranges();

struct ThresholdResult {
  std::string label;
  PRCurve curve;
  std::optional<double> ap;
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

struct ClassBandResult {
  ClassId cls = ClassId::Car;
  std::size_t band_index = 0;
  int num_gt = 0;
  int num_dets = 0;
  std::optional<double> ap;  // mean over per_threshold for DefaultSet
  std::vector<ThresholdResult> per_threshold;
};

struct EvalReport {
  EvalConfig config;
  std::vector<ClassBandResult> results;           // class-major, then band
  std::vector<std::optional<double>> map_per_band;  // over classes with ground truth in the band

  const ClassBandResult* find(ClassId cls, std::size_t band_index) const;
  std::optional<double> ap(ClassId cls, std::size_t band_index) const;
};

// Throws ValidationError naming every detection frame token absent from `scenes`.
EvalReport evaluate(const DetectionMap& dets, const std::vector<Scene>& scenes, const EvalConfig& cfg);

// Same, with the evaluation ground truth already built (skips occlusion reasoning).
EvalReport evaluate(const DetectionMap& dets, const std::vector<Scene>& scenes, const EvalGroundTruth& gt,
                    const EvalConfig& cfg);

}  // namespace far3d
