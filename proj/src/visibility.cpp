#include "far3d/visibility.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace far3d {

namespace {

struct ProjectedPoint {
  Vec2 pixel;
  double depth = 0.0;
};

// Per-frame cache of everything rules (a) and (b) look at, one slot per camera.
class OcclusionContext {
 public:
  OcclusionContext(const Frame& frame, const OcclusionConfig& cfg) : frame_(frame), cfg_(cfg) {
    const std::size_t n_cams = frame.cameras.size();
    ann_rects_.resize(n_cams);
    points_.resize(n_cams);
    ann_distance_.reserve(frame.annotations.size());
    std::vector<Box3D> ego_boxes;
    for (const Annotation& a : frame.annotations) {
      ego_boxes.push_back(to_ego_frame(frame, a.box));
      ann_distance_.push_back(ego_distance(frame, a.box));
    }
    std::vector<Vec3> ego_points;
    const auto add_sweep = [&](const LidarSweep& s) {
      for (const Vec3& p : s.points) ego_points.push_back(to_ego_point(frame, p));
    };
    if (cfg.points_from_all_sweeps) {
      for (const LidarSweep& s : frame.sweeps) add_sweep(s);
    } else if (const LidarSweep* key = frame.keyframe_sweep()) {
      add_sweep(*key);
    }
    for (std::size_t c = 0; c < n_cams; ++c) {
      const CameraModel& cam = frame.cameras[c];
      for (const Box3D& b : ego_boxes) ann_rects_[c].push_back(project_box_to_image(cam, b));
      for (const Vec3& p : ego_points) {
        if (const auto ip = project_point(cam, p)) points_[c].push_back({ip->pixel, ip->depth});
      }
    }
  }

  VisibilityVerdict classify(const Annotation& ann) const {
    const Box3D ego_box = to_ego_frame(frame_, ann.box);
    const double distance = ego_distance(frame_, ann.box);
    std::optional<OcclusionReason> first_reason;
    for (std::size_t c = 0; c < frame_.cameras.size(); ++c) {
      const auto proj = project_box_to_image(frame_.cameras[c], ego_box);
      if (!proj || proj->corners_in_image < 1) continue;
      const auto reason = occluded_in_camera(c, ann.token, *proj, distance);
      if (!reason) return VisibilityVerdict::unoccluded();
      if (!first_reason) first_reason = reason;
    }
    return first_reason ? VisibilityVerdict::occluded(*first_reason) : VisibilityVerdict::not_visible();
  }

 private:
  std::optional<OcclusionReason> occluded_in_camera(std::size_t cam, const std::string& token, const Projection& proj,
                                                    double distance) const {
    for (std::size_t i = 0; i < frame_.annotations.size(); ++i) {
      if (frame_.annotations[i].token == token) continue;
      const auto& other = ann_rects_[cam][i];
      if (!other) continue;
      if (rect_iou(other->rect, proj.rect) > cfg_.rect_iou_threshold &&
          ann_distance_[i] <= distance - cfg_.box_depth_margin) {
        return OcclusionReason::BoxInFront;
      }
    }
    int in_front = 0;
    for (const ProjectedPoint& p : points_[cam]) {
      if (proj.rect.contains(p.pixel.x, p.pixel.y) && p.depth <= proj.mean_depth - cfg_.point_depth_margin) {
        if (++in_front >= cfg_.min_points_in_front) return OcclusionReason::PointsInFront;
      }
    }
    return std::nullopt;
  }

  const Frame& frame_;
  const OcclusionConfig& cfg_;
  std::vector<std::vector<std::optional<Projection>>> ann_rects_;
  std::vector<std::vector<ProjectedPoint>> points_;
  std::vector<double> ann_distance_;
};

constexpr std::array<std::string_view, 3> kGtModeNames{"drop-zero-lidar", "include-unoccluded", "include-all"};

}  // namespace

std::string to_string(const VisibilityVerdict& v) {
  switch (v.kind) {
    case VisibilityVerdict::Kind::Unoccluded: return "unoccluded";
    case VisibilityVerdict::Kind::NotVisibleInAnyCamera: return "not_visible";
    case VisibilityVerdict::Kind::Occluded:
      return v.reason == OcclusionReason::BoxInFront ? "occluded:box_in_front" : "occluded:points_in_front";
  }
  return "unknown";
}

void OcclusionConfig::validate() const {
  if (!(rect_iou_threshold > 0.0) || !(box_depth_margin > 0.0) || !(point_depth_margin > 0.0) ||
      min_points_in_front < 1) {
    throw std::invalid_argument("occlusion thresholds must be positive");
  }
}

VisibilityVerdict classify_occlusion(const Frame& frame, const Annotation& ann, const OcclusionConfig& cfg) {
  return OcclusionContext(frame, cfg).classify(ann);
}

std::vector<VisibilityVerdict> classify_frame(const Frame& frame, const OcclusionConfig& cfg) {
  const OcclusionContext ctx(frame, cfg);
  std::vector<VisibilityVerdict> out;
  out.reserve(frame.annotations.size());
  for (const Annotation& a : frame.annotations) out.push_back(ctx.classify(a));
  return out;
}

std::string DistanceBand::label() const {
  std::ostringstream os;
  os << min_m << "-" << max_m << "m";
  return os.str();
}

ZeroLidarStats zero_lidar_stats(const std::vector<Scene>& scenes, CountMode mode, const DistanceBand& band,
                                const OcclusionConfig& occ) {
  ZeroLidarStats stats;
  for (const Scene& scene : scenes) {
    for (std::size_t fi = 0; fi < scene.frames.size(); ++fi) {
      const Frame& frame = scene.frames[fi];
      std::optional<OcclusionContext> ctx;
      for (const Annotation& ann : frame.annotations) {
        if (!band.contains(ego_distance(frame, ann.box))) continue;
        ++stats.total;
        const int n = count_points_in_annotation(frame, ann, mode, previous_keyframe(scene, fi, ann.instance_id));
        if (n > 0) continue;
        ++stats.zero_count;
        if (!ctx) ctx.emplace(frame, occ);
        if (ctx->classify(ann).kind == VisibilityVerdict::Kind::Unoccluded) ++stats.unoccluded_zero_count;
      }
    }
  }
  stats.zero_fraction = stats.total > 0 ? static_cast<double>(stats.zero_count) / static_cast<double>(stats.total) : 0.0;
  return stats;
}

std::string_view to_string(GtMode m) { return kGtModeNames[static_cast<std::size_t>(m)]; }

std::optional<GtMode> parse_gt_mode(std::string_view name) {
  for (std::size_t i = 0; i < kGtModeNames.size(); ++i) {
    if (kGtModeNames[i] == name) return static_cast<GtMode>(i);
  }
  return std::nullopt;
}

EvalGroundTruth build_eval_gt(const std::vector<Scene>& scenes, GtMode mode, const OcclusionConfig& occ) {
  EvalGroundTruth out;
  for (const Scene& scene : scenes) {
    for (const Frame& frame : scene.frames) {
      auto& kept = out[frame.token];
      std::optional<OcclusionContext> ctx;
      for (const Annotation& ann : frame.annotations) {
        bool keep = true;
        if (mode != GtMode::IncludeAll && ann.num_lidar_pts_current == 0) {
          keep = false;
          if (mode == GtMode::IncludeUnoccludedZeroLidar) {
            if (!ctx) ctx.emplace(frame, occ);
            keep = ctx->classify(ann).kind == VisibilityVerdict::Kind::Unoccluded;
          }
        }
        if (keep) kept.push_back(ann);
      }
    }
  }
  return out;
}

DensityReport annotation_density(const std::vector<Scene>& scenes, double bin_width, double max_range) {
  if (!(bin_width > 0.0) || !(max_range > 0.0)) throw std::invalid_argument("bin width and range must be positive");
  DensityReport rep;
  rep.bin_width = bin_width;
  const auto n_bins = static_cast<std::size_t>(std::ceil(max_range / bin_width));
  std::vector<std::map<ClassId, std::int64_t>> counts(n_bins);
  for (const Scene& scene : scenes) {
    for (const Frame& frame : scene.frames) {
      ++rep.frame_count;
      for (const Annotation& ann : frame.annotations) {
        const double d = ego_distance(frame, ann.box);
        if (!(d < max_range)) continue;
        const auto bin = std::min(n_bins - 1, static_cast<std::size_t>(d / bin_width));
        ++counts[bin][ann.cls];
      }
    }
  }
  const double frames = static_cast<double>(rep.frame_count);
  for (std::size_t b = 0; b < n_bins; ++b) {
    DensityBin bin;
    bin.start = static_cast<double>(b) * bin_width;
    bin.end = std::min(max_range, static_cast<double>(b + 1) * bin_width);
    std::int64_t total = 0;
    for (ClassId c : kAllClasses) {
      const auto it = counts[b].find(c);
      const std::int64_t n = it == counts[b].end() ? 0 : it->second;
      total += n;
      bin.per_class[c] = frames > 0 ? static_cast<double>(n) / frames : 0.0;
    }
    bin.total = frames > 0 ? static_cast<double>(total) / frames : 0.0;
    rep.bins.push_back(std::move(bin));
  }
  return rep;
}

std::vector<AuditEntry> audit_sample(const Scene& scene, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(scene.frames.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t take = std::min(n, idx.size());
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(take);
  std::sort(idx.begin(), idx.end());
  std::vector<AuditEntry> out;
  for (std::size_t i : idx) {
    const Frame& f = scene.frames[i];
    const auto far = std::count_if(f.annotations.begin(), f.annotations.end(),
                                   [&](const Annotation& a) { return ego_distance(f, a.box) > 50.0; });
    out.push_back({f.token, static_cast<int>(far)});
  }
  return out;
}

}  // namespace far3d
