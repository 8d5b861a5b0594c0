#include "far3d/report.hpp"

#include <cstdio>
#include <sstream>

namespace far3d {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json curve_to_json(const PRCurve& curve) {
  json recall = json::array();
  json precision = json::array();
  json score = json::array();
  for (const PrPoint& p : curve.points) {
    recall.push_back(p.recall);
    precision.push_back(p.precision);
    score.push_back(p.score);
  }
  return {{"num_gt", curve.num_gt}, {"recall", recall}, {"precision", precision}, {"score", score}};
}

std::string percent(const std::optional<double>& ap) {
  if (!ap) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *ap * 100.0);
  return buf;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

json eval_config_to_json(const EvalConfig& cfg) {
  json bands = json::array();
  for (const DistanceBand& b : cfg.bands) bands.push_back({b.min_m, b.max_m});
  json classes = json::array();
  for (ClassId c : cfg.classes) classes.push_back(to_string(c));
  json legacy = nullptr;
  if (cfg.per_class_legacy_ranges) {
    legacy = json::object();
    for (const auto& [c, r] : *cfg.per_class_legacy_ranges) legacy[std::string(to_string(c))] = r;
  }
  return {{"scheme", cfg.scheme.name()},
          {"bands", bands},
          {"classes", classes},
          {"max_range", cfg.max_range},
          {"legacy_ranges", legacy},
          {"ap_mode", to_string(cfg.ap_mode)},
          {"gt_mode", to_string(cfg.gt_mode)},
          {"occlusion",
           {{"rect_iou_threshold", cfg.occlusion.rect_iou_threshold},
            {"box_depth_margin", cfg.occlusion.box_depth_margin},
            {"point_depth_margin", cfg.occlusion.point_depth_margin},
            {"min_points_in_front", cfg.occlusion.min_points_in_front},
            {"points_from_all_sweeps", cfg.occlusion.points_from_all_sweeps}}}};
}

json report_to_json(std::span<const MethodReport> methods) {
  json out = json::array();
  for (const MethodReport& m : methods) {
    const EvalConfig& cfg = m.report.config;
    json results = json::array();
    for (const ClassBandResult& r : m.report.results) {
      json thresholds = json::array();
      for (const ThresholdResult& t : r.per_threshold) {
        thresholds.push_back({{"label", t.label},
                              {"ap", optional_number(t.ap)},
                              {"tp", t.tp},
                              {"fp", t.fp},
                              {"fn", t.fn},
                              {"curve", curve_to_json(t.curve)}});
      }
      results.push_back({{"class", to_string(r.cls)},
                         {"band", cfg.bands.at(r.band_index).label()},
                         {"num_gt", r.num_gt},
                         {"num_dets", r.num_dets},
                         {"ap", optional_number(r.ap)},
                         {"thresholds", thresholds}});
    }
    json map = json::object();
    for (std::size_t b = 0; b < cfg.bands.size(); ++b) map[cfg.bands[b].label()] = optional_number(m.report.map_per_band[b]);
    out.push_back({{"method", m.label}, {"config", eval_config_to_json(cfg)}, {"results", results}, {"map", map}});
  }
  return {{"methods", out}};
}

std::string report_markdown(std::span<const MethodReport> methods) {
  std::ostringstream os;
  if (methods.empty()) return "";
  const EvalConfig& cfg = methods.front().report.config;
  os << "Scheme: " << cfg.scheme.name() << ", AP mode: " << to_string(cfg.ap_mode)
     << ", ground truth: " << to_string(cfg.gt_mode) << "\n\n";
  os << "| Method |";
  for (const DistanceBand& b : cfg.bands) {
    for (ClassId c : cfg.classes) os << " " << to_string(c) << " " << b.label() << " |";
    os << " mAP " << b.label() << " |";
  }
  os << "\n|---|";
  for (std::size_t i = 0; i < cfg.bands.size() * (cfg.classes.size() + 1); ++i) os << "---:|";
  os << "\n";
  for (const MethodReport& m : methods) {
    os << "| " << m.label << " |";
    for (std::size_t b = 0; b < cfg.bands.size(); ++b) {
      for (ClassId c : cfg.classes) os << " " << percent(m.report.ap(c, b)) << " |";
      os << " " << percent(b < m.report.map_per_band.size() ? m.report.map_per_band[b] : std::nullopt) << " |";
    }
    os << "\n";
  }
  return os.str();
}

json zero_lidar_stats_to_json(const ZeroLidarStats& stats, CountMode mode, const DistanceBand& band) {
  return {{"mode", to_string(mode)},
          {"band", {band.min_m, band.max_m}},
          {"total", stats.total},
          {"zero_count", stats.zero_count},
          {"zero_fraction", stats.zero_fraction},
          {"unoccluded_zero_count", stats.unoccluded_zero_count}};
}

json verdicts_to_json(const std::vector<Scene>& scenes, const OcclusionConfig& cfg) {
  json out = json::array();
  for (const Scene& scene : scenes) {
    for (const Frame& frame : scene.frames) {
      const auto verdicts = classify_frame(frame, cfg);
      for (std::size_t i = 0; i < frame.annotations.size(); ++i) {
        const Annotation& a = frame.annotations[i];
        out.push_back({{"frame", frame.token},
                       {"annotation", a.token},
                       {"class", to_string(a.cls)},
                       {"distance", ego_distance(frame, a.box)},
                       {"num_lidar_pts", a.num_lidar_pts_current},
                       {"verdict", to_string(verdicts[i])}});
      }
    }
  }
  return out;
}

std::string density_csv(const DensityReport& report) {
  std::ostringstream os;
  os << "bin_start,bin_end,class,avg_per_frame\n";
  for (const DensityBin& bin : report.bins) {
    const std::string prefix = format_number(bin.start) + "," + format_number(bin.end) + ",";
    for (const auto& [c, v] : bin.per_class) os << prefix << to_string(c) << "," << format_number(v) << "\n";
    os << prefix << "total," << format_number(bin.total) << "\n";
  }
  return os.str();
}

json audit_to_json(const Scene& scene, std::span<const AuditEntry> entries) {
  json frames = json::array();
  for (const AuditEntry& e : entries) {
    frames.push_back({{"frame", e.frame_token}, {"far_field_annotations", e.far_field_annotations}});
  }
  return {{"scene_id", scene.scene_id}, {"frames", frames}};
}

}  // namespace far3d
