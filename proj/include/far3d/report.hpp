#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "far3d/metrics.hpp"
#include "far3d/visibility.hpp"

namespace far3d {

struct MethodReport {
  std::string label;  // e.g. "lidar", "camera", "fused"
  EvalReport report;
};

nlohmann::json eval_config_to_json(const EvalConfig& cfg);

// Per method: config, per class x band results with counts and full PR curves, mAP per band.
nlohmann::json report_to_json(std::span<const MethodReport> methods);

// Rows = methods; columns = class x band AP, then mAP per band. Values are AP x 100, one decimal.
std::string report_markdown(std::span<const MethodReport> methods);

nlohmann::json zero_lidar_stats_to_json(const ZeroLidarStats& stats, CountMode mode, const DistanceBand& band);

// One record per annotation: frame, token, class, ego distance, point count, verdict.
nlohmann::json verdicts_to_json(const std::vector<Scene>& scenes, const OcclusionConfig& cfg);

// Header "bin_start,bin_end,class,avg_per_frame"; one row per bin and class plus a "total" row.
std::string density_csv(const DensityReport& report);

nlohmann::json audit_to_json(const Scene& scene, std::span<const AuditEntry> entries);

}  // namespace far3d
