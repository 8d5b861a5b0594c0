#include "far3d/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "far3d/error.hpp"

namespace far3d {

namespace {

std::vector<std::size_t> ranked_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

std::vector<Detection> ranked(std::vector<Detection> dets) {
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
  return dets;
}

// Greedy suppression; `limit(kept, candidate)` is the IoU a pair may reach and still coexist.
template <typename Limit>
std::vector<Detection> suppress(std::span<const Detection> dets, IouKind kind, Limit&& limit) {
  std::vector<Detection> kept;
  for (std::size_t i : ranked_order(dets)) {
    const Detection& cand = dets[i];
    const bool dropped = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.cls == cand.cls && detection_iou(k.box, cand.box, kind) > limit(k, cand);
    });
    if (!dropped) kept.push_back(cand);
  }
  return kept;
}

Detection tag_fused(Detection d) {
  if (d.modality != Modality::Fused) {
    d.provenance = d.modality;
    d.modality = Modality::Fused;
  }
  return d;
}

std::vector<Detection> tag_all(std::vector<Detection> dets) {
  for (auto& d : dets) d = tag_fused(std::move(d));
  return dets;
}

}  // namespace

double detection_iou(const Box3D& a, const Box3D& b, IouKind kind) {
  return kind == IouKind::Bev ? rotated_iou_bev(a, b) : iou_3d(a, b);
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold, IouKind kind) {
  return suppress(dets, kind, [&](const Detection&, const Detection&) { return iou_threshold; });
}

void AdaNmsConfig::validate() const {
  if (!(d1 < d2)) throw std::invalid_argument("AdaNMS requires d1 < d2");
  if (!(c1 > 0.0 && c1 <= 1.0 && c2 > 0.0 && c2 <= 1.0)) throw std::invalid_argument("AdaNMS thresholds must be in (0, 1]");
}

double adanms_threshold(double d, const AdaNmsConfig& cfg) {
  const double raw = (d - cfg.d1) * ((cfg.c2 - cfg.c1) / (cfg.d2 - cfg.d1)) + cfg.c1;
  return std::clamp(raw, std::min(cfg.c1, cfg.c2), std::max(cfg.c1, cfg.c2));
}

std::vector<Detection> adanms(std::span<const Detection> dets, const AdaNmsConfig& cfg, const Pose& ego_pose,
                              IouKind kind) {
  cfg.validate();
  return suppress(dets, kind, [&](const Detection& k, const Detection& c) {
    return adanms_threshold((ego_distance(ego_pose, k.box) + ego_distance(ego_pose, c.box)) / 2.0, cfg);
  });
}

std::vector<Detection> ScoreCalibration::apply(std::span<const Detection> camera) const {
  std::vector<Detection> out(camera.begin(), camera.end());
  for (Detection& d : out) {
    if (const auto it = camera_affine.find(d.cls); it != camera_affine.end()) {
      d.score = std::clamp(it->second.first * d.score + it->second.second, 0.0, 1.0);
    }
  }
  return out;
}

std::vector<Detection> nms_fusion(std::span<const Detection> lidar, std::span<const Detection> camera,
                                  const NmsFusionOptions& opts, const Pose& ego_pose) {
  std::vector<Detection> pool(lidar.begin(), lidar.end());
  for (Detection& d : opts.calibration.apply(camera)) pool.push_back(std::move(d));
  pool = tag_all(std::move(pool));
  if (opts.iou_threshold) return nms(pool, *opts.iou_threshold, opts.iou_kind);
  return adanms(pool, opts.ada, ego_pose, opts.iou_kind);
}

double DistanceFusionConfig::gate(ClassId c) const {
  const auto it = t_c.find(c);
  return it == t_c.end() ? default_t_c : it->second;
}

std::vector<Detection> distance_fusion(std::span<const Detection> lidar, std::span<const Detection> far,
                                       const DistanceFusionConfig& cfg, const Pose& ego_pose) {
  std::vector<Detection> out;
  for (const Detection& d : lidar) {
    if (ego_distance(ego_pose, d.box) < cfg.gate(d.cls)) out.push_back(tag_fused(d));
  }
  for (const Detection& d : far) {
    if (ego_distance(ego_pose, d.box) >= cfg.gate(d.cls)) out.push_back(tag_fused(d));
  }
  return ranked(std::move(out));
}

double bayes_combine(double s_lidar, double s_camera) {
  const double joint = s_lidar * s_camera;
  const double denom = joint + (1.0 - s_lidar) * (1.0 - s_camera);
  if (denom <= 0.0) return 0.5;  // one detector certain yes, the other certain no
  return joint / denom;
}

std::vector<Detection> bayes_score_fusion(std::span<const Detection> lidar, std::span<const Detection> camera,
                                          double pair_iou_threshold) {
  struct Pair {
    double iou;
    std::size_t li;
    std::size_t ci;
  };
  std::vector<Pair> pairs;
  for (std::size_t li = 0; li < lidar.size(); ++li) {
    for (std::size_t ci = 0; ci < camera.size(); ++ci) {
      if (lidar[li].cls != camera[ci].cls) continue;
      const double iou = rotated_iou_bev(lidar[li].box, camera[ci].box);
      if (iou > pair_iou_threshold) pairs.push_back({iou, li, ci});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.iou > b.iou; });
  std::vector<std::optional<double>> combined(lidar.size());
  std::vector<bool> camera_used(camera.size(), false);
  for (const Pair& p : pairs) {
    if (combined[p.li] || camera_used[p.ci]) continue;
    combined[p.li] = bayes_combine(lidar[p.li].score, camera[p.ci].score);
    camera_used[p.ci] = true;
  }
  std::vector<Detection> out;
  for (std::size_t li = 0; li < lidar.size(); ++li) {
    Detection d = tag_fused(lidar[li]);
    if (combined[li]) d.score = *combined[li];
    out.push_back(std::move(d));
  }
  for (std::size_t ci = 0; ci < camera.size(); ++ci) {
    if (!camera_used[ci]) out.push_back(tag_fused(camera[ci]));
  }
  return ranked(std::move(out));
}

std::vector<ClocsEntry> clocs_features(std::span<const Detection> lidar, std::span<const Detection> camera,
                                       const Pose& ego_pose) {
  std::vector<ClocsEntry> out;
  for (std::size_t i = 0; i < lidar.size(); ++i) {
    for (std::size_t j = 0; j < camera.size(); ++j) {
      if (lidar[i].cls != camera[j].cls) continue;
      const double iou = iou_3d(lidar[i].box, camera[j].box);
      if (!(iou > 0.0)) continue;
      out.push_back({i, j,
                     {iou, lidar[i].score, camera[j].score, center_distance_3d(lidar[i].box, camera[j].box),
                      ego_distance(ego_pose, camera[j].box)}});
    }
  }
  return out;
}

double LogisticScorer::operator()(const ClocsFeature& f) const {
  const double z = w[0] * f.iou3d + w[1] * f.s_i + w[2] * f.s_j + w[3] * (-f.d_ij / 10.0) + w[4] * (f.d_j / 80.0) + b;
  return 1.0 / (1.0 + std::exp(-z));
}

std::vector<Detection> clocs_score(std::span<const Detection> lidar, std::span<const ClocsEntry> features,
                                   const ClocsScorer& scorer) {
  std::vector<const ClocsEntry*> best(lidar.size(), nullptr);
  for (const ClocsEntry& e : features) {
    if (e.lidar_index >= lidar.size()) throw std::out_of_range("CLOCs feature references a missing lidar detection");
    const ClocsEntry*& slot = best[e.lidar_index];
    if (!slot || e.feature.iou3d > slot->feature.iou3d) slot = &e;
  }
  std::vector<Detection> out;
  for (std::size_t i = 0; i < lidar.size(); ++i) {
    Detection d = tag_fused(lidar[i]);
    if (best[i]) d.score = std::clamp(scorer(best[i]->feature), 0.0, 1.0);
    out.push_back(std::move(d));
  }
  return out;
}

std::string_view to_string(FusionMethod m) {
  switch (m) {
    case FusionMethod::Nms: return "nms";
    case FusionMethod::AdaNms: return "adanms";
    case FusionMethod::Distance: return "distance";
    case FusionMethod::Bayes: return "bayes";
    case FusionMethod::Clocs: return "clocs";
  }
  return "unknown";
}

std::optional<FusionMethod> parse_fusion_method(std::string_view name) {
  for (FusionMethod m : {FusionMethod::Nms, FusionMethod::AdaNms, FusionMethod::Distance, FusionMethod::Bayes,
                         FusionMethod::Clocs}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

DetectionMap fuse(const DetectionMap& lidar, const DetectionMap& camera, const std::vector<Scene>& scenes,
                  const FusionOptions& opts) {
  std::map<std::string, Pose> poses;
  for (const Scene& s : scenes) {
    for (const Frame& f : s.frames) poses.emplace(f.token, f.ego_pose);
  }
  std::vector<std::string> tokens;
  for (const auto& [t, _] : lidar) tokens.push_back(t);
  for (const auto& [t, _] : camera) {
    if (!lidar.contains(t)) tokens.push_back(t);
  }
  std::sort(tokens.begin(), tokens.end());

  const std::vector<Detection> none;
  DetectionMap out;
  for (const std::string& token : tokens) {
    const auto pose_it = poses.find(token);
    if (pose_it == poses.end()) throw ValidationError("frame " + token + " has detections but no ego pose in the scene file");
    const Pose& ego = pose_it->second;
    const auto li = lidar.find(token);
    const auto ci = camera.find(token);
    const std::vector<Detection>& l = li == lidar.end() ? none : li->second;
    const std::vector<Detection>& c = ci == camera.end() ? none : ci->second;

    NmsFusionOptions plain{opts.nms_iou, opts.ada, opts.iou_kind, opts.calibration};
    NmsFusionOptions ada{std::nullopt, opts.ada, opts.iou_kind, opts.calibration};
    std::vector<Detection> fused;
    switch (opts.method) {
      case FusionMethod::Nms: fused = nms_fusion(l, c, plain, ego); break;
      case FusionMethod::AdaNms: fused = nms_fusion(l, c, ada, ego); break;
      case FusionMethod::Distance: {
        std::vector<Detection> far;
        switch (opts.distance.far_source) {
          case FarSource::NmsFused: far = nms_fusion(l, c, plain, ego); break;
          case FarSource::AdaNmsFused: far = nms_fusion(l, c, ada, ego); break;
          case FarSource::CameraOnly: far = tag_all(opts.calibration.apply(c)); break;
        }
        fused = distance_fusion(l, far, opts.distance, ego);
        break;
      }
      case FusionMethod::Bayes: fused = bayes_score_fusion(l, opts.calibration.apply(c), opts.bayes_pair_iou); break;
      case FusionMethod::Clocs: {
        const auto cam = opts.calibration.apply(c);
        fused = ranked(clocs_score(l, clocs_features(l, cam, ego), opts.scorer));
        break;
      }
    }
    out[token] = std::move(fused);
  }
  return out;
}

}  // namespace far3d
