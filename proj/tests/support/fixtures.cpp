#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "far3d/metrics.hpp"

namespace fixtures {

using namespace far3d;

CameraModel forward_camera(double fx) {
  CameraModel cam;
  cam.id = "CAM_FRONT";
  cam.fx = cam.fy = fx;
  cam.cx = 800.0;
  cam.cy = 450.0;
  cam.image_width = 1600.0;
  cam.image_height = 900.0;
  cam.extrinsic = camera_from_ego_looking({0.0, 0.0, 1.5}, std::numbers::pi / 2.0);
  return cam;
}

Frame frame_at(const std::string& token, const Pose& ego) {
  Frame f;
  f.token = token;
  f.timestamp_us = 1'000'000;
  f.ego_pose = ego;
  return f;
}

EvalCase random_eval_case(std::mt19937_64& rng, const std::vector<ClassId>& classes) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> n_frames(1, 3);
  std::uniform_int_distribution<int> n_gt(0, 10);
  std::uniform_int_distribution<int> n_det(0, 20);
  const double pi = std::numbers::pi;

  EvalCase out;
  Scene scene;
  scene.scene_id = "case";
  const int frames = n_frames(rng);
  for (int fi = 0; fi < frames; ++fi) {
    const double ex = -100.0 + 200.0 * u01(rng);
    const double ey = -100.0 + 200.0 * u01(rng);
    const double heading = -pi + 2.0 * pi * u01(rng);
    Frame frame = frame_at("f" + std::to_string(fi), Pose::from_yaw({ex, ey, 0.0}, heading));
    frame.timestamp_us = 1'000'000 + fi * 500'000;
    oracle::OracleFrame of{ex, ey, heading, {}, {}};
    auto& dets = out.dets[frame.token];
    for (ClassId cls : classes) {
      std::vector<Vec3> centers;
      const int g = n_gt(rng);
      for (int i = 0; i < g; ++i) {
        const double r = 85.0 * std::sqrt(u01(rng));
        const double th = -pi + 2.0 * pi * u01(rng);
        const Vec3 c{ex + r * std::cos(th), ey + r * std::sin(th), 0.8};
        centers.push_back(c);
        Annotation a = ann(frame.token + "-" + std::string(to_string(cls)) + "-" + std::to_string(i),
                           box(c.x, c.y, c.z, 4.0, 2.0, 1.6, -pi + 2.0 * pi * u01(rng)), cls);
        frame.annotations.push_back(a);
        of.gts.push_back(a);
      }
      const int d = n_det(rng);
      for (int i = 0; i < d; ++i) {
        Vec3 c;
        if (!centers.empty() && u01(rng) < 0.7) {
          const Vec3& g0 = centers[static_cast<std::size_t>(u01(rng) * centers.size()) % centers.size()];
          const double r = std::hypot(g0.x - ex, g0.y - ey);
          std::normal_distribution<double> noise(0.0, 0.3 + r / 25.0);
          c = {g0.x + noise(rng), g0.y + noise(rng), g0.z};
        } else {
          const double r = 85.0 * std::sqrt(u01(rng));
          const double th = -pi + 2.0 * pi * u01(rng);
          c = {ex + r * std::cos(th), ey + r * std::sin(th), 0.8};
        }
        double score = u01(rng);
        if (u01(rng) < 0.3) score = std::round(score * 10.0) / 10.0;
        Detection det_ = det(box(c.x, c.y, c.z, 4.0, 2.0, 1.6, -pi + 2.0 * pi * u01(rng)), score, cls);
        dets.push_back(det_);
        of.dets.push_back(det_);
      }
    }
    scene.frames.push_back(std::move(frame));
    out.frames.push_back(std::move(of));
  }
  out.scenes.push_back(std::move(scene));
  return out;
}

OracleComparison compare_with_oracle(const EvalCase& c, const EvalConfig& cfg) {
  OracleComparison out;
  const auto passes = oracle::passes_for(cfg.scheme);
  const auto matchers = matchers_for(cfg.scheme);
  const Scene& scene = c.scenes.front();

  // Per-frame greedy labels.
  for (std::size_t fi = 0; fi < scene.frames.size(); ++fi) {
    const Frame& frame = scene.frames[fi];
    const oracle::OracleFrame& of = c.frames[fi];
    const auto dit = c.dets.find(frame.token);
    const std::vector<Detection> none;
    const std::vector<Detection>& all = dit == c.dets.end() ? none : dit->second;
    for (ClassId cls : cfg.classes) {
      for (const DistanceBand& band : cfg.bands) {
        const auto keep = [&](double d) { return band.contains(d) && d <= cfg.max_range; };
        std::vector<Annotation> gts;
        std::vector<oracle::Planar> ogts;
        for (const Annotation& a : frame.annotations) {
          if (a.cls != cls) continue;
          const oracle::Planar p = oracle::to_ego(of.ego_x, of.ego_y, of.heading, a.box.center.x, a.box.center.y);
          if (!keep(std::hypot(p.x, p.y))) continue;
          Annotation e = a;
          e.box = to_ego_frame(frame, a.box);
          gts.push_back(e);
          ogts.push_back(p);
        }
        std::vector<Detection> dets;
        std::vector<oracle::Candidate> odets;
        for (const Detection& d : all) {
          if (d.cls != cls) continue;
          const oracle::Planar p = oracle::to_ego(of.ego_x, of.ego_y, of.heading, d.box.center.x, d.box.center.y);
          if (!keep(std::hypot(p.x, p.y))) continue;
          Detection e = d;
          e.box = to_ego_frame(frame, d.box);
          dets.push_back(e);
          odets.push_back({p, d.score});
        }
        for (std::size_t m = 0; m < matchers.size(); ++m) {
          const MatchResult mr = greedy_match(dets, gts, matchers[m]);
          const auto labels = oracle::greedy(odets, ogts, passes[m]);
          for (std::size_t k = 0; k < dets.size(); ++k) {
            const int lib = mr.det_to_gt[k] ? static_cast<int>(*mr.det_to_gt[k]) : -1;
            out.label_mismatches += lib != labels[k] ? 1 : 0;
            ++out.checked_labels;
          }
        }
      }
    }
  }

  // Whole-pipeline ranked labels and AP.
  EvalConfig ecfg = cfg;
  ecfg.gt_mode = GtMode::IncludeAll;
  const EvalReport report = evaluate(c.dets, c.scenes, ecfg);
  for (ClassId cls : cfg.classes) {
    for (std::size_t b = 0; b < cfg.bands.size(); ++b) {
      const auto ref = oracle::evaluate(c.frames, cls, cfg.bands[b].min_m, cfg.bands[b].max_m, cfg.max_range, passes,
                                        cfg.ap_mode);
      const ClassBandResult* r = report.find(cls, b);
      if (!r || r->num_gt != ref.num_gt || r->per_threshold.size() != ref.ranked_tp.size()) {
        ++out.label_mismatches;
        continue;
      }
      for (std::size_t m = 0; m < ref.ranked_tp.size(); ++m) {
        const auto& pts = r->per_threshold[m].curve.points;
        const auto& tp = ref.ranked_tp[m];
        if (pts.size() != tp.size()) {
          ++out.label_mismatches;
          continue;
        }
        double prev_recall = 0.0;
        for (std::size_t k = 0; k < pts.size(); ++k) {
          const bool lib_tp = pts[k].recall > prev_recall;
          prev_recall = pts[k].recall;
          out.label_mismatches += lib_tp != tp[k] ? 1 : 0;
          ++out.checked_labels;
        }
      }
      if (r->ap.has_value() != ref.ap.has_value()) {
        ++out.ap_presence_mismatches;
      } else if (r->ap) {
        out.max_ap_error = std::max(out.max_ap_error, std::abs(*r->ap - *ref.ap));
      }
    }
  }
  return out;
}

std::vector<Detection> random_detections(std::mt19937_64& rng, int max_count, const Vec3& around, double spread) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int n = std::uniform_int_distribution<int>(0, max_count)(rng);
  const int clusters = std::max(1, n / 4);
  std::vector<Vec3> centers;
  for (int k = 0; k < clusters; ++k) {
    centers.push_back({around.x + spread * (2.0 * u01(rng) - 1.0), around.y + spread * (2.0 * u01(rng) - 1.0), 0.8});
  }
  std::vector<Detection> out;
  for (int i = 0; i < n; ++i) {
    const Vec3& c = centers[static_cast<std::size_t>(u01(rng) * clusters) % centers.size()];
    const double l = 1.0 + 4.0 * u01(rng);
    const double w = 0.8 + 1.5 * u01(rng);
    const Box3D b = box(c.x + 1.5 * (2.0 * u01(rng) - 1.0), c.y + 1.5 * (2.0 * u01(rng) - 1.0), 0.8 + 0.2 * u01(rng), l,
                        w, 1.5, normalize_angle(-std::numbers::pi + 2.0 * std::numbers::pi * u01(rng)));
    const ClassId cls = u01(rng) < 0.7 ? ClassId::Car : ClassId::Pedestrian;
    const Modality m = u01(rng) < 0.5 ? Modality::Lidar : Modality::Camera;
    double score = u01(rng);
    if (u01(rng) < 0.2) score = std::round(score * 10.0) / 10.0;
    out.push_back(det(b, score, cls, m));
  }
  return out;
}

}  // namespace fixtures
