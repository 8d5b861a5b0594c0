#include "far3d/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "far3d/error.hpp"

namespace far3d {

double thresh_linear(double d) { return d / 12.5; }

double thresh_quadratic(double d) { return 0.25 + 0.0125 * d + 0.00125 * (d * d); }

bool elliptical_match(const Vec2& pred_ego, const Vec2& gt_ego) {
  const double dx = pred_ego.x - gt_ego.x;
  const double dy = pred_ego.y - gt_ego.y;
  const double lhs = 312.5 * dx * dx + 78.125 * dy * dy;
  const double r2 = gt_ego.x * gt_ego.x + gt_ego.y * gt_ego.y;
  if (r2 == 0.0) return lhs == 0.0;
  return lhs <= r2;
}

std::optional<ThresholdScheme> ThresholdScheme::parse(std::string_view name) {
  if (name == "default") return default_set();
  if (name == "linear") return linear();
  if (name == "quadratic") return quadratic();
  if (name == "elliptical") return elliptical();
  if (name == "fixed4") return fixed(4.0);
  if (name.starts_with("fixed:")) {
    try {
      std::size_t used = 0;
      const std::string num(name.substr(6));
      const double t = std::stod(num, &used);
      if (used == num.size() && t > 0.0 && std::isfinite(t)) return fixed(t);
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

std::string ThresholdScheme::name() const {
  switch (kind) {
    case SchemeKind::DefaultSet: return "default";
    case SchemeKind::Linear: return "linear";
    case SchemeKind::Quadratic: return "quadratic";
    case SchemeKind::Elliptical: return "elliptical";
    case SchemeKind::Fixed: {
      if (fixed_threshold == 4.0) return "fixed4";
      std::ostringstream os;
      os.precision(17);
      os << "fixed:" << fixed_threshold;
      return os.str();
    }
  }
  return "unknown";
}

void ThresholdScheme::validate() const {
  if (kind == SchemeKind::Fixed && !(fixed_threshold > 0.0)) throw std::invalid_argument("fixed threshold must be > 0");
  if (kind == SchemeKind::DefaultSet) {
    if (default_thresholds.empty()) throw std::invalid_argument("default threshold set is empty");
    for (std::size_t i = 0; i < default_thresholds.size(); ++i) {
      if (!(default_thresholds[i] > 0.0) || (i > 0 && !(default_thresholds[i] > default_thresholds[i - 1]))) {
        throw std::invalid_argument("default thresholds must be positive and strictly increasing");
      }
    }
  }
}

bool Matcher::accepts(const Box3D& pred_ego, const Box3D& gt_ego) const {
  const double gt_distance = std::hypot(gt_ego.center.x, gt_ego.center.y);
  switch (kind) {
    case SchemeKind::Fixed:
    case SchemeKind::DefaultSet: return center_distance_bev(pred_ego, gt_ego) <= fixed_threshold;
    case SchemeKind::Linear: return center_distance_bev(pred_ego, gt_ego) <= thresh_linear(gt_distance);
    case SchemeKind::Quadratic: return center_distance_bev(pred_ego, gt_ego) <= thresh_quadratic(gt_distance);
    case SchemeKind::Elliptical:
      return elliptical_match({pred_ego.center.x, pred_ego.center.y}, {gt_ego.center.x, gt_ego.center.y});
  }
  return false;
}

std::string Matcher::label() const {
  switch (kind) {
    case SchemeKind::Linear: return "linear";
    case SchemeKind::Quadratic: return "quadratic";
    case SchemeKind::Elliptical: return "elliptical";
    default: {
      std::ostringstream os;
      os << fixed_threshold << "m";
      return os.str();
    }
  }
}

std::vector<Matcher> matchers_for(const ThresholdScheme& scheme) {
  if (scheme.kind == SchemeKind::DefaultSet) {
    std::vector<Matcher> out;
    for (double t : scheme.default_thresholds) out.push_back({SchemeKind::Fixed, t});
    return out;
  }
  return {match_tolerance(scheme.kind, scheme.fixed_threshold)};
}

Matcher match_tolerance(SchemeKind kind, double fixed_threshold) {
  if (kind == SchemeKind::DefaultSet) kind = SchemeKind::Fixed;
  return {kind, fixed_threshold};
}

MatchResult greedy_match(std::span<const Detection> dets, std::span<const Annotation> gts, const Matcher& matcher) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  MatchResult res;
  res.det_to_gt.assign(dets.size(), std::nullopt);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t di : order) {
    std::optional<std::size_t> best;
    double best_dist = 0.0;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (taken[gi] || !matcher.accepts(dets[di].box, gts[gi].box)) continue;
      const double dist = center_distance_bev(dets[di].box, gts[gi].box);
      if (!best || dist < best_dist) {
        best = gi;
        best_dist = dist;
      }
    }
    if (best) {
      taken[*best] = true;
      res.det_to_gt[di] = best;
    }
  }
  for (std::size_t gi = 0; gi < gts.size(); ++gi) {
    if (!taken[gi]) res.unmatched_gt.push_back(gi);
  }
  return res;
}

PRCurve build_pr_curve(std::span<const RankedLabel> ranked, int num_gt) {
  PRCurve curve;
  curve.num_gt = num_gt;
  curve.points.reserve(ranked.size());
  int tp = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i].tp) ++tp;
    const double recall = num_gt > 0 ? static_cast<double>(tp) / num_gt : 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(i + 1);
    curve.points.push_back({recall, precision, ranked[i].score});
  }
  return curve;
}

std::string_view to_string(ApMode m) { return m == ApMode::FullArea ? "full-area" : "nuscenes"; }

std::optional<ApMode> parse_ap_mode(std::string_view name) {
  if (name == "full-area") return ApMode::FullArea;
  if (name == "nuscenes") return ApMode::NuScenesNormalized;
  return std::nullopt;
}

std::optional<double> average_precision(const PRCurve& curve, ApMode mode) {
  if (curve.num_gt <= 0) return std::nullopt;
  const auto& pts = curve.points;
  // Precision envelope: best precision at this operating point or any later one.
  std::vector<double> envelope(pts.size());
  double best = 0.0;
  for (std::size_t i = pts.size(); i-- > 0;) {
    best = std::max(best, pts[i].precision);
    envelope[i] = best;
  }
  const int first = mode == ApMode::FullArea ? 0 : static_cast<int>(std::lround(kMinRecall * 100));
  double sum = 0.0;
  std::size_t cursor = 0;
  for (int i = first; i <= 100; ++i) {
    const double r = i / 100.0;
    while (cursor < pts.size() && pts[cursor].recall < r) ++cursor;
    const double p = cursor < pts.size() ? envelope[cursor] : 0.0;
    sum += mode == ApMode::FullArea ? p : std::max(0.0, p - kMinPrecision) / (1.0 - kMinPrecision);
  }
  return sum / static_cast<double>(101 - first);
}

void EvalConfig::validate() const {
  scheme.validate();
  occlusion.validate();
  if (bands.empty()) throw std::invalid_argument("at least one distance band is required");
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (!(bands[i].min_m >= 0.0 && bands[i].min_m < bands[i].max_m)) {
      throw std::invalid_argument("band " + bands[i].label() + " must satisfy 0 <= min < max");
    }
    if (i > 0 && bands[i].min_m < bands[i - 1].max_m) {
      throw std::invalid_argument("bands must be sorted and non-overlapping");
    }
    if (bands[i].max_m > max_range) throw std::invalid_argument("band " + bands[i].label() + " exceeds max_range");
  }
  if (classes.empty()) throw std::invalid_argument("at least one class is required");
}

std::map<ClassId, double> legacy_class_ranges() {
  return {{ClassId::Car, 50.0},        {ClassId::Truck, 50.0},   {ClassId::Bus, 50.0},
          {ClassId::Trailer, 50.0},    {ClassId::ConstructionVehicle, 50.0},
          {ClassId::Pedestrian, 40.0}, {ClassId::Motorcycle, 40.0}, {ClassId::Bicycle, 40.0},
          {ClassId::TrafficCone, 30.0}, {ClassId::Barrier, 30.0}};
}

const ClassBandResult* EvalReport::find(ClassId cls, std::size_t band_index) const {
  for (const auto& r : results) {
    if (r.cls == cls && r.band_index == band_index) return &r;
  }
  return nullptr;
}

std::optional<double> EvalReport::ap(ClassId cls, std::size_t band_index) const {
  const auto* r = find(cls, band_index);
  return r ? r->ap : std::nullopt;
}

namespace {

struct EgoFrame {
  std::vector<Annotation> gts;  // boxes in the ego frame
  std::vector<double> gt_dist;
  std::vector<Detection> dets;  // boxes in the ego frame
  std::vector<double> det_dist;
};

struct RankedDet {
  double score;
  std::size_t frame;
  std::size_t index;
  bool tp;
};

bool in_range(const EvalConfig& cfg, ClassId c, double d) {
  if (d > cfg.max_range) return false;
  if (cfg.per_class_legacy_ranges) {
    const auto it = cfg.per_class_legacy_ranges->find(c);
    if (it != cfg.per_class_legacy_ranges->end() && d > it->second) return false;
  }
  return true;
}

ClassBandResult evaluate_class_band(const std::vector<EgoFrame>& frames, const EvalConfig& cfg, ClassId cls,
                                    std::size_t band_index) {
  const DistanceBand& band = cfg.bands[band_index];
  const auto matchers = matchers_for(cfg.scheme);
  ClassBandResult out;
  out.cls = cls;
  out.band_index = band_index;

  std::vector<std::vector<RankedDet>> ranked(matchers.size());
  std::vector<Annotation> gts;
  std::vector<Detection> dets;
  std::vector<std::size_t> det_index;
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const EgoFrame& f = frames[fi];
    gts.clear();
    dets.clear();
    det_index.clear();
    for (std::size_t i = 0; i < f.gts.size(); ++i) {
      if (f.gts[i].cls == cls && band.contains(f.gt_dist[i]) && in_range(cfg, cls, f.gt_dist[i])) gts.push_back(f.gts[i]);
    }
    for (std::size_t i = 0; i < f.dets.size(); ++i) {
      if (f.dets[i].cls == cls && band.contains(f.det_dist[i]) && in_range(cfg, cls, f.det_dist[i])) {
        dets.push_back(f.dets[i]);
        det_index.push_back(i);
      }
    }
    out.num_gt += static_cast<int>(gts.size());
    out.num_dets += static_cast<int>(dets.size());
    for (std::size_t m = 0; m < matchers.size(); ++m) {
      const MatchResult mr = greedy_match(dets, gts, matchers[m]);
      for (std::size_t k = 0; k < dets.size(); ++k) {
        ranked[m].push_back({dets[k].score, fi, det_index[k], mr.det_to_gt[k].has_value()});
      }
    }
  }

  double ap_sum = 0.0;
  bool have_ap = out.num_gt > 0;
  for (std::size_t m = 0; m < matchers.size(); ++m) {
    auto& r = ranked[m];
    std::stable_sort(r.begin(), r.end(), [](const RankedDet& a, const RankedDet& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.frame != b.frame) return a.frame < b.frame;
      return a.index < b.index;
    });
    std::vector<RankedLabel> labels;
    labels.reserve(r.size());
    ThresholdResult tr;
    tr.label = matchers[m].label();
    for (const RankedDet& d : r) {
      labels.push_back({d.score, d.tp});
      (d.tp ? tr.tp : tr.fp) += 1;
    }
    tr.fn = out.num_gt - tr.tp;
    tr.curve = build_pr_curve(labels, out.num_gt);
    tr.ap = average_precision(tr.curve, cfg.ap_mode);
    if (tr.ap) ap_sum += *tr.ap;
    out.per_threshold.push_back(std::move(tr));
  }
  if (have_ap) out.ap = ap_sum / static_cast<double>(matchers.size());
  return out;
}

}  // namespace

EvalReport evaluate(const DetectionMap& dets, const std::vector<Scene>& scenes, const EvalConfig& cfg) {
  cfg.validate();
  return evaluate(dets, scenes, build_eval_gt(scenes, cfg.gt_mode, cfg.occlusion), cfg);
}

EvalReport evaluate(const DetectionMap& dets, const std::vector<Scene>& scenes, const EvalGroundTruth& gt,
                    const EvalConfig& cfg) {
  cfg.validate();
  std::set<std::string> known;
  for (const Scene& s : scenes) {
    for (const Frame& f : s.frames) known.insert(f.token);
  }
  std::vector<std::string> unknown;
  for (const auto& [token, list] : dets) {
    if (!known.contains(token)) unknown.push_back(token);
  }
  if (!unknown.empty()) {
    std::string msg = "detections reference unknown frame tokens:";
    for (const auto& t : unknown) msg += " " + t;
    throw ValidationError(msg);
  }

  std::vector<EgoFrame> frames;
  for (const Scene& s : scenes) {
    for (const Frame& f : s.frames) {
      EgoFrame ef;
      if (const auto it = gt.find(f.token); it != gt.end()) {
        for (const Annotation& a : it->second) {
          Annotation e = a;
          e.box = to_ego_frame(f, a.box);
          ef.gt_dist.push_back(std::hypot(e.box.center.x, e.box.center.y));
          ef.gts.push_back(std::move(e));
        }
      }
      if (const auto it = dets.find(f.token); it != dets.end()) {
        for (const Detection& d : it->second) {
          Detection e = d;
          e.box = to_ego_frame(f, d.box);
          ef.det_dist.push_back(std::hypot(e.box.center.x, e.box.center.y));
          ef.dets.push_back(std::move(e));
        }
      }
      frames.push_back(std::move(ef));
    }
  }

  EvalReport report;
  report.config = cfg;
  const std::size_t n_tasks = cfg.classes.size() * cfg.bands.size();
  report.results.resize(n_tasks);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t t = next++; t < n_tasks; t = next++) {
      report.results[t] = evaluate_class_band(frames, cfg, cfg.classes[t / cfg.bands.size()], t % cfg.bands.size());
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_threads = std::min<std::size_t>(n_tasks, cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads) : hw);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }

  for (std::size_t b = 0; b < cfg.bands.size(); ++b) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : report.results) {
      if (r.band_index == b && r.ap) {
        sum += *r.ap;
        ++n;
      }
    }
    report.map_per_band.push_back(n > 0 ? std::optional<double>(sum / n) : std::nullopt);
  }
  return report;
}

}  // namespace far3d
