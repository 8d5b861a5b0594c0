#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "far3d/error.hpp"
#include "far3d/fusion.hpp"
#include "fixtures.hpp"

using namespace far3d;
using fixtures::box;
using fixtures::det;

namespace {

const Pose kEgo = Pose::from_yaw({}, 0.0);

bool same_box(const Box3D& a, const Box3D& b) { return a == b; }

bool contains_box(const std::vector<Detection>& pool, const Box3D& b) {
  for (const auto& d : pool) {
    if (same_box(d.box, b)) return true;
  }
  return false;
}

std::vector<Detection> only(const std::vector<Detection>& dets, Modality m) {
  std::vector<Detection> out;
  for (const auto& d : dets) {
    if (d.modality == m) out.push_back(d);
  }
  return out;
}

}  // namespace

TEST(Nms, DisjointAllKept) {
  const std::vector<Detection> in{det(box(0, 0, 0, 1, 1, 1), 0.3), det(box(5, 0, 0, 1, 1, 1), 0.9),
                                  det(box(10, 0, 0, 1, 1, 1), 0.5)};
  const auto out = nms(in, 0.2);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].score, 0.9);
  EXPECT_EQ(out[2].score, 0.3);
}

TEST(Nms, CoincidentKeepsHigherScore) {
  const std::vector<Detection> in{det(box(0, 0, 0, 1, 1, 1), 0.3), det(box(0, 0, 0, 1, 1, 1), 0.8)};
  const auto out = nms(in, 0.2);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].score, 0.8);
}

TEST(Nms, ChainKeepsEnds) {
  // Offset s with (1 - s) / (1 + s) = 0.3 between neighbours; the ends do not overlap.
  const double s = 0.7 / 1.3;
  const Detection a = det(box(0, 0, 0, 1, 1, 1), 0.9);
  const Detection b = det(box(s, 0, 0, 1, 1, 1), 0.8);
  const Detection c = det(box(2 * s, 0, 0, 1, 1, 1), 0.7);
  ASSERT_NEAR(rotated_iou_bev(a.box, b.box), 0.3, 1e-12);
  ASSERT_NEAR(rotated_iou_bev(b.box, c.box), 0.3, 1e-12);
  ASSERT_EQ(rotated_iou_bev(a.box, c.box), 0.0);
  const auto out = nms(std::vector<Detection>{c, a, b}, 0.2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].box, a.box);
  EXPECT_EQ(out[1].box, c.box);
}

TEST(Nms, DifferentClassesDoNotSuppress) {
  const std::vector<Detection> in{det(box(0, 0, 0, 1, 1, 1), 0.9, ClassId::Car),
                                  det(box(0, 0, 0, 1, 1, 1), 0.8, ClassId::Pedestrian)};
  EXPECT_EQ(nms(in, 0.2).size(), 2u);
}

TEST(Nms, ThreeDimensionalIouSwitch) {
  // Same footprint, half-overlapping in height: BEV IoU 1, 3D IoU 1/3.
  const std::vector<Detection> in{det(box(0, 0, 0, 1, 1, 1), 0.9), det(box(0, 0, 0.5, 1, 1, 1), 0.8)};
  EXPECT_EQ(nms(in, 0.5, IouKind::Bev).size(), 1u);
  EXPECT_EQ(nms(in, 0.5, IouKind::ThreeD).size(), 2u);
}

TEST(AdaNmsThreshold, EndpointsMidpointAndClamp) {
  EXPECT_NEAR(adanms_threshold(10), 0.2, 1e-12);
  EXPECT_NEAR(adanms_threshold(70), 0.05, 1e-12);
  EXPECT_NEAR(adanms_threshold(40), 0.125, 1e-12);
  EXPECT_NEAR(adanms_threshold(60), 0.075, 1e-12);
  EXPECT_EQ(adanms_threshold(0), 0.2);
  EXPECT_EQ(adanms_threshold(95), 0.05);
  EXPECT_EQ(adanms_threshold(1e6), 0.05);
}

TEST(AdaNmsThreshold, NonIncreasingAndContinuous) {
  double prev = adanms_threshold(0.0);
  for (double d = 0.01; d < 120.0; d += 0.01) {
    const double t = adanms_threshold(d);
    EXPECT_LE(t, prev + 1e-15);
    EXPECT_LE(prev - t, 0.0025 * 0.01 + 1e-12);  // slope 0.0025 per metre
    prev = t;
  }
}

TEST(AdaNmsConfig, Validation) {
  EXPECT_THROW((AdaNmsConfig{70, 10, 0.2, 0.05}.validate()), std::invalid_argument);
  EXPECT_THROW((AdaNmsConfig{10, 70, 0.0, 0.05}.validate()), std::invalid_argument);
  EXPECT_NO_THROW(AdaNmsConfig{}.validate());
}

TEST(AdaNms, FarPairWithIouTenthSuppressed) {
  // Concentric boxes with area ratio 10 have IoU 0.1; the threshold at 60 m is 0.075.
  const std::vector<Detection> in{det(box(60, 0, 0, 1, 1, 1), 0.9), det(box(60, 0, 0, 5, 2, 1), 0.6)};
  ASSERT_NEAR(rotated_iou_bev(in[0].box, in[1].box), 0.1, 1e-12);
  const auto out = adanms(in, {}, kEgo);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].score, 0.9);
}

TEST(AdaNms, NearPairWithIouTenthKept) {
  const std::vector<Detection> in{det(box(10, 0, 0, 1, 1, 1), 0.9), det(box(10, 0, 0, 5, 2, 1), 0.6)};
  EXPECT_EQ(adanms(in, {}, kEgo).size(), 2u);
}

TEST(AdaNms, SingleDetectionUnchanged) {
  const std::vector<Detection> in{det(box(30, 4, 0, 4, 2, 1.5, 0.3), 0.42)};
  const auto out = adanms(in, {}, kEgo);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].box, in[0].box);
  EXPECT_EQ(out[0].score, in[0].score);
  EXPECT_EQ(out[0].modality, in[0].modality);
}

TEST(NmsFusion, EmptyCameraEqualsNmsOfLidar) {
  std::mt19937_64 rng(31);
  const auto lidar = only(fixtures::random_detections(rng, 30, {30, 0, 0}, 6), Modality::Lidar);
  NmsFusionOptions opts;
  opts.iou_threshold = 0.2;
  const auto fused = nms_fusion(lidar, {}, opts, kEgo);
  const auto plain = nms(lidar, 0.2);
  ASSERT_EQ(fused.size(), plain.size());
  for (std::size_t i = 0; i < fused.size(); ++i) {
    EXPECT_EQ(fused[i].box, plain[i].box);
    EXPECT_EQ(fused[i].score, plain[i].score);
    EXPECT_EQ(fused[i].modality, Modality::Fused);
    EXPECT_EQ(fused[i].provenance, Modality::Lidar);
  }
}

TEST(NmsFusion, CoincidentPairKeepsLidar) {
  const std::vector<Detection> lidar{det(box(20, 0, 0, 4, 2, 1.5), 0.9, ClassId::Car, Modality::Lidar)};
  const std::vector<Detection> camera{det(box(20, 0, 0, 4, 2, 1.5), 0.7, ClassId::Car, Modality::Camera)};
  for (bool ada : {false, true}) {
    NmsFusionOptions opts;
    if (!ada) opts.iou_threshold = 0.2;
    const auto out = nms_fusion(lidar, camera, opts, kEgo);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].score, 0.9);
    EXPECT_EQ(out[0].provenance, Modality::Lidar);
  }
}

TEST(NmsFusion, CalibrationRescalesCameraScores) {
  const std::vector<Detection> lidar{det(box(20, 0, 0, 4, 2, 1.5), 0.6, ClassId::Car, Modality::Lidar)};
  const std::vector<Detection> camera{det(box(20, 0, 0, 4, 2, 1.5), 0.5, ClassId::Car, Modality::Camera)};
  NmsFusionOptions opts;
  opts.iou_threshold = 0.2;
  opts.calibration.camera_affine[ClassId::Car] = {2.0, 0.0};
  const auto out = nms_fusion(lidar, camera, opts, kEgo);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].provenance, Modality::Camera);
  EXPECT_EQ(out[0].score, 1.0);
}

TEST(DistanceFusion, InfiniteGateGivesLidar) {
  std::mt19937_64 rng(32);
  const auto lidar = fixtures::random_detections(rng, 20, {40, 0, 0}, 40);
  const auto far = fixtures::random_detections(rng, 20, {40, 0, 0}, 40);
  DistanceFusionConfig cfg;
  cfg.default_t_c = std::numeric_limits<double>::infinity();
  const auto out = distance_fusion(lidar, far, cfg, kEgo);
  EXPECT_EQ(out.size(), lidar.size());
  for (const auto& d : out) EXPECT_TRUE(contains_box(lidar, d.box));
}

TEST(DistanceFusion, ZeroGateGivesFar) {
  std::mt19937_64 rng(33);
  const auto lidar = fixtures::random_detections(rng, 20, {40, 0, 0}, 40);
  const auto far = fixtures::random_detections(rng, 20, {40, 0, 0}, 40);
  DistanceFusionConfig cfg;
  cfg.default_t_c = 0.0;
  const auto out = distance_fusion(lidar, far, cfg, kEgo);
  EXPECT_EQ(out.size(), far.size());
  for (const auto& d : out) EXPECT_TRUE(contains_box(far, d.box));
}

TEST(DistanceFusion, BothSidesPresentAndBoundaryIsFar) {
  const std::vector<Detection> lidar{det(box(30, 0, 0, 4, 2, 1.5), 0.8), det(box(50, 0, 0, 4, 2, 1.5), 0.7)};
  const std::vector<Detection> far{det(box(60, 0, 0, 4, 2, 1.5), 0.6, ClassId::Car, Modality::Camera),
                                   det(box(50, 0, 0, 4, 2, 1.5), 0.5, ClassId::Car, Modality::Camera)};
  const auto out = distance_fusion(lidar, far, {}, kEgo);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].box.center.x, 30.0);
  EXPECT_EQ(out[1].box.center.x, 60.0);
  EXPECT_EQ(out[2].box.center.x, 50.0);
  EXPECT_EQ(out[2].provenance, Modality::Camera);
}

TEST(DistanceFusion, PerClassGate) {
  DistanceFusionConfig cfg;
  cfg.t_c[ClassId::Pedestrian] = 30.0;
  const std::vector<Detection> lidar{det(box(40, 0, 0, 1, 1, 1), 0.8, ClassId::Pedestrian),
                                     det(box(40, 0, 0, 4, 2, 1.5), 0.8, ClassId::Car)};
  const auto out = distance_fusion(lidar, {}, cfg, kEgo);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].cls, ClassId::Car);
}

TEST(Bayes, Examples) {
  EXPECT_EQ(bayes_combine(0.5, 0.5), 0.5);
  EXPECT_NEAR(bayes_combine(0.8, 0.8), 16.0 / 17.0, 1e-15);
  EXPECT_EQ(bayes_combine(0.0, 1.0), 0.5);  // contradictory certainties
  EXPECT_EQ(bayes_combine(1.0, 0.3), 1.0);
}

TEST(Bayes, Properties) {
  std::mt19937_64 rng(34);
  std::uniform_real_distribution<double> u(0.001, 0.999);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng), step = u(rng) * 1e-3;
    EXPECT_NEAR(bayes_combine(a, b), bayes_combine(b, a), 1e-15);
    EXPECT_NEAR(bayes_combine(a, 0.5), a, 1e-12);
    if (a > 0.5 && b > 0.5) EXPECT_GT(bayes_combine(a, b), std::max(a, b));
    if (a + step < 1.0) EXPECT_GE(bayes_combine(a + step, b), bayes_combine(a, b));
  }
}

TEST(BayesFusion, PairsAreRescoredAndUnpairedPassThrough) {
  const std::vector<Detection> lidar{det(box(20, 0, 0, 4, 2, 1.5), 0.8, ClassId::Car, Modality::Lidar),
                                     det(box(40, 10, 0, 4, 2, 1.5), 0.6, ClassId::Car, Modality::Lidar)};
  const std::vector<Detection> camera{det(box(20.3, 0.1, 0, 4.2, 2, 1.5), 0.8, ClassId::Car, Modality::Camera),
                                      det(box(70, 0, 0, 4, 2, 1.5), 0.4, ClassId::Car, Modality::Camera)};
  const auto out = bayes_score_fusion(lidar, camera);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].box, lidar[0].box);
  EXPECT_NEAR(out[0].score, 16.0 / 17.0, 1e-15);
  EXPECT_EQ(out[1].score, 0.6);
  EXPECT_EQ(out[2].box, camera[1].box);
  EXPECT_EQ(out[2].provenance, Modality::Camera);
}

TEST(BayesFusion, NoOverlapGivesUnion) {
  const std::vector<Detection> lidar{det(box(20, 0, 0, 4, 2, 1.5), 0.8)};
  const std::vector<Detection> camera{det(box(20, 30, 0, 4, 2, 1.5), 0.7, ClassId::Car, Modality::Camera),
                                      det(box(20, 0, 0, 4, 2, 1.5), 0.7, ClassId::Truck, Modality::Camera)};
  const auto out = bayes_score_fusion(lidar, camera);
  ASSERT_EQ(out.size(), 3u);
  for (const auto& d : out) EXPECT_TRUE(d.score == 0.8 || d.score == 0.7);
}

TEST(Clocs, DisjointSetsGiveEmptyTensor) {
  const std::vector<Detection> lidar{det(box(20, 0, 0, 4, 2, 1.5), 0.8)};
  const std::vector<Detection> camera{det(box(20, 10, 0, 4, 2, 1.5), 0.7, ClassId::Car, Modality::Camera)};
  EXPECT_TRUE(clocs_features(lidar, camera, kEgo).empty());
}

TEST(Clocs, CoincidentPairFeature) {
  const std::vector<Detection> lidar{det(box(60, 0, 0.8, 4, 2, 1.5), 0.9)};
  const std::vector<Detection> camera{det(box(60, 0, 0.8, 4, 2, 1.5), 0.7, ClassId::Car, Modality::Camera)};
  const auto t = clocs_features(lidar, camera, kEgo);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].feature.iou3d, 1.0);
  EXPECT_EQ(t[0].feature.s_i, 0.9);
  EXPECT_EQ(t[0].feature.s_j, 0.7);
  EXPECT_EQ(t[0].feature.d_ij, 0.0);
  EXPECT_NEAR(t[0].feature.d_j, 60.0, 1e-12);
}

TEST(Clocs, DistancesRecomputedIndependently) {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 100; ++trial) {
    const auto all = fixtures::random_detections(rng, 24, {35, -5, 0}, 5);
    const auto lidar = only(all, Modality::Lidar);
    const auto camera = only(all, Modality::Camera);
    const auto t = clocs_features(lidar, camera, kEgo);
    for (std::size_t k = 0; k < t.size(); ++k) {
      const auto& e = t[k];
      const Vec3 a = lidar[e.lidar_index].box.center;
      const Vec3 b = camera[e.camera_index].box.center;
      EXPECT_NEAR(e.feature.d_ij, std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z)),
                  1e-12);
      EXPECT_NEAR(e.feature.d_j, std::hypot(b.x, b.y), 1e-9);
      EXPECT_GT(e.feature.iou3d, 0.0);
      EXPECT_EQ(lidar[e.lidar_index].cls, camera[e.camera_index].cls);
      if (k > 0) {
        const auto& p = t[k - 1];
        EXPECT_TRUE(p.lidar_index < e.lidar_index || (p.lidar_index == e.lidar_index && p.camera_index < e.camera_index));
      }
    }
    // Every same-class overlapping pair is present.
    std::size_t expected = 0;
    for (const auto& l : lidar) {
      for (const auto& c : camera) expected += (l.cls == c.cls && iou_3d(l.box, c.box) > 0.0) ? 1 : 0;
    }
    EXPECT_EQ(t.size(), expected);
  }
}

TEST(Clocs, IdentityScorerKeepsScores) {
  std::mt19937_64 rng(36);
  const auto all = fixtures::random_detections(rng, 30, {35, 0, 0}, 4);
  const auto lidar = only(all, Modality::Lidar);
  const auto camera = only(all, Modality::Camera);
  const auto t = clocs_features(lidar, camera, kEgo);
  const auto out = clocs_score(lidar, t, [](const ClocsFeature& f) { return f.s_i; });
  ASSERT_EQ(out.size(), lidar.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].score, lidar[i].score);
    EXPECT_EQ(out[i].box, lidar[i].box);
  }
}

TEST(Clocs, ZeroWeightLogisticGivesHalf) {
  const std::vector<Detection> lidar{det(box(20, 0, 0, 4, 2, 1.5), 0.8), det(box(40, 0, 0, 4, 2, 1.5), 0.3)};
  const std::vector<Detection> camera{det(box(20.5, 0, 0, 4, 2, 1.5), 0.6, ClassId::Car, Modality::Camera)};
  const auto t = clocs_features(lidar, camera, kEgo);
  LogisticScorer zero;
  zero.w = {0, 0, 0, 0, 0};
  zero.b = 0.0;
  const auto out = clocs_score(lidar, t, zero);
  EXPECT_EQ(out[0].score, 0.5);
  EXPECT_EQ(out[1].score, 0.3);
}

TEST(Clocs, HandSetWeights) {
  // Feature (1, 0.9, 0.7, 0, 60): z = 1 + 0.9 + 0.7 + 0 + 60/80 - 3 = 0.35.
  LogisticScorer s;
  s.w = {1, 1, 1, 1, 1};
  s.b = -3.0;
  EXPECT_NEAR(s({1.0, 0.9, 0.7, 0.0, 60.0}), 1.0 / (1.0 + std::exp(-0.35)), 1e-15);
  // With a 5 m gap the distance term contributes -0.5.
  EXPECT_NEAR(s({1.0, 0.9, 0.7, 5.0, 60.0}), 1.0 / (1.0 + std::exp(0.15)), 1e-15);
}

TEST(Clocs, BestIouPartnerDrivesScore) {
  const std::vector<Detection> lidar{det(box(20, 0, 0, 4, 2, 1.5), 0.8)};
  const std::vector<Detection> camera{det(box(21.5, 0, 0, 4, 2, 1.5), 0.2, ClassId::Car, Modality::Camera),
                                      det(box(20.2, 0, 0, 4, 2, 1.5), 0.9, ClassId::Car, Modality::Camera)};
  const auto t = clocs_features(lidar, camera, kEgo);
  ASSERT_EQ(t.size(), 2u);
  const auto out = clocs_score(lidar, t, [](const ClocsFeature& f) { return f.s_j; });
  EXPECT_EQ(out[0].score, 0.9);
}

TEST(FusionMethod, NamesRoundTrip) {
  for (FusionMethod m : {FusionMethod::Nms, FusionMethod::AdaNms, FusionMethod::Distance, FusionMethod::Bayes,
                         FusionMethod::Clocs}) {
    EXPECT_EQ(parse_fusion_method(to_string(m)), m);
  }
  EXPECT_FALSE(parse_fusion_method("wbf").has_value());
}

TEST(Fuse, EveryFrameAppearsAndMissingPoseIsAnError) {
  Scene s;
  s.scene_id = "s";
  s.frames.push_back(fixtures::frame_at("a"));
  s.frames.push_back(fixtures::frame_at("b"));
  DetectionMap lidar, camera;
  lidar["a"].push_back(det(box(20, 0, 0, 4, 2, 1.5), 0.8));
  camera["b"].push_back(det(box(60, 0, 0, 4, 2, 1.5), 0.8, ClassId::Car, Modality::Camera));
  for (FusionMethod m : {FusionMethod::Nms, FusionMethod::AdaNms, FusionMethod::Distance, FusionMethod::Bayes,
                         FusionMethod::Clocs}) {
    FusionOptions opts;
    opts.method = m;
    const auto out = fuse(lidar, camera, {s}, opts);
    EXPECT_EQ(out.size(), 2u) << to_string(m);
    EXPECT_EQ(out.at("a").size(), 1u);
    EXPECT_EQ(out.at("b").size(), m == FusionMethod::Clocs ? 0u : 1u) << to_string(m);
  }
  lidar["ghost"].push_back(det(box(20, 0, 0, 4, 2, 1.5), 0.8));
  EXPECT_THROW(fuse(lidar, camera, {s}, FusionOptions{}), ValidationError);
}

// Randomized invariants; the acceptance binary runs the same checks at full scale.
TEST(FusionInvariants, NmsAndAdaNms) {
  std::mt19937_64 rng(37);
  const AdaNmsConfig ada;
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_real_distribution<double> where(0.0, 90.0);
    const Vec3 around{where(rng), where(rng) - 45.0, 0.0};
    const auto in = fixtures::random_detections(rng, 25, around, 6);
    const auto once = nms(in, 0.2);
    const auto twice = nms(once, 0.2);
    ASSERT_EQ(once.size(), twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(once[i].box, twice[i].box);
    for (std::size_t i = 0; i < once.size(); ++i) {
      EXPECT_TRUE(contains_box(in, once[i].box));
      for (std::size_t j = i + 1; j < once.size(); ++j) {
        if (once[i].cls == once[j].cls) EXPECT_LE(rotated_iou_bev(once[i].box, once[j].box), 0.2);
      }
    }
    const auto a1 = adanms(in, ada, kEgo);
    const auto a2 = adanms(a1, ada, kEgo);
    ASSERT_EQ(a1.size(), a2.size());
    for (std::size_t i = 0; i < a1.size(); ++i) {
      EXPECT_EQ(a1[i].box, a2[i].box);
      for (std::size_t j = i + 1; j < a1.size(); ++j) {
        if (a1[i].cls != a1[j].cls) continue;
        const double mean = (ego_distance(kEgo, a1[i].box) + ego_distance(kEgo, a1[j].box)) / 2;
        EXPECT_LE(rotated_iou_bev(a1[i].box, a1[j].box), adanms_threshold(mean, ada) + 1e-12);
      }
    }
  }
}
