#include "far3d/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "far3d/error.hpp"

namespace far3d {

namespace {

constexpr double kCollinearEps = 1e-12;
// Absorbs rounding from the box-frame rotation; containment is boundary-inclusive.
constexpr double kContainmentEps = 1e-9;

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

void require_same_frame(const Box3D& a, const Box3D& b) {
  if (a.frame != b.frame) throw GeometryError("boxes are in different frames");
}

void require_nondegenerate(const Box3D& b) {
  if (!(b.length > 0.0) || !(b.width > 0.0)) throw GeometryError("degenerate box");
}

}  // namespace

bool Vec3::finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

Quaternion Quaternion::from_yaw(double yaw) {
  return {std::cos(yaw / 2.0), 0.0, 0.0, std::sin(yaw / 2.0)};
}

Quaternion Quaternion::from_matrix(const std::array<double, 9>& m) {
  const double trace = m[0] + m[4] + m[8];
  Quaternion q;
  if (trace > 0.0) {
    const double s = 2.0 * std::sqrt(trace + 1.0);
    q = {0.25 * s, (m[7] - m[5]) / s, (m[2] - m[6]) / s, (m[3] - m[1]) / s};
  } else if (m[0] > m[4] && m[0] > m[8]) {
    const double s = 2.0 * std::sqrt(1.0 + m[0] - m[4] - m[8]);
    q = {(m[7] - m[5]) / s, 0.25 * s, (m[1] + m[3]) / s, (m[2] + m[6]) / s};
  } else if (m[4] > m[8]) {
    const double s = 2.0 * std::sqrt(1.0 + m[4] - m[0] - m[8]);
    q = {(m[2] - m[6]) / s, (m[1] + m[3]) / s, 0.25 * s, (m[5] + m[7]) / s};
  } else {
    const double s = 2.0 * std::sqrt(1.0 + m[8] - m[0] - m[4]);
    q = {(m[3] - m[1]) / s, (m[2] + m[6]) / s, (m[5] + m[7]) / s, 0.25 * s};
  }
  if (q.w < 0.0) q = {-q.w, -q.x, -q.y, -q.z};
  return q;
}

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Vec3 Quaternion::rotate(const Vec3& v) const {
  // v' = v + 2w (u x v) + 2 u x (u x v), u = (x, y, z)
  const Vec3 t{2.0 * (y * v.z - z * v.y), 2.0 * (z * v.x - x * v.z), 2.0 * (x * v.y - y * v.x)};
  return {v.x + w * t.x + (y * t.z - z * t.y), v.y + w * t.y + (z * t.x - x * t.z),
          v.z + w * t.z + (x * t.y - y * t.x)};
}

double Quaternion::yaw() const {
  return normalize_angle(std::atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z)));
}

Quaternion operator*(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z, a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x, a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Pose Pose::from_yaw(const Vec3& translation, double yaw) { return {translation, Quaternion::from_yaw(yaw)}; }

Vec3 Pose::apply(const Vec3& p) const { return rotation.rotate(p) + translation; }

Pose Pose::inverse() const {
  const Quaternion inv = rotation.conjugate();
  return {-1.0 * inv.rotate(translation), inv};
}

Pose operator*(const Pose& a, const Pose& b) { return {a.apply(b.translation), a.rotation * b.rotation}; }

bool Box3D::valid() const {
  return center.finite() && length > 0.0 && width > 0.0 && height > 0.0 && std::isfinite(yaw) &&
         std::isfinite(length) && std::isfinite(width) && std::isfinite(height);
}

bool CameraModel::valid() const { return fx > 0.0 && fy > 0.0 && image_width > 0.0 && image_height > 0.0; }

Pose camera_from_ego_looking(const Vec3& position, double azimuth) {
  const double c = std::cos(azimuth);
  const double s = std::sin(azimuth);
  // Rows are the camera axes (right, down, forward) expressed in the ego frame.
  const std::array<double, 9> rot{s, -c, 0.0,  //
                                  0.0, 0.0, -1.0,  //
                                  c, s, 0.0};
  const Quaternion q = Quaternion::from_matrix(rot);
  return {-1.0 * q.rotate(position), q};
}

double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

std::array<Vec2, 4> bev_corners(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = box.length / 2.0;
  const double hw = box.width / 2.0;
  const std::array<Vec2, 4> local{{{hl, -hw}, {hl, hw}, {-hl, hw}, {-hl, -hw}}};
  std::array<Vec2, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {box.center.x + c * local[i].x - s * local[i].y, box.center.y + s * local[i].x + c * local[i].y};
  }
  return out;
}

std::array<Vec3, 8> box_corners(const Box3D& box) {
  const auto bev = bev_corners(box);
  const double z_lo = box.center.z - box.height / 2.0;
  const double z_hi = box.center.z + box.height / 2.0;
  std::array<Vec3, 8> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {bev[i].x, bev[i].y, z_lo};
    out[i + 4] = {bev[i].x, bev[i].y, z_hi};
  }
  return out;
}

double polygon_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    twice += p.x * q.y - q.x * p.y;
  }
  return std::abs(twice) / 2.0;
}

double convex_intersection_area(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip) {
  std::vector<Vec2> output = subject;
  std::vector<Vec2> input;
  for (std::size_t e = 0; e < clip.size() && !output.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % clip.size()];
    input.swap(output);
    output.clear();
    const auto side = [&](const Vec2& p) { return cross(a, b, p); };
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Vec2& cur = input[i];
      const Vec2& prev = input[(i + input.size() - 1) % input.size()];
      const double s_cur = side(cur);
      const double s_prev = side(prev);
      const bool cur_in = s_cur >= 0.0;
      const bool prev_in = s_prev >= 0.0;
      if (cur_in != prev_in) {
        const double denom = s_prev - s_cur;
        if (std::abs(denom) > kCollinearEps) {
          const double t = s_prev / denom;
          output.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
        }
      }
      if (cur_in) output.push_back(cur);
    }
  }
  return polygon_area(output);
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  require_same_frame(a, b);
  require_nondegenerate(a);
  require_nondegenerate(b);
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  return convex_intersection_area({ca.begin(), ca.end()}, {cb.begin(), cb.end()});
}

double rotated_iou_bev(const Box3D& a, const Box3D& b) {
  if (a == b && a.valid()) return 1.0;
  const double inter = bev_intersection_area(a, b);
  const double uni = a.bev_area() + b.bev_area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  if (!(a.height > 0.0) || !(b.height > 0.0)) throw GeometryError("degenerate box");
  if (a == b && a.valid()) return 1.0;
  const double bev = bev_intersection_area(a, b);
  const double z_lo = std::max(a.center.z - a.height / 2.0, b.center.z - b.height / 2.0);
  const double z_hi = std::min(a.center.z + a.height / 2.0, b.center.z + b.height / 2.0);
  const double inter = bev * std::max(0.0, z_hi - z_lo);
  const double uni = a.volume() + b.volume() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool point_in_box(const Vec3& p, const Box3D& box) {
  const double dx = p.x - box.center.x;
  const double dy = p.y - box.center.y;
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  const double lz = p.z - box.center.z;
  return std::abs(lx) <= box.length / 2.0 + kContainmentEps && std::abs(ly) <= box.width / 2.0 + kContainmentEps &&
         std::abs(lz) <= box.height / 2.0 + kContainmentEps;
}

Box3D transform_box(const Pose& pose, const Box3D& box) {
  Box3D out = box;
  out.center = pose.apply(box.center);
  out.yaw = normalize_angle(box.yaw + pose.rotation.yaw());
  return out;
}

std::optional<ImagePoint> project_point(const CameraModel& cam, const Vec3& p_ego) {
  const Vec3 pc = cam.extrinsic.apply(p_ego);
  if (!(pc.z > 0.0)) return std::nullopt;
  return ImagePoint{{cam.fx * pc.x / pc.z + cam.cx, cam.fy * pc.y / pc.z + cam.cy}, pc.z};
}

std::optional<Projection> project_box_to_image(const CameraModel& cam, const Box3D& box) {
  if (box.frame != FrameTag::Ego) throw GeometryError("projection requires an ego-frame box");
  Rect2D raw{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  const Rect2D image{0.0, 0.0, cam.image_width, cam.image_height};
  double depth_sum = 0.0;
  int positive = 0;
  int inside = 0;
  for (const Vec3& corner : box_corners(box)) {
    const auto ip = project_point(cam, corner);
    if (!ip) continue;
    ++positive;
    depth_sum += ip->depth;
    raw.x_min = std::min(raw.x_min, ip->pixel.x);
    raw.y_min = std::min(raw.y_min, ip->pixel.y);
    raw.x_max = std::max(raw.x_max, ip->pixel.x);
    raw.y_max = std::max(raw.y_max, ip->pixel.y);
    if (image.contains(ip->pixel.x, ip->pixel.y)) ++inside;
  }
  if (positive == 0) return std::nullopt;
  const Rect2D clipped{std::max(raw.x_min, image.x_min), std::max(raw.y_min, image.y_min),
                       std::min(raw.x_max, image.x_max), std::min(raw.y_max, image.y_max)};
  if (!(clipped.width() > 0.0) || !(clipped.height() > 0.0)) return std::nullopt;
  return Projection{clipped, depth_sum / positive, inside};
}

double rect_iou(const Rect2D& a, const Rect2D& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double center_distance_bev(const Box3D& a, const Box3D& b) {
  require_same_frame(a, b);
  return std::hypot(a.center.x - b.center.x, a.center.y - b.center.y);
}

double center_distance_3d(const Box3D& a, const Box3D& b) {
  require_same_frame(a, b);
  const Vec3 d = a.center - b.center;
  return std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
}

}  // namespace far3d
