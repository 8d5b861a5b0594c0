#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace far3d {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, const Vec3& v) { return {s * v.x, s * v.y, s * v.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  bool finite() const;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

// Unit quaternion, Hamilton convention, (w, x, y, z).
struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quaternion from_yaw(double yaw);
  // Row-major 3x3 rotation matrix. The matrix must be orthonormal with det +1.
  static Quaternion from_matrix(const std::array<double, 9>& m);

  double norm() const;
  Quaternion conjugate() const { return {w, -x, -y, -z}; }
  Vec3 rotate(const Vec3& v) const;
  // Heading about +z of the rotated x-axis, in (-pi, pi].
  double yaw() const;

  friend Quaternion operator*(const Quaternion& a, const Quaternion& b);
  friend bool operator==(const Quaternion&, const Quaternion&) = default;
};

// Rigid transform p' = rotation * p + translation.
struct Pose {
  Vec3 translation;
  Quaternion rotation;

  static Pose identity() { return {}; }
  static Pose from_yaw(const Vec3& translation, double yaw);

  Vec3 apply(const Vec3& p) const;
  Pose inverse() const;
  // (a * b).apply(p) == a.apply(b.apply(p))
  friend Pose operator*(const Pose& a, const Pose& b);
  friend bool operator==(const Pose&, const Pose&) = default;
};

enum class FrameTag { Global, Ego };

// Yaw-oriented cuboid. With yaw 0 the length runs along +x and the width along +y.
struct Box3D {
  Vec3 center;
  double length = 1.0;
  double width = 1.0;
  double height = 1.0;
  double yaw = 0.0;
  FrameTag frame = FrameTag::Global;

  double volume() const { return length * width * height; }
  double bev_area() const { return length * width; }
  bool valid() const;
  friend bool operator==(const Box3D&, const Box3D&) = default;
};

struct Rect2D {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool contains(double u, double v) const { return u >= x_min && u <= x_max && v >= y_min && v <= y_max; }
  friend bool operator==(const Rect2D&, const Rect2D&) = default;
};

// Pinhole camera. The camera frame looks down +z with +x right and +y down.
struct CameraModel {
  std::string id;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double image_width = 1.0;
  double image_height = 1.0;
  Pose extrinsic;  // camera-from-ego

  bool valid() const;
};

// Extrinsic for a camera mounted at `position` (ego frame) whose optical axis
// points along the ego ground-plane direction `azimuth` (radians from +x,
// counter-clockwise), with image "down" along ego -z.
Pose camera_from_ego_looking(const Vec3& position, double azimuth);

struct Projection {
  Rect2D rect;              // bounding rectangle of positive-depth corners, clipped to the image
  double mean_depth = 0.0;  // mean camera-frame depth of the positive-depth corners
  int corners_in_image = 0; // positive-depth corners whose projection falls inside the image
};

// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

std::array<Vec2, 4> bev_corners(const Box3D& box);
std::array<Vec3, 8> box_corners(const Box3D& box);

// Convex polygon intersection area by Sutherland-Hodgman clipping. Both inputs
// must be counter-clockwise.
double convex_intersection_area(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip);
double polygon_area(const std::vector<Vec2>& poly);

double bev_intersection_area(const Box3D& a, const Box3D& b);
double rotated_iou_bev(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

bool point_in_box(const Vec3& p, const Box3D& box);

// Center moved rigidly, yaw shifted by the pose heading. The frame tag is kept;
// callers that change frames set it themselves. Exact for yaw-only poses.
Box3D transform_box(const Pose& pose, const Box3D& box);

std::optional<Projection> project_box_to_image(const CameraModel& cam, const Box3D& box);
struct ImagePoint {
  Vec2 pixel;
  double depth = 0.0;  // camera-frame z
};

// Ego-frame point to pixel; nullopt when the camera-frame depth is not positive.
std::optional<ImagePoint> project_point(const CameraModel& cam, const Vec3& p_ego);

double rect_iou(const Rect2D& a, const Rect2D& b);

double center_distance_bev(const Box3D& a, const Box3D& b);
double center_distance_3d(const Box3D& a, const Box3D& b);

}  // namespace far3d
