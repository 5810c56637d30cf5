#pragma once

// Rigid transforms, pinhole projection and 2D box math.
//
// Conventions: world is right-handed and y-up. Cameras look down their +z
// axis with image x to the right and image y down (KITTI). Box coordinates
// are continuous; pixel (i, j) covers [i, i+1) x [j, j+1) and its center is
// (i + 0.5, j + 0.5).

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "errors.hpp"

namespace synthfridge {

struct Vec2 {
  double x = 0, y = 0;
  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Vec3 {
  double x = 0, y = 0, z = 0;
  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend Vec3 operator*(Vec3 a, Vec3 b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double length(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalize(Vec3 a) {
  const double l = length(a);
  return l > 0 ? (1.0 / l) * a : a;
}
inline bool is_finite(Vec3 a) { return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z); }

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }
  static Mat3 from_rows(Vec3 r0, Vec3 r1, Vec3 r2) {
    return {{r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z}};
  }
  // Rotation about +y by `radians`.
  static Mat3 yaw(double radians) {
    const double c = std::cos(radians), s = std::sin(radians);
    return {{c, 0, s, 0, 1, 0, -s, 0, c}};
  }

  double operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }
  Vec3 row(int r) const { return {(*this)(r, 0), (*this)(r, 1), (*this)(r, 2)}; }

  Mat3 transposed() const {
    return {{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
  }
  double determinant() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }

  friend Vec3 operator*(const Mat3& a, Vec3 v) { return {dot(a.row(0), v), dot(a.row(1), v), dot(a.row(2), v)}; }
  friend Mat3 operator*(const Mat3& a, const Mat3& b) {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        r.m[static_cast<std::size_t>(3 * i + j)] = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
    return r;
  }
  friend bool operator==(const Mat3&, const Mat3&) = default;
};

// Rigid transform p -> rotation * p + translation.
struct Pose {
  Mat3 rotation;
  Vec3 translation;

  Vec3 apply(Vec3 p) const { return rotation * p + translation; }
  Vec3 apply_direction(Vec3 d) const { return rotation * d; }

  Pose inverse() const {
    const Mat3 rt = rotation.transposed();
    return {rt, -(rt * translation)};
  }

  // (a * b).apply(p) == a.apply(b.apply(p))
  friend Pose operator*(const Pose& a, const Pose& b) {
    return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
  }

  // RᵀR = I and det R = +1 within `tol`.
  bool is_rigid(double tol = 1e-9) const {
    const Mat3 p = rotation.transposed() * rotation;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (std::abs(p(i, j) - (i == j ? 1.0 : 0.0)) > tol) return false;
    return std::abs(rotation.determinant() - 1.0) <= tol;
  }

  friend bool operator==(const Pose&, const Pose&) = default;
};

struct Camera {
  double fx = 450, fy = 450;
  double cx = 256, cy = 256;
  int width = 512, height = 512;
  Pose pose;  // world -> camera

  Vec3 position() const { return pose.inverse().translation; }

  // World -> camera pose for a camera at `eye` looking at `target`; world +y
  // maps to image up.
  static Pose look_at(Vec3 eye, Vec3 target, Vec3 up = {0, 1, 0}) {
    const Vec3 z = normalize(target - eye);
    const Vec3 x = normalize(cross(z, up));
    const Vec3 y = cross(z, x);
    const Mat3 r = Mat3::from_rows(x, y, z);
    return {r, -(r * eye)};
  }

  friend bool operator==(const Camera&, const Camera&) = default;
};

struct Projection {
  Vec2 pixel;
  double depth;
};

inline constexpr double kMinProjectDepth = 1e-6;

inline Projection project(const Camera& camera, Vec3 world_point) {
  const Vec3 p = camera.pose.apply(world_point);
  if (!(p.z > kMinProjectDepth))
    throw BehindCameraError("point at camera depth " + std::to_string(p.z) + " is behind the camera");
  return {{camera.fx * p.x / p.z + camera.cx, camera.fy * p.y / p.z + camera.cy}, p.z};
}

// Axis-aligned image box with x1 < x2, y1 < y2, all finite.
class BBox2D {
 public:
  BBox2D(double x1, double y1, double x2, double y2) : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
    if (!valid(x1, y1, x2, y2))
      throw DomainError("invalid box (" + std::to_string(x1) + ", " + std::to_string(y1) + ", " +
                        std::to_string(x2) + ", " + std::to_string(y2) + ")");
  }

  static bool valid(double x1, double y1, double x2, double y2) {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) && x1 < x2 && y1 < y2;
  }

  double x1() const { return x1_; }
  double y1() const { return y1_; }
  double x2() const { return x2_; }
  double y2() const { return y2_; }
  double width() const { return x2_ - x1_; }
  double height() const { return y2_ - y1_; }
  double area() const { return width() * height(); }

  BBox2D translated(double dx, double dy) const { return {x1_ + dx, y1_ + dy, x2_ + dx, y2_ + dy}; }

  friend bool operator==(const BBox2D&, const BBox2D&) = default;

 private:
  double x1_, y1_, x2_, y2_;
};

inline double intersection_area(const BBox2D& a, const BBox2D& b) {
  const double w = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double h = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  return (w > 0 && h > 0) ? w * h : 0.0;
}

inline double iou(const BBox2D& a, const BBox2D& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

// Axis-aligned rectangle on a horizontal plane (x and z world coordinates).
struct Rect2 {
  double x_min = 0, z_min = 0, x_max = 0, z_max = 0;

  double width() const { return x_max - x_min; }
  double depth() const { return z_max - z_min; }
  double area() const { return width() * depth(); }
  Vec2 center() const { return {0.5 * (x_min + x_max), 0.5 * (z_min + z_max)}; }

  static Rect2 centered(Vec2 c, Vec2 extent) {
    return {c.x - 0.5 * extent.x, c.y - 0.5 * extent.y, c.x + 0.5 * extent.x, c.y + 0.5 * extent.y};
  }

  bool contains(const Rect2& o, double tol = 1e-9) const {
    return o.x_min >= x_min - tol && o.z_min >= z_min - tol && o.x_max <= x_max + tol && o.z_max <= z_max + tol;
  }
  // Interiors intersect; touching edges do not count.
  bool overlaps(const Rect2& o, double tol = 1e-9) const {
    return std::min(x_max, o.x_max) - std::max(x_min, o.x_min) > tol &&
           std::min(z_max, o.z_max) - std::max(z_min, o.z_min) > tol;
  }

  friend bool operator==(const Rect2&, const Rect2&) = default;
};

}  // namespace synthfridge
