#pragma once

// Z-buffered triangle rasterizer producing RGB, depth and instance-id maps.
//
// Pixel (i, j) is covered by a triangle when its center (i + 0.5, j + 0.5)
// is strictly inside, or on a top or left edge (top-left fill rule), so
// triangles sharing an edge never both claim a pixel. Geometry is clipped
// against the z = kNearPlane plane in camera space. Depth is interpolated
// linearly in 1/z. Every surface is shaded from both sides.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "composer.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "meshio.hpp"

namespace synthfridge {

inline constexpr double kNearPlane = 0.01;
inline constexpr double kDisplayGamma = 2.2;

struct WorldTriangle {
  std::array<Vec3, 3> v;
  std::uint16_t instance = 0;
  Vec3 albedo;
};

namespace detail {

inline void push_quad(std::vector<WorldTriangle>& out, Vec3 a, Vec3 b, Vec3 c, Vec3 d, Vec3 albedo) {
  out.push_back({{a, b, c}, 0, albedo});
  out.push_back({{a, c, d}, 0, albedo});
}

inline void push_slab(std::vector<WorldTriangle>& out, Vec3 lo, Vec3 hi, Vec3 albedo) {
  const Vec3 p[8] = {{lo.x, lo.y, lo.z}, {hi.x, lo.y, lo.z}, {lo.x, hi.y, lo.z}, {hi.x, hi.y, lo.z},
                     {lo.x, lo.y, hi.z}, {hi.x, lo.y, hi.z}, {lo.x, hi.y, hi.z}, {hi.x, hi.y, hi.z}};
  push_quad(out, p[0], p[4], p[6], p[2], albedo);
  push_quad(out, p[1], p[3], p[7], p[5], albedo);
  push_quad(out, p[0], p[1], p[5], p[4], albedo);
  push_quad(out, p[2], p[6], p[7], p[3], albedo);
  push_quad(out, p[0], p[2], p[3], p[1], albedo);
  push_quad(out, p[4], p[5], p[7], p[6], albedo);
}

}  // namespace detail

// Interior walls (back, sides, floor, ceiling) and tray slabs, instance 0.
inline std::vector<WorldTriangle> fridge_triangles(const FridgeSpec& f, Vec3 albedo) {
  std::vector<WorldTriangle> out;
  const double x0 = -f.width / 2, x1 = f.width / 2, h = f.height, d = f.depth;
  detail::push_quad(out, {x0, 0, d}, {x1, 0, d}, {x1, h, d}, {x0, h, d}, albedo);
  detail::push_quad(out, {x0, 0, 0}, {x0, 0, d}, {x0, h, d}, {x0, h, 0}, albedo);
  detail::push_quad(out, {x1, 0, 0}, {x1, h, 0}, {x1, h, d}, {x1, 0, d}, albedo);
  detail::push_quad(out, {x0, 0, 0}, {x1, 0, 0}, {x1, 0, d}, {x0, 0, d}, albedo);
  detail::push_quad(out, {x0, h, 0}, {x0, h, d}, {x1, h, d}, {x1, h, 0}, albedo);
  const Vec3 tray_albedo = 0.9 * albedo;
  for (double t : f.trays) detail::push_slab(out, {x0, t - f.tray_thickness, 0}, {x1, t, d}, tray_albedo);
  return out;
}

inline void append_object_triangles(std::vector<WorldTriangle>& out, const ModelRepository& repo,
                                    const SceneObject& o) {
  const Mesh& mesh = repo[o.model].mesh;
  std::vector<Vec3> world;
  world.reserve(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) world.push_back(o.to_world(v));
  for (const Triangle& t : mesh.triangles) out.push_back({{world[t[0]], world[t[1]], world[t[2]]}, o.instance_id, o.albedo});
}

// Fridge first, then objects in scene order.
inline std::vector<WorldTriangle> scene_triangles(const ModelRepository& repo, const Scene& scene) {
  auto out = fridge_triangles(scene.fridge, scene.fridge_albedo);
  for (const SceneObject& o : scene.objects) append_object_triangles(out, repo, o);
  return out;
}

// Half-open pixel rectangle [x0, x1) x [y0, y1) in image coordinates; may
// extend past the image for off-frame canvases.
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  PixelRect intersect(const PixelRect& o) const {
    return {std::max(x0, o.x0), std::max(y0, o.y0), std::min(x1, o.x1), std::min(y1, o.y1)};
  }
};

struct RenderOutput {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;        // row-major, 3 bytes per pixel
  std::vector<float> depth;             // meters along the optical axis, +inf where empty
  std::vector<std::uint16_t> instance;  // 0 = fridge or background

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x); }
  std::uint16_t instance_at(int x, int y) const { return instance[index(x, y)]; }
  float depth_at(int x, int y) const { return depth[index(x, y)]; }

  std::size_t count(std::uint16_t id) const {
    return static_cast<std::size_t>(std::count(instance.begin(), instance.end(), id));
  }
};

namespace detail {

struct ScreenVertex {
  double x, y, inv_z;
};

// Camera-space polygon clipped to z >= kNearPlane.
inline std::vector<Vec3> clip_near(const std::array<Vec3, 3>& cam) {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    const Vec3& a = cam[i];
    const Vec3& b = cam[(i + 1) % 3];
    const bool ain = a.z >= kNearPlane, bin = b.z >= kNearPlane;
    if (ain) out.push_back(a);
    if (ain != bin) {
      const double t = (kNearPlane - a.z) / (b.z - a.z);
      Vec3 p = a + t * (b - a);
      p.z = kNearPlane;
      out.push_back(p);
    }
  }
  return out;
}

inline double edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
  return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

// With positive area under edge(), top edges run in +x and left edges in -y.
inline bool top_left(const ScreenVertex& a, const ScreenVertex& b) {
  const double dy = b.y - a.y, dx = b.x - a.x;
  return dy < 0 || (dy == 0 && dx > 0);
}

class Rasterizer {
 public:
  Rasterizer(const Camera& camera, PixelRect canvas, PixelRect scissor)
      : camera_(camera),
        canvas_(canvas),
        scissor_(scissor.intersect(canvas)),
        depth_(static_cast<std::size_t>(canvas.width()) * static_cast<std::size_t>(canvas.height()),
               std::numeric_limits<double>::infinity()),
        instance_(depth_.size(), 0),
        triangle_(depth_.size(), -1) {}

  // Screen-space polygons of the triangle after near clipping.
  std::vector<ScreenVertex> project(const WorldTriangle& tri) const {
    std::array<Vec3, 3> cam;
    for (std::size_t i = 0; i < 3; ++i) cam[i] = camera_.pose.apply(tri.v[i]);
    std::vector<ScreenVertex> out;
    for (const Vec3& p : clip_near(cam))
      out.push_back({camera_.fx * p.x / p.z + camera_.cx, camera_.fy * p.y / p.z + camera_.cy, 1.0 / p.z});
    return out;
  }

  void draw(const WorldTriangle& tri, std::int32_t tri_index) {
    if (scissor_.empty()) return;
    const auto poly = project(tri);
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) fill(poly[0], poly[k], poly[k + 1], tri.instance, tri_index);
  }

  const PixelRect& canvas() const { return canvas_; }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y - canvas_.y0) * static_cast<std::size_t>(canvas_.width()) +
           static_cast<std::size_t>(x - canvas_.x0);
  }
  double depth(int x, int y) const { return depth_[index(x, y)]; }
  std::uint16_t instance(int x, int y) const { return instance_[index(x, y)]; }
  std::int32_t triangle(int x, int y) const { return triangle_[index(x, y)]; }

 private:
  void fill(ScreenVertex a, ScreenVertex b, ScreenVertex c, std::uint16_t id, std::int32_t tri_index) {
    double area = edge(a, b, c.x, c.y);
    if (!(std::abs(area) > 0) || !std::isfinite(area)) return;
    if (area < 0) {
      std::swap(b, c);
      area = -area;
    }
    const double min_x = std::min({a.x, b.x, c.x}), max_x = std::max({a.x, b.x, c.x});
    const double min_y = std::min({a.y, b.y, c.y}), max_y = std::max({a.y, b.y, c.y});
    const int px0 = std::max(scissor_.x0, static_cast<int>(std::max(-1e9, std::ceil(min_x - 0.5))));
    const int px1 = std::min(scissor_.x1 - 1, static_cast<int>(std::min(1e9, std::floor(max_x - 0.5))));
    const int py0 = std::max(scissor_.y0, static_cast<int>(std::max(-1e9, std::ceil(min_y - 0.5))));
    const int py1 = std::min(scissor_.y1 - 1, static_cast<int>(std::min(1e9, std::floor(max_y - 0.5))));
    const bool tl0 = top_left(b, c), tl1 = top_left(c, a), tl2 = top_left(a, b);
    for (int py = py0; py <= py1; ++py) {
      const double y = py + 0.5;
      for (int px = px0; px <= px1; ++px) {
        const double x = px + 0.5;
        const double w0 = edge(b, c, x, y);
        const double w1 = edge(c, a, x, y);
        const double w2 = edge(a, b, x, y);
        if (w0 < 0 || w1 < 0 || w2 < 0) continue;
        if ((w0 == 0 && !tl0) || (w1 == 0 && !tl1) || (w2 == 0 && !tl2)) continue;
        const double inv_z = (w0 * a.inv_z + w1 * b.inv_z + w2 * c.inv_z) / area;
        const double z = 1.0 / inv_z;
        const std::size_t i = index(px, py);
        if (z < depth_[i]) {
          depth_[i] = z;
          instance_[i] = id;
          triangle_[i] = tri_index;
        }
      }
    }
  }

  Camera camera_;
  PixelRect canvas_;
  PixelRect scissor_;
  std::vector<double> depth_;
  std::vector<std::uint16_t> instance_;
  std::vector<std::int32_t> triangle_;
};

inline std::uint8_t encode_channel(double linear) {
  const double c = std::clamp(linear, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(std::pow(c, 1.0 / kDisplayGamma) * 255.0 + 0.5));
}

inline RenderOutput shade(const Rasterizer& r, const Camera& camera, const std::vector<WorldTriangle>& tris,
                          const Scene& scene) {
  const PixelRect& canvas = r.canvas();
  RenderOutput out;
  out.width = canvas.width();
  out.height = canvas.height();
  const auto n = static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.height);
  out.rgb.assign(3 * n, 0);
  out.depth.assign(n, std::numeric_limits<float>::infinity());
  out.instance.assign(n, 0);

  std::vector<Vec3> normals(tris.size());
  for (std::size_t i = 0; i < tris.size(); ++i)
    normals[i] = normalize(cross(tris[i].v[1] - tris[i].v[0], tris[i].v[2] - tris[i].v[0]));
  const Pose to_world = camera.pose.inverse();
  const Vec3 eye = to_world.translation;

  for (int y = canvas.y0; y < canvas.y1; ++y)
    for (int x = canvas.x0; x < canvas.x1; ++x) {
      const std::int32_t t = r.triangle(x, y);
      if (t < 0) continue;
      const std::size_t o = out.index(x - canvas.x0, y - canvas.y0);
      const double z = r.depth(x, y);
      out.depth[o] = static_cast<float>(z);
      out.instance[o] = r.instance(x, y);

      const Vec3 cam_point{(x + 0.5 - camera.cx) / camera.fx * z, (y + 0.5 - camera.cy) / camera.fy * z, z};
      const Vec3 p = to_world.apply(cam_point);
      Vec3 nrm = normals[static_cast<std::size_t>(t)];
      if (dot(nrm, eye - p) < 0) nrm = -nrm;
      Vec3 light{scene.ambient, scene.ambient, scene.ambient};
      for (const Light& l : scene.lights) {
        const Vec3 to_light = l.position - p;
        const double d = length(to_light);
        if (!(d > 0)) continue;
        const double lambert = std::max(0.0, dot(nrm, (1.0 / d) * to_light));
        light = light + (lambert / (1.0 + d * d)) * l.intensity;
      }
      const Vec3 c = tris[static_cast<std::size_t>(t)].albedo * light;
      out.rgb[3 * o + 0] = encode_channel(c.x);
      out.rgb[3 * o + 1] = encode_channel(c.y);
      out.rgb[3 * o + 2] = encode_channel(c.z);
    }
  return out;
}

inline const Camera& camera_at(const Scene& scene, std::size_t camera_index) {
  if (camera_index >= scene.cameras.size())
    throw LookupError("camera index " + std::to_string(camera_index) + " out of range");
  return scene.cameras[camera_index];
}

inline const SceneObject& object_by_id(const Scene& scene, std::uint16_t instance_id) {
  const SceneObject* o = scene.find(instance_id);
  if (!o) throw LookupError("no object with instance id " + std::to_string(instance_id));
  return *o;
}

inline RenderOutput render_triangles(const Camera& camera, const std::vector<WorldTriangle>& tris, const Scene& scene) {
  const PixelRect frame{0, 0, camera.width, camera.height};
  Rasterizer r(camera, frame, frame);
  for (std::size_t i = 0; i < tris.size(); ++i) r.draw(tris[i], static_cast<std::int32_t>(i));
  return shade(r, camera, tris, scene);
}

}  // namespace detail

inline RenderOutput render(const ModelRepository& repo, const Scene& scene, std::size_t camera_index) {
  const Camera& camera = detail::camera_at(scene, camera_index);
  return detail::render_triangles(camera, scene_triangles(repo, scene), scene);
}

// Same camera and shading as render(), with every object except
// `instance_id` removed.
inline RenderOutput render_solo(const ModelRepository& repo, const Scene& scene, std::size_t camera_index,
                                std::uint16_t instance_id) {
  const Camera& camera = detail::camera_at(scene, camera_index);
  const SceneObject& o = detail::object_by_id(scene, instance_id);
  auto tris = fridge_triangles(scene.fridge, scene.fridge_albedo);
  append_object_triangles(tris, repo, o);
  return detail::render_triangles(camera, tris, scene);
}

// Pixel counts of one object rendered alone: inside the image frame, and on
// a canvas `canvas_scale` times the image size centered on the frame (same
// camera, same pixel grid). In-frame pixels are bit-identical to
// render_solo().
struct SoloCoverage {
  std::size_t in_frame = 0;
  std::size_t extended = 0;
};

inline SoloCoverage measure_solo(const ModelRepository& repo, const Scene& scene, std::size_t camera_index,
                                 std::uint16_t instance_id, int canvas_scale = 3) {
  if (canvas_scale < 1 || canvas_scale % 2 == 0) throw DomainError("canvas scale must be a positive odd integer");
  const Camera& camera = detail::camera_at(scene, camera_index);
  const SceneObject& o = detail::object_by_id(scene, instance_id);
  const int mx = (canvas_scale - 1) / 2 * camera.width, my = (canvas_scale - 1) / 2 * camera.height;
  const PixelRect frame{0, 0, camera.width, camera.height};
  const PixelRect canvas{-mx, -my, camera.width + mx, camera.height + my};

  std::vector<WorldTriangle> object;
  append_object_triangles(object, repo, o);

  // Only the object's screen-space bounds can hold its pixels.
  detail::Rasterizer probe(camera, canvas, canvas);
  double min_x = INFINITY, min_y = INFINITY, max_x = -INFINITY, max_y = -INFINITY;
  for (const WorldTriangle& t : object)
    for (const auto& v : probe.project(t)) {
      min_x = std::min(min_x, v.x);
      max_x = std::max(max_x, v.x);
      min_y = std::min(min_y, v.y);
      max_y = std::max(max_y, v.y);
    }
  SoloCoverage cov;
  if (!(min_x <= max_x)) return cov;
  const auto clampi = [](double v) { return static_cast<int>(std::clamp(v, -1e8, 1e8)); };
  const PixelRect scissor =
      PixelRect{clampi(std::floor(min_x)) - 1, clampi(std::floor(min_y)) - 1, clampi(std::ceil(max_x)) + 1,
                clampi(std::ceil(max_y)) + 1}
          .intersect(canvas);
  if (scissor.empty()) return cov;

  detail::Rasterizer r(camera, canvas, scissor);
  const auto fridge = fridge_triangles(scene.fridge, scene.fridge_albedo);
  std::int32_t k = 0;
  for (const WorldTriangle& t : fridge) r.draw(t, k++);
  for (const WorldTriangle& t : object) r.draw(t, k++);
  for (int y = scissor.y0; y < scissor.y1; ++y)
    for (int x = scissor.x0; x < scissor.x1; ++x)
      if (r.instance(x, y) == instance_id) {
        ++cov.extended;
        if (x >= frame.x0 && x < frame.x1 && y >= frame.y0 && y < frame.y1) ++cov.in_frame;
      }
  return cov;
}

}  // namespace synthfridge
