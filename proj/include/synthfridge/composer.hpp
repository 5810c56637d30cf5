#pragma once

// Seeded composition of refrigerator scenes: object sampling, placement on
// trays (grid, random, shelf bin packing), lights, cameras and materials.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "geometry.hpp"
#include "meshio.hpp"
#include "seed.hpp"

namespace synthfridge {

inline constexpr int kMinObjectsPerScene = 5;
inline constexpr int kMaxObjectsPerScene = 25;

// Interior of the open refrigerator: x in [-width/2, width/2], y in
// [0, height], z in [0, depth]. The door opening is the z = 0 plane and
// cameras stand at z < 0.
struct FridgeSpec {
  double width = 0.6;
  double depth = 0.45;
  double height = 1.0;
  std::vector<double> trays{0.05, 0.38, 0.71};  // top surface heights
  Vec3 albedo_min{0.55, 0.55, 0.55};
  Vec3 albedo_max{0.95, 0.95, 0.95};
  double tray_thickness = 0.015;
  double tray_margin = 0.01;  // keep-out band along the tray edges

  Rect2 tray_rect() const {
    return {-width / 2 + tray_margin, tray_margin, width / 2 - tray_margin, depth - tray_margin};
  }

  // Free height above tray `i` up to the underside of the next tray or the
  // ceiling.
  double headroom(std::size_t i) const {
    const double top = i + 1 < trays.size() ? trays[i + 1] - tray_thickness : height;
    return top - trays[i];
  }

  friend bool operator==(const FridgeSpec&, const FridgeSpec&) = default;
};

inline void validate_fridge(const FridgeSpec& f) {
  if (!(f.width > 0 && f.depth > 0 && f.height > 0)) throw ConfigError("fridge dimensions must be positive");
  if (f.trays.empty()) throw ConfigError("fridge needs at least one tray");
  if (!(f.tray_margin >= 0 && 2 * f.tray_margin < std::min(f.width, f.depth)))
    throw ConfigError("tray margin leaves no usable tray area");
  if (!(f.tray_thickness > 0)) throw ConfigError("tray thickness must be positive");
  for (std::size_t i = 0; i < f.trays.size(); ++i) {
    if (!(f.trays[i] - f.tray_thickness > 0 && f.trays[i] < f.height))
      throw ConfigError("tray " + std::to_string(i) + " is not strictly inside the interior height");
    if (i > 0 && !(f.trays[i] - f.tray_thickness > f.trays[i - 1]))
      throw ConfigError("tray heights must be strictly increasing and not overlap");
  }
  for (int a = 0; a < 3; ++a)
    if (!(0 <= f.albedo_min[a] && f.albedo_min[a] <= f.albedo_max[a] && f.albedo_max[a] <= 1))
      throw ConfigError("fridge albedo range must satisfy 0 <= min <= max <= 1");
}

enum class PlacementPattern { grid = 0, random = 1, binpack = 2 };

inline const char* to_string(PlacementPattern p) {
  switch (p) {
    case PlacementPattern::grid: return "grid";
    case PlacementPattern::random: return "random";
    case PlacementPattern::binpack: return "binpack";
  }
  return "?";
}

struct SceneObject {
  std::size_t model = 0;  // index into the ModelRepository
  Pose pose;              // applied after `scale`
  double scale = 1.0;
  Vec3 albedo;
  std::uint16_t instance_id = 0;  // > 0; 0 is the fridge / background
  std::string label;
  std::size_t tray = 0;
  Rect2 footprint;  // world XZ bounding rectangle

  Vec3 to_world(Vec3 model_point) const { return pose.apply(scale * model_point); }
};

struct Light {
  Vec3 position;
  Vec3 intensity;  // linear RGB
};

struct Scene {
  FridgeSpec fridge;
  Vec3 fridge_albedo{0.8, 0.8, 0.8};
  PlacementPattern pattern = PlacementPattern::grid;
  std::vector<SceneObject> objects;
  std::vector<Light> lights;
  double ambient = 0.1;
  std::vector<Camera> cameras;
  std::uint64_t seed = 0;

  const SceneObject* find(std::uint16_t instance_id) const {
    for (const SceneObject& o : objects)
      if (o.instance_id == instance_id) return &o;
    return nullptr;
  }
};

struct CameraIntrinsics {
  double fx = 450, fy = 450, cx = 256, cy = 256;
  int width = 512, height = 512;
};

// Scene-level generation knobs. Defaults reproduce the documented dataset
// configuration.
struct ComposeConfig {
  int min_objects = kMinObjectsPerScene;
  int max_objects = kMaxObjectsPerScene;
  std::array<double, 3> pattern_weights{1, 1, 1};  // grid, random, binpack
  double grid_pitch = 0.1;
  int placement_attempts = 100;
  FridgeSpec fridge;

  int min_lights = 1, max_lights = 3;
  double light_intensity_min = 0.05, light_intensity_max = 1.0;
  double ambient_min = 0.03, ambient_max = 0.25;

  int min_cameras = 1, max_cameras = 4;
  Vec3 camera_region_min{-0.2, 0.25, -0.85};
  Vec3 camera_region_max{0.2, 0.85, -0.5};
  CameraIntrinsics intrinsics;
};

inline void validate_compose_config(const ComposeConfig& c) {
  if (!(kMinObjectsPerScene <= c.min_objects && c.min_objects <= c.max_objects &&
        c.max_objects <= kMaxObjectsPerScene))
    throw ConfigError("object count range must satisfy 5 <= min <= max <= 25");
  double total = 0;
  for (double w : c.pattern_weights) {
    if (!(w >= 0)) throw ConfigError("pattern weights must be nonnegative");
    total += w;
  }
  if (!(total > 0)) throw ConfigError("at least one pattern weight must be positive");
  if (!(c.grid_pitch > 0)) throw ConfigError("grid pitch must be positive");
  if (c.placement_attempts < 1) throw ConfigError("placement attempts must be >= 1");
  validate_fridge(c.fridge);
  if (!(1 <= c.min_lights && c.min_lights <= c.max_lights)) throw ConfigError("light count range invalid");
  if (!(0 <= c.light_intensity_min && c.light_intensity_min <= c.light_intensity_max))
    throw ConfigError("light intensity range invalid");
  if (!(0 <= c.ambient_min && c.ambient_min <= c.ambient_max)) throw ConfigError("ambient range invalid");
  if (!(1 <= c.min_cameras && c.min_cameras <= c.max_cameras)) throw ConfigError("camera count range invalid");
  for (int a = 0; a < 3; ++a)
    if (!(c.camera_region_min[a] <= c.camera_region_max[a])) throw ConfigError("camera region is inverted");
  if (!(c.camera_region_max.z < 0)) throw ConfigError("camera region must lie in front of the fridge (z < 0)");
  const auto& k = c.intrinsics;
  if (!(k.fx > 0 && k.fy > 0 && k.width > 0 && k.height > 0)) throw ConfigError("camera intrinsics invalid");
}

// ---------------------------------------------------------------------------
// Placement

struct Placement {
  std::size_t tray = 0;
  Vec2 center;  // footprint center in world XZ
};

// Centered lattice with spacing max(pitch, largest footprint side). A tray
// holding m objects uses ceil(sqrt(m)) columns when it can, filled row-major
// (rows advance along +z). Trays are visited cyclically from `first_tray`;
// objects that do not fit overflow to the next tray.
inline std::vector<Placement> place_grid(std::span<const Vec2> footprints, std::span<const Rect2> trays, double pitch,
                                         std::size_t first_tray = 0) {
  if (!(pitch > 0)) throw DomainError("grid pitch must be positive");
  std::vector<Placement> out;
  if (footprints.empty()) return out;
  if (trays.empty()) throw CapacityError("no trays to place on");

  double ex = 0, ez = 0;
  for (const Vec2& f : footprints) {
    ex = std::max(ex, f.x);
    ez = std::max(ez, f.y);
  }
  const double step = std::max({pitch, ex, ez});
  auto lattice_size = [&](double span, double extent) -> std::size_t {
    if (span + 1e-9 < extent) return 0;
    return static_cast<std::size_t>(std::floor((span - extent) / step + 1e-9)) + 1;
  };

  std::size_t next = 0;
  for (std::size_t k = 0; k < trays.size() && next < footprints.size(); ++k) {
    const std::size_t t = (first_tray + k) % trays.size();
    const Rect2& tray = trays[t];
    if (!(tray.area() > 0)) throw DomainError("tray area must be positive");
    const std::size_t cap_x = lattice_size(tray.width(), ex);
    const std::size_t cap_z = lattice_size(tray.depth(), ez);
    const std::size_t m = std::min(footprints.size() - next, cap_x * cap_z);
    if (m == 0) continue;
    const auto square = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m))));
    const std::size_t cols = std::min(cap_x, std::max(square, (m + cap_z - 1) / cap_z));
    const std::size_t rows = (m + cols - 1) / cols;
    const Vec2 c = tray.center();
    for (std::size_t i = 0; i < m; ++i) {
      const double col = static_cast<double>(i % cols) - 0.5 * static_cast<double>(cols - 1);
      const double row = static_cast<double>(i / cols) - 0.5 * static_cast<double>(rows - 1);
      out.push_back({t, {c.x + col * step, c.y + row * step}});
    }
    next += m;
  }
  if (next < footprints.size())
    throw CapacityError("grid holds " + std::to_string(next) + " of " + std::to_string(footprints.size()) +
                        " objects");
  return out;
}

// Rejection sampling: each object gets up to `attempts` uniformly drawn
// centers that keep it inside the tray and clear of `occupied` and of earlier
// accepted objects; otherwise it is skipped (nullopt).
inline std::vector<std::optional<Vec2>> place_random(std::span<const Vec2> footprints, const Rect2& tray, Rng& rng,
                                                     std::span<const Rect2> occupied = {}, int attempts = 100) {
  if (!(tray.area() > 0)) throw DomainError("tray area must be positive");
  std::vector<Rect2> taken(occupied.begin(), occupied.end());
  std::vector<std::optional<Vec2>> out;
  for (const Vec2& f : footprints) {
    std::optional<Vec2> accepted;
    if (f.x <= tray.width() + 1e-12 && f.y <= tray.depth() + 1e-12) {
      for (int a = 0; a < attempts && !accepted; ++a) {
        const Vec2 c{rng.uniform(tray.x_min + f.x / 2, std::max(tray.x_min + f.x / 2, tray.x_max - f.x / 2)),
                     rng.uniform(tray.z_min + f.y / 2, std::max(tray.z_min + f.y / 2, tray.z_max - f.y / 2))};
        const Rect2 r = Rect2::centered(c, f);
        if (std::none_of(taken.begin(), taken.end(), [&](const Rect2& o) { return o.overlaps(r); })) accepted = c;
      }
    }
    if (accepted) taken.push_back(Rect2::centered(*accepted, f));
    out.push_back(accepted);
  }
  return out;
}

// Shelf packing, next-fit decreasing height: footprints sorted by decreasing
// depth (z extent) are laid left to right from the tray's min corner; a new
// shelf opens above the tallest item of the current one when the width runs
// out. Items that do not fit in the remaining depth are nullopt.
inline std::vector<std::optional<Vec2>> place_binpack(std::span<const Vec2> footprints, const Rect2& tray) {
  constexpr double tol = 1e-9;
  for (std::size_t i = 0; i < footprints.size(); ++i)
    if (footprints[i].x > tray.width() + tol || footprints[i].y > tray.depth() + tol)
      throw OversizeError(i, "larger than the tray");

  std::vector<std::size_t> order(footprints.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return footprints[a].y > footprints[b].y; });

  std::vector<std::optional<Vec2>> out(footprints.size());
  double x = tray.x_min, shelf_z = tray.z_min, shelf_depth = 0;
  for (std::size_t i : order) {
    const Vec2 f = footprints[i];
    if (x + f.x > tray.x_max + tol && x > tray.x_min) {
      shelf_z += shelf_depth;
      x = tray.x_min;
      shelf_depth = 0;
    }
    if (shelf_z + f.y > tray.z_max + tol) continue;
    out[i] = Vec2{x + f.x / 2, shelf_z + f.y / 2};
    x += f.x;
    shelf_depth = std::max(shelf_depth, f.y);
  }
  return out;
}

// Sum of placed footprint areas over tray area.
inline double utilization(std::span<const Vec2> footprints, std::span<const std::optional<Vec2>> placed,
                          const Rect2& tray) {
  double used = 0;
  for (std::size_t i = 0; i < footprints.size(); ++i)
    if (placed[i]) used += footprints[i].x * footprints[i].y;
  return used / tray.area();
}

// ---------------------------------------------------------------------------
// Composition

namespace detail {

struct Candidate {
  std::size_t model;
  double scale;
  double yaw;
  Vec2 extent;  // footprint size in XZ after scale and yaw
  Vec2 offset;  // footprint center relative to the model origin
  Vec3 albedo;
};

inline Vec3 uniform_vec(Rng& rng, Vec3 lo, Vec3 hi) {
  return {rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y), rng.uniform(lo.z, hi.z)};
}

}  // namespace detail

inline void validate_scene(const Scene& scene) {
  const auto n = static_cast<int>(scene.objects.size());
  if (n < kMinObjectsPerScene || n > kMaxObjectsPerScene)
    throw DomainError("scene has " + std::to_string(n) + " objects, outside [5, 25]");
  if (scene.lights.empty()) throw DomainError("scene has no lights");
  if (scene.cameras.empty()) throw DomainError("scene has no cameras");
  const Rect2 tray = scene.fridge.tray_rect();
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& a = scene.objects[i];
    if (a.instance_id == 0) throw DomainError("instance id 0 is reserved");
    if (a.tray >= scene.fridge.trays.size()) throw DomainError("object on a nonexistent tray");
    if (!tray.contains(a.footprint)) throw DomainError("object footprint leaves its tray");
    for (std::size_t j = i + 1; j < scene.objects.size(); ++j) {
      const SceneObject& b = scene.objects[j];
      if (a.instance_id == b.instance_id) throw DomainError("duplicate instance id");
      if (a.tray == b.tray && a.footprint.overlaps(b.footprint)) throw DomainError("object footprints overlap");
    }
  }
}

// Deterministic in (repo, config, seed). Each randomized aspect draws from
// its own stream derived from `seed`.
inline Scene compose_scene(const ModelRepository& repo, const ComposeConfig& config, std::uint64_t seed) {
  validate_repository(repo);
  validate_compose_config(config);

  Scene scene;
  scene.seed = seed;
  scene.fridge = config.fridge;
  const FridgeSpec& fridge = config.fridge;
  const Rect2 tray_rect = fridge.tray_rect();
  const std::size_t tray_count = fridge.trays.size();

  Rng fridge_rng(seed, Stream::fridge);
  scene.fridge_albedo = detail::uniform_vec(fridge_rng, fridge.albedo_min, fridge.albedo_max);

  Rng count_rng(seed, Stream::object_count);
  const auto requested = static_cast<std::size_t>(count_rng.uniform_int(config.min_objects, config.max_objects));

  Rng pattern_rng(seed, Stream::pattern);
  scene.pattern = static_cast<PlacementPattern>(pattern_rng.weighted(config.pattern_weights));

  double headroom = INFINITY;
  for (std::size_t t = 0; t < tray_count; ++t) headroom = std::min(headroom, fridge.headroom(t));
  const double max_height = headroom - 0.02;
  if (!(max_height > 0)) throw ConfigError("trays are too close together to hold objects");

  Rng model_rng(seed, Stream::models);
  Rng material_rng(seed, Stream::materials);
  std::vector<detail::Candidate> candidates;
  for (std::size_t i = 0; i < requested; ++i) {
    detail::Candidate c;
    c.model = model_rng.index(repo.size());
    const ModelEntry& entry = repo[c.model];
    const Aabb3 mb = bounds(entry.mesh);
    const double target = std::min(model_rng.uniform(entry.min_height, entry.max_height), max_height);
    c.scale = target / mb.extent().y;
    // Quarter-turn yaws only; the footprint is measured after rotation.
    c.yaw = 0.5 * std::numbers::pi * static_cast<double>(model_rng.uniform_int(0, 3));
    const Mat3 r = Mat3::yaw(c.yaw);
    std::vector<Vec3> moved;
    moved.reserve(entry.mesh.vertices.size());
    for (const Vec3& v : entry.mesh.vertices) moved.push_back(r * (c.scale * v));
    const Aabb3 fb = bounds(moved);
    c.extent = {fb.max.x - fb.min.x, fb.max.z - fb.min.z};
    c.offset = {0.5 * (fb.min.x + fb.max.x), 0.5 * (fb.min.z + fb.max.z)};
    c.albedo = detail::uniform_vec(material_rng, {0.05, 0.05, 0.05}, {0.95, 0.95, 0.95});
    candidates.push_back(c);
  }

  std::vector<Vec2> extents;
  for (const auto& c : candidates) extents.push_back(c.extent);
  std::vector<std::optional<Placement>> placed(candidates.size());
  Rng place_rng(seed, Stream::placement);
  const std::size_t first_tray = place_rng.index(tray_count);
  const std::vector<Rect2> trays(tray_count, tray_rect);

  switch (scene.pattern) {
    case PlacementPattern::grid: {
      // Drop trailing objects until the lattice can hold the rest.
      std::size_t n = extents.size();
      while (true) {
        try {
          const auto cells = place_grid(std::span(extents).first(n), trays, config.grid_pitch, first_tray);
          for (std::size_t i = 0; i < n; ++i) placed[i] = cells[i];
          break;
        } catch (const CapacityError&) {
          if (n <= static_cast<std::size_t>(kMinObjectsPerScene)) throw;
          --n;
        }
      }
      break;
    }
    case PlacementPattern::random: {
      std::vector<std::vector<Rect2>> occupied(tray_count);
      std::vector<std::size_t> skipped;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        const std::size_t t = place_rng.index(tray_count);
        const auto r = place_random(std::span(&extents[i], 1), tray_rect, place_rng, occupied[t],
                                    config.placement_attempts);
        if (r[0]) {
          placed[i] = Placement{t, *r[0]};
          occupied[t].push_back(Rect2::centered(*r[0], extents[i]));
        } else {
          skipped.push_back(i);
        }
      }
      // One more pass over every tray for objects that missed their first.
      for (std::size_t i : skipped)
        for (std::size_t k = 0; k < tray_count && !placed[i]; ++k) {
          const auto r = place_random(std::span(&extents[i], 1), tray_rect, place_rng, occupied[k],
                                      config.placement_attempts);
          if (r[0]) {
            placed[i] = Placement{k, *r[0]};
            occupied[k].push_back(Rect2::centered(*r[0], extents[i]));
          }
        }
      break;
    }
    case PlacementPattern::binpack: {
      std::vector<std::size_t> pending(candidates.size());
      std::iota(pending.begin(), pending.end(), 0);
      for (std::size_t k = 0; k < tray_count && !pending.empty(); ++k) {
        const std::size_t t = (first_tray + k) % tray_count;
        std::vector<Vec2> batch;
        for (std::size_t i : pending) batch.push_back(extents[i]);
        const auto r = place_binpack(batch, tray_rect);
        std::vector<std::size_t> rest;
        for (std::size_t j = 0; j < pending.size(); ++j) {
          if (r[j])
            placed[pending[j]] = Placement{t, *r[j]};
          else
            rest.push_back(pending[j]);
        }
        pending = std::move(rest);
      }
      break;
    }
  }

  std::uint16_t next_id = 1;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!placed[i]) continue;
    const detail::Candidate& c = candidates[i];
    const Placement& p = *placed[i];
    SceneObject o;
    o.model = c.model;
    o.scale = c.scale;
    o.albedo = c.albedo;
    o.instance_id = next_id++;
    o.label = repo[c.model].label;
    o.tray = p.tray;
    o.footprint = Rect2::centered(p.center, c.extent);
    o.pose = {Mat3::yaw(c.yaw), {p.center.x - c.offset.x, fridge.trays[p.tray], p.center.y - c.offset.y}};
    scene.objects.push_back(std::move(o));
  }
  if (scene.objects.size() < static_cast<std::size_t>(kMinObjectsPerScene))
    throw CapacityError("only " + std::to_string(scene.objects.size()) + " objects could be placed");

  Rng light_rng(seed, Stream::lights);
  const auto lights = light_rng.uniform_int(config.min_lights, config.max_lights);
  const Vec3 inner_lo{-fridge.width / 2 + 0.02, 0.02, 0.02};
  const Vec3 inner_hi{fridge.width / 2 - 0.02, fridge.height - 0.02, fridge.depth - 0.02};
  for (std::int64_t i = 0; i < lights; ++i) {
    Light l;
    l.position = detail::uniform_vec(light_rng, inner_lo, inner_hi);
    const double level = light_rng.uniform(config.light_intensity_min, config.light_intensity_max);
    const Vec3 tint = detail::uniform_vec(light_rng, {0.85, 0.85, 0.85}, {1, 1, 1});
    l.intensity = level * tint;
    scene.lights.push_back(l);
  }
  scene.ambient = light_rng.uniform(config.ambient_min, config.ambient_max);

  Rng camera_rng(seed, Stream::cameras);
  const auto cameras = camera_rng.uniform_int(config.min_cameras, config.max_cameras);
  for (std::int64_t i = 0; i < cameras; ++i) {
    const Vec3 eye = detail::uniform_vec(camera_rng, config.camera_region_min, config.camera_region_max);
    const std::size_t t = camera_rng.index(tray_count);
    const Vec3 target{camera_rng.uniform(tray_rect.x_min + 0.2 * tray_rect.width(),
                                         tray_rect.x_max - 0.2 * tray_rect.width()),
                      fridge.trays[t] + 0.05,
                      camera_rng.uniform(tray_rect.z_min + 0.2 * tray_rect.depth(),
                                         tray_rect.z_max - 0.2 * tray_rect.depth())};
    const CameraIntrinsics& k = config.intrinsics;
    scene.cameras.push_back({k.fx, k.fy, k.cx, k.cy, k.width, k.height, Camera::look_at(eye, target)});
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Scene document (version 1)

inline constexpr int kSceneFormatVersion = 1;

inline nlohmann::json vec_json(Vec3 v) { return nlohmann::json::array({v.x, v.y, v.z}); }

inline nlohmann::json pose_json(const Pose& p) {
  return {{"rotation", p.rotation.m}, {"translation", vec_json(p.translation)}};
}

inline nlohmann::json camera_json(const Camera& c) {
  return {{"fx", c.fx},         {"fy", c.fy},         {"cx", c.cx}, {"cy", c.cy}, {"width", c.width},
          {"height", c.height}, {"pose", pose_json(c.pose)}};
}

inline nlohmann::json scene_to_json(const Scene& s) {
  nlohmann::json j;
  j["version"] = kSceneFormatVersion;
  j["seed"] = s.seed;
  j["pattern"] = to_string(s.pattern);
  j["fridge"] = {{"width", s.fridge.width},
                 {"depth", s.fridge.depth},
                 {"height", s.fridge.height},
                 {"trays", s.fridge.trays},
                 {"tray_thickness", s.fridge.tray_thickness},
                 {"albedo", vec_json(s.fridge_albedo)}};
  j["ambient"] = s.ambient;
  j["objects"] = nlohmann::json::array();
  for (const SceneObject& o : s.objects)
    j["objects"].push_back({{"instance_id", o.instance_id},
                            {"model", o.model},
                            {"label", o.label},
                            {"tray", o.tray},
                            {"scale", o.scale},
                            {"albedo", vec_json(o.albedo)},
                            {"pose", pose_json(o.pose)},
                            {"footprint", {o.footprint.x_min, o.footprint.z_min, o.footprint.x_max, o.footprint.z_max}}});
  j["lights"] = nlohmann::json::array();
  for (const Light& l : s.lights)
    j["lights"].push_back({{"position", vec_json(l.position)}, {"intensity", vec_json(l.intensity)}});
  j["cameras"] = nlohmann::json::array();
  for (const Camera& c : s.cameras) j["cameras"].push_back(camera_json(c));
  return j;
}

}  // namespace synthfridge
