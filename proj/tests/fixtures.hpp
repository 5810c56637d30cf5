#pragma once

// Hand-built scenes with known geometry. Objects stand in front of the
// fridge opening so nothing but other test objects can occlude them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "synthfridge/composer.hpp"
#include "synthfridge/config.hpp"
#include "synthfridge/meshio.hpp"

namespace fixture {

using namespace synthfridge;

// Camera at `eye` looking along world +z.
inline Camera straight_camera(Vec3 eye = {0, 0.3, -1.5}, int size = 512, double f = 450) {
  Camera c;
  c.fx = c.fy = f;
  c.cx = c.cy = size / 2.0;
  c.width = c.height = size;
  c.pose = Camera::look_at(eye, eye + Vec3{0, 0, 1});
  return c;
}

// Repository whose model i is a unit-height box with the given dims.
inline ModelRepository box_repository(std::vector<Vec3> dims) {
  ModelRepository repo;
  for (const Vec3& d : dims) repo.models.push_back({make_primitive(PrimitiveKind::box, d), "product", d.y, d.y});
  return repo;
}

inline Scene empty_scene(Camera cam = straight_camera()) {
  Scene s;
  s.cameras.push_back(cam);
  s.lights.push_back({{0, 0.6, -0.8}, {1, 1, 1}});
  s.ambient = 0.2;
  return s;
}

// Places model `model` with its base center at `base` (unit scale, no yaw).
inline SceneObject object_at(std::size_t model, std::uint16_t id, Vec3 base) {
  SceneObject o;
  o.model = model;
  o.instance_id = id;
  o.label = "product";
  o.albedo = {0.6, 0.3, 0.2};
  o.pose = {Mat3::identity(), base};
  return o;
}

// World point that projects to pixel (u, v) at camera depth `z`.
inline Vec3 unproject(const Camera& c, double u, double v, double z) {
  return c.pose.inverse().apply({(u - c.cx) / c.fx * z, (v - c.cy) / c.fy * z, z});
}

// Adds a thin box to `repo` whose front face projects onto the pixel
// rectangle [u0, u1) x [v0, v1) at camera depth z, and returns it placed.
inline SceneObject facing_box(ModelRepository& repo, const Camera& cam, std::uint16_t id, double u0, double v0,
                              double u1, double v1, double z) {
  const Vec3 a = unproject(cam, u0, v0, z), b = unproject(cam, u1, v1, z);
  const Vec3 dims{std::abs(a.x - b.x), std::abs(a.y - b.y), 1e-4};
  repo.models.push_back({make_primitive(PrimitiveKind::box, dims), "product", dims.y, dims.y});
  return object_at(repo.size() - 1, id, {(a.x + b.x) / 2, std::min(a.y, b.y), (a.z + b.z) / 2 + dims.z / 2});
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("synthfridge_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Relative path -> file bytes for every regular file below `root`.
inline std::map<std::string, std::string> read_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream is(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    out[std::filesystem::relative(e.path(), root).generic_string()] = ss.str();
  }
  return out;
}

// Small-image configuration so dataset tests stay fast.
inline GenerationConfig small_config(const std::filesystem::path& out, std::size_t images, int size = 128) {
  GenerationConfig c;
  c.output_dir = out.string();
  c.dataset_size = images;
  c.compose.intrinsics = {450.0 * size / 512, 450.0 * size / 512, size / 2.0, size / 2.0, size, size};
  return c;
}

}  // namespace fixture
