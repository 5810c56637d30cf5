#pragma once

// Triangle meshes: a Wavefront OBJ subset reader/writer and procedural
// stand-ins (box, cylinder, capsule) for packaged products.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "seed.hpp"

namespace synthfridge {

using Triangle = std::array<std::uint32_t, 3>;

struct Mesh {
  std::vector<Vec3> vertices;  // meters, y-up
  std::vector<Triangle> triangles;
  std::string name;

  friend bool operator==(const Mesh&, const Mesh&) = default;
};

struct Aabb3 {
  Vec3 min, max;
  Vec3 extent() const { return max - min; }
};

inline Aabb3 bounds(const std::vector<Vec3>& points) {
  Aabb3 b{{INFINITY, INFINITY, INFINITY}, {-INFINITY, -INFINITY, -INFINITY}};
  for (const Vec3& p : points)
    for (int a = 0; a < 3; ++a) {
      b.min[a] = std::min(b.min[a], p[a]);
      b.max[a] = std::max(b.max[a], p[a]);
    }
  return b;
}

inline Aabb3 bounds(const Mesh& mesh) { return bounds(mesh.vertices); }

// Throws EmptyMeshError / IndexError / DomainError when an invariant fails.
inline void validate_mesh(const Mesh& mesh) {
  if (mesh.triangles.empty()) throw EmptyMeshError("mesh '" + mesh.name + "' has no triangles");
  for (const Vec3& v : mesh.vertices)
    if (!is_finite(v)) throw DomainError("mesh '" + mesh.name + "' has a non-finite vertex");
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    for (std::uint32_t i : mesh.triangles[t])
      if (i >= mesh.vertices.size())
        throw IndexError(0, "triangle " + std::to_string(t) + " references vertex " + std::to_string(i) + " of " +
                                std::to_string(mesh.vertices.size()));
  const Vec3 e = bounds(mesh).extent();
  const int positive = (e.x > 0) + (e.y > 0) + (e.z > 0);
  if (positive < 2) throw DomainError("mesh '" + mesh.name + "' is degenerate (extent on fewer than 2 axes)");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

}  // namespace detail

// Parses `v` and `f` records; everything else (vn, vt, o, g, s, mtllib,
// usemtl, comments) is skipped. Faces with more than three corners are
// fan-triangulated from their first corner. Negative indices count back from
// the most recent vertex.
inline Mesh parse_obj(std::string_view text, std::string name = "obj") {
  Mesh mesh;
  mesh.name = std::move(name);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;

    const std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tokens = detail::split_ws(line);
    if (tokens[0] == "v") {
      if (tokens.size() < 4 || tokens.size() > 5) throw ParseError(line_no, 0, "vertex needs 3 coordinates");
      Vec3 v;
      for (int a = 0; a < 3; ++a)
        if (!detail::parse_number(tokens[static_cast<std::size_t>(a) + 1], v[a]))
          throw ParseError(line_no, static_cast<std::size_t>(a) + 2,
                           "malformed coordinate '" + std::string(tokens[static_cast<std::size_t>(a) + 1]) + "'");
      if (!is_finite(v)) throw ParseError(line_no, 0, "non-finite vertex");
      mesh.vertices.push_back(v);
    } else if (tokens[0] == "f") {
      if (tokens.size() < 4) throw ParseError(line_no, 0, "face needs at least 3 corners");
      std::vector<std::uint32_t> corners;
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        const std::string_view ref = tokens[k].substr(0, tokens[k].find('/'));
        long long idx = 0;
        if (!detail::parse_number(ref, idx) || idx == 0)
          throw ParseError(line_no, k + 1, "malformed face index '" + std::string(tokens[k]) + "'");
        const long long count = static_cast<long long>(mesh.vertices.size());
        const long long resolved = idx > 0 ? idx - 1 : count + idx;
        if (resolved < 0 || resolved >= count)
          throw IndexError(line_no, "face index " + std::to_string(idx) + " out of range (" + std::to_string(count) +
                                        " vertices)");
        corners.push_back(static_cast<std::uint32_t>(resolved));
      }
      for (std::size_t k = 1; k + 1 < corners.size(); ++k)
        mesh.triangles.push_back({corners[0], corners[k], corners[k + 1]});
    }
  }
  if (mesh.triangles.empty()) throw EmptyMeshError("OBJ text contains no faces");
  validate_mesh(mesh);
  return mesh;
}

inline std::string serialize_obj(const Mesh& mesh) {
  std::string out = "o " + (mesh.name.empty() ? std::string("mesh") : mesh.name) + "\n";
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
    out += buf;
  }
  for (const Triangle& t : mesh.triangles) {
    std::snprintf(buf, sizeof buf, "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
    out += buf;
  }
  return out;
}

enum class PrimitiveKind { box, cylinder, capsule };

inline constexpr int kDefaultSegments = 16;

// Watertight primitive whose AABB spans [-dx/2, dx/2] x [0, dy] x [-dz/2, dz/2].
// Cylinders and capsules have elliptical cross-sections with radii dx/2, dz/2
// tessellated with `segments` sides (a multiple of 4 keeps the AABB exact).
// Capsule caps are half-ellipsoids of vertical radius min(dx, dy, dz) / 2.
inline Mesh make_primitive(PrimitiveKind kind, Vec3 dims, int segments = kDefaultSegments) {
  if (!(dims.x > 0 && dims.y > 0 && dims.z > 0) || !is_finite(dims))
    throw DomainError("primitive dimensions must be positive");
  if (segments < 4 || segments % 4 != 0) throw DomainError("segment count must be a positive multiple of 4");

  const double hx = dims.x / 2, hz = dims.z / 2, h = dims.y;
  Mesh m;
  const auto seg = static_cast<std::uint32_t>(segments);
  auto ring = [&](double y, double scale) {
    const auto start = static_cast<std::uint32_t>(m.vertices.size());
    for (std::uint32_t k = 0; k < seg; ++k) {
      const double a = 2.0 * std::numbers::pi * k / seg;
      // Snap the four axis-aligned directions so the extent is exact.
      double c = std::cos(a), s = std::sin(a);
      if (k * 4 % seg == 0) {
        c = std::round(c);
        s = std::round(s);
      }
      m.vertices.push_back({hx * scale * c, y, hz * scale * s});
    }
    return start;
  };
  // Quads between two rings; winding is outward for rings ordered bottom-up.
  auto band = [&](std::uint32_t lo, std::uint32_t hi) {
    for (std::uint32_t k = 0; k < seg; ++k) {
      const std::uint32_t k1 = (k + 1) % seg;
      m.triangles.push_back({lo + k, hi + k, lo + k1});
      m.triangles.push_back({lo + k1, hi + k, hi + k1});
    }
  };
  auto fan_bottom = [&](std::uint32_t center, std::uint32_t r) {
    for (std::uint32_t k = 0; k < seg; ++k) m.triangles.push_back({center, r + k, r + (k + 1) % seg});
  };
  auto fan_top = [&](std::uint32_t center, std::uint32_t r) {
    for (std::uint32_t k = 0; k < seg; ++k) m.triangles.push_back({center, r + (k + 1) % seg, r + k});
  };

  switch (kind) {
    case PrimitiveKind::box: {
      m.name = "box";
      for (int i = 0; i < 8; ++i)
        m.vertices.push_back({(i & 1) ? hx : -hx, (i & 2) ? h : 0.0, (i & 4) ? hz : -hz});
      // Two outward-facing triangles per face.
      const std::array<std::array<std::uint32_t, 4>, 6> faces{{
          {0, 4, 6, 2},  // -x
          {1, 3, 7, 5},  // +x
          {0, 1, 5, 4},  // -y
          {2, 6, 7, 3},  // +y
          {0, 2, 3, 1},  // -z
          {4, 5, 7, 6},  // +z
      }};
      for (const auto& f : faces) {
        m.triangles.push_back({f[0], f[1], f[2]});
        m.triangles.push_back({f[0], f[2], f[3]});
      }
      break;
    }
    case PrimitiveKind::cylinder: {
      m.name = "cylinder";
      const std::uint32_t lo = ring(0.0, 1.0);
      const std::uint32_t hi = ring(h, 1.0);
      band(lo, hi);
      const auto bc = static_cast<std::uint32_t>(m.vertices.size());
      m.vertices.push_back({0, 0, 0});
      const auto tc = static_cast<std::uint32_t>(m.vertices.size());
      m.vertices.push_back({0, h, 0});
      fan_bottom(bc, lo);
      fan_top(tc, hi);
      break;
    }
    case PrimitiveKind::capsule: {
      m.name = "capsule";
      const double cap = std::min({hx, hz, h / 2});
      const std::uint32_t lat = seg / 4;
      std::vector<std::uint32_t> rings;
      for (std::uint32_t j = 1; j <= lat; ++j) {
        const double phi = 0.5 * std::numbers::pi * j / lat;
        const double y = j == lat ? cap : cap * (1 - std::cos(phi));
        rings.push_back(ring(y, j == lat ? 1.0 : std::sin(phi)));
      }
      const bool straight = h - 2 * cap > 1e-9 * h;
      for (std::uint32_t j = straight ? lat : lat - 1; j >= 1; --j) {
        const double phi = 0.5 * std::numbers::pi * j / lat;
        const double y = j == lat ? h - cap : h - cap * (1 - std::cos(phi));
        rings.push_back(ring(y, j == lat ? 1.0 : std::sin(phi)));
      }
      for (std::size_t r = 0; r + 1 < rings.size(); ++r) band(rings[r], rings[r + 1]);
      const auto bp = static_cast<std::uint32_t>(m.vertices.size());
      m.vertices.push_back({0, 0, 0});
      const auto tp = static_cast<std::uint32_t>(m.vertices.size());
      m.vertices.push_back({0, h, 0});
      fan_bottom(bp, rings.front());
      fan_top(tp, rings.back());
      break;
    }
  }
  validate_mesh(m);
  return m;
}

struct ModelEntry {
  Mesh mesh;
  std::string label;
  double min_height = 0.1;  // meters
  double max_height = 0.25;
};

// The object dictionary sampled per scene. Its size is the dictionary-size
// experiment knob; prefixes of a repository are nested dictionaries.
struct ModelRepository {
  std::vector<ModelEntry> models;

  std::size_t size() const { return models.size(); }
  const ModelEntry& operator[](std::size_t i) const { return models.at(i); }

  ModelRepository prefix(std::size_t count) const {
    if (count == 0 || count > models.size())
      throw ConfigError("dictionary size " + std::to_string(count) + " outside [1, " + std::to_string(models.size()) +
                        "]");
    return {{models.begin(), models.begin() + static_cast<std::ptrdiff_t>(count)}};
  }
};

inline void validate_repository(const ModelRepository& repo) {
  if (repo.models.empty()) throw ConfigError("model repository is empty");
  for (const ModelEntry& e : repo.models) {
    if (e.label.empty()) throw ConfigError("model '" + e.mesh.name + "' has an empty class label");
    if (!(e.min_height > 0 && e.min_height <= e.max_height))
      throw ConfigError("model '" + e.mesh.name + "' has an invalid height range");
    validate_mesh(e.mesh);
  }
}

// Deterministic dictionary of cans, bottles and cartons with varied
// proportions. Model i depends only on (seed, i), so a smaller repository is a
// prefix of a larger one built with the same seed.
inline ModelRepository make_procedural_repository(std::size_t count, std::uint64_t seed = 0x5EEDF00DULL,
                                                  std::string label = "product") {
  ModelRepository repo;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    const auto kind = static_cast<PrimitiveKind>(i % 3);
    const double height = 1.0;
    Vec3 dims;
    double lo = 0.1, hi = 0.25;
    switch (kind) {
      case PrimitiveKind::box:  // cartons
        dims = {rng.uniform(0.3, 0.7), height, rng.uniform(0.2, 0.5)};
        lo = 0.08;
        hi = 0.22;
        break;
      case PrimitiveKind::cylinder: {  // cans and jars
        const double d = rng.uniform(0.35, 0.8);
        dims = {d, height, d};
        lo = 0.07;
        hi = 0.16;
        break;
      }
      case PrimitiveKind::capsule: {  // bottles
        const double d = rng.uniform(0.2, 0.35);
        dims = {d, height, d};
        lo = 0.15;
        hi = 0.26;
        break;
      }
    }
    Mesh mesh = make_primitive(kind, dims);
    mesh.name += "_" + std::to_string(i);
    repo.models.push_back({std::move(mesh), label, lo, hi});
  }
  return repo;
}

}  // namespace synthfridge
