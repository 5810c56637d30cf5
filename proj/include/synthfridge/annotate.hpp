#pragma once

// Per-object 2D annotations derived from instance maps, and KITTI label
// text I/O.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "composer.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "meshio.hpp"
#include "renderer.hpp"

namespace synthfridge {

enum class Occlusion : int { fully_visible = 0, partly_occluded = 1, largely_occluded = 2 };

struct ObjectAnnotation {
  std::string label;
  BBox2D bbox;
  double truncation = 0;  // fraction of the silhouette outside the frame
  Occlusion occlusion = Occlusion::fully_visible;
  bool ignore = false;  // excluded from coverage encoding and from scoring
  std::uint16_t instance_id = 0;
};

// Thresholds of the neglect rule. An object is ignored when its truncation
// exceeds `max_truncation`, it is largely occluded, or fewer than
// `min_pixels` of it are visible.
struct AnnotateConfig {
  double max_truncation = 0.3;
  std::size_t min_pixels = 25;
  double partly_visible = 0.9;   // visible fraction below this -> partly occluded
  double largely_visible = 0.5;  // visible fraction below this -> largely occluded
};

inline void validate_annotate_config(const AnnotateConfig& c) {
  if (!(0 <= c.max_truncation && c.max_truncation <= 1)) throw ConfigError("max_truncation must be in [0, 1]");
  if (!(0 < c.largely_visible && c.largely_visible <= c.partly_visible && c.partly_visible <= 1))
    throw ConfigError("visibility thresholds must satisfy 0 < largely <= partly <= 1");
}

struct VisibilityState {
  double visible_fraction = 1;
  double truncation = 0;
  Occlusion occlusion = Occlusion::fully_visible;
  bool ignore = false;
};

// `visible` is the object's pixel count in the full render; `solo` its counts
// when rendered alone.
inline VisibilityState classify_visibility(std::size_t visible, SoloCoverage solo, const AnnotateConfig& cfg) {
  VisibilityState s;
  s.visible_fraction =
      solo.in_frame > 0 ? std::min(1.0, static_cast<double>(visible) / static_cast<double>(solo.in_frame)) : 1.0;
  // (extended - in_frame) / extended keeps exact thresholds exact.
  s.truncation = solo.extended > 0 ? static_cast<double>(solo.extended - std::min(solo.in_frame, solo.extended)) /
                                         static_cast<double>(solo.extended)
                                   : 0.0;
  if (s.visible_fraction >= cfg.partly_visible)
    s.occlusion = Occlusion::fully_visible;
  else if (s.visible_fraction >= cfg.largely_visible)
    s.occlusion = Occlusion::partly_occluded;
  else
    s.occlusion = Occlusion::largely_occluded;
  s.ignore = s.truncation > cfg.max_truncation || s.occlusion == Occlusion::largely_occluded || visible < cfg.min_pixels;
  return s;
}

// Annotations in instance-id order. Boxes are the tight pixel bounds in the
// full instance map; objects with no visible pixels are dropped.
inline std::vector<ObjectAnnotation> annotate_scene(const Scene& scene, std::size_t camera_index,
                                                    const RenderOutput& full,
                                                    const std::map<std::uint16_t, SoloCoverage>& solos,
                                                    const AnnotateConfig& cfg = {}) {
  detail::camera_at(scene, camera_index);
  for (const SceneObject& o : scene.objects)
    if (!solos.contains(o.instance_id))
      throw IncompleteOracleError("missing solo render for instance " + std::to_string(o.instance_id));

  struct Bounds {
    std::size_t count = 0;
    int x0 = INT32_MAX, y0 = INT32_MAX, x1 = -1, y1 = -1;
  };
  std::map<std::uint16_t, Bounds> seen;
  for (int y = 0; y < full.height; ++y)
    for (int x = 0; x < full.width; ++x) {
      const std::uint16_t id = full.instance_at(x, y);
      if (id == 0) continue;
      Bounds& b = seen[id];
      ++b.count;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }

  std::vector<const SceneObject*> ordered;
  for (const SceneObject& o : scene.objects) ordered.push_back(&o);
  std::sort(ordered.begin(), ordered.end(),
            [](const SceneObject* a, const SceneObject* b) { return a->instance_id < b->instance_id; });

  std::vector<ObjectAnnotation> out;
  for (const SceneObject* o : ordered) {
    const auto it = seen.find(o->instance_id);
    if (it == seen.end()) continue;
    const Bounds& b = it->second;
    const VisibilityState v = classify_visibility(b.count, solos.at(o->instance_id), cfg);
    out.push_back({o->label, BBox2D(b.x0, b.y0, b.x1 + 1.0, b.y1 + 1.0), v.truncation, v.occlusion, v.ignore,
                   o->instance_id});
  }
  return out;
}

// Renders every solo oracle and annotates one camera view.
inline std::vector<ObjectAnnotation> annotate_view(const ModelRepository& repo, const Scene& scene,
                                                   std::size_t camera_index, const RenderOutput& full,
                                                   const AnnotateConfig& cfg = {}) {
  std::map<std::uint16_t, SoloCoverage> solos;
  for (const SceneObject& o : scene.objects) solos[o.instance_id] = measure_solo(repo, scene, camera_index, o.instance_id);
  return annotate_scene(scene, camera_index, full, solos, cfg);
}

// ---------------------------------------------------------------------------
// KITTI labels

inline constexpr std::string_view kDontCare = "DontCare";
inline constexpr double kAlphaSentinel = -10;
inline constexpr double kDimensionSentinel = -1;
inline constexpr double kLocationSentinel = -1;
inline constexpr double kRotationSentinel = -10;

// One line of a KITTI object label file. `score` is the optional 16th field
// used by detection files.
struct KittiRecord {
  std::string type;
  double truncated = 0;
  int occluded = 0;
  double alpha = kAlphaSentinel;
  std::array<double, 4> bbox{};  // left, top, right, bottom
  std::array<double, 3> dimensions{kDimensionSentinel, kDimensionSentinel, kDimensionSentinel};
  std::array<double, 3> location{kLocationSentinel, kLocationSentinel, kLocationSentinel};
  double rotation_y = kRotationSentinel;
  std::optional<double> score;
};

inline KittiRecord to_record(const ObjectAnnotation& a) {
  KittiRecord r;
  r.type = a.ignore ? std::string(kDontCare) : a.label;
  for (char& c : r.type)
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') c = '_';
  r.truncated = a.truncation;
  r.occluded = static_cast<int>(a.occlusion);
  r.bbox = {a.bbox.x1(), a.bbox.y1(), a.bbox.x2(), a.bbox.y2()};
  return r;
}

inline std::string format_record(const KittiRecord& r) {
  // + 0.0 turns -0.0 into 0.0 so no field prints as "-0.00".
  auto f = [](double v) { return v + 0.0; };
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s %.2f %d %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f", r.type.c_str(),
                f(r.truncated), r.occluded, f(r.alpha), f(r.bbox[0]), f(r.bbox[1]), f(r.bbox[2]), f(r.bbox[3]),
                f(r.dimensions[0]), f(r.dimensions[1]), f(r.dimensions[2]), f(r.location[0]), f(r.location[1]),
                f(r.location[2]), f(r.rotation_y));
  std::string line = buf;
  if (r.score) {
    std::snprintf(buf, sizeof buf, " %.4f", f(*r.score));
    line += buf;
  }
  return line + "\n";
}

// One line per annotation in instance-id order (stable for equal ids);
// neglected objects are written as DontCare.
inline std::string write_kitti(std::vector<ObjectAnnotation> annotations) {
  std::stable_sort(annotations.begin(), annotations.end(),
                   [](const ObjectAnnotation& a, const ObjectAnnotation& b) { return a.instance_id < b.instance_id; });
  std::string out;
  for (const ObjectAnnotation& a : annotations) out += format_record(to_record(a));
  return out;
}

// Parses every nonempty line. At least 8 fields (type through bbox) are
// required; fields 9-15 and the optional score are parsed when present and
// anything after the 16th field is ignored.
inline std::vector<KittiRecord> parse_kitti_records(std::string_view text) {
  std::vector<KittiRecord> out;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    const std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line_no;
    const auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() < 8)
      throw ArityError(line_no, 0, "expected at least 8 fields, found " + std::to_string(fields.size()));

    auto number = [&](std::size_t i) {
      double v = 0;
      if (!detail::parse_number(fields[i], v) || !std::isfinite(v))
        throw ParseError(line_no, i + 1, "non-numeric field '" + std::string(fields[i]) + "'");
      return v;
    };
    KittiRecord r;
    r.type = std::string(fields[0]);
    r.truncated = number(1);
    const double occ = number(2);
    if (occ != std::floor(occ)) throw ParseError(line_no, 3, "occlusion state must be an integer");
    r.occluded = static_cast<int>(occ);
    r.alpha = number(3);
    for (std::size_t k = 0; k < 4; ++k) r.bbox[k] = number(4 + k);
    for (std::size_t k = 0; k < 3 && 8 + k < fields.size(); ++k) r.dimensions[k] = number(8 + k);
    for (std::size_t k = 0; k < 3 && 11 + k < fields.size(); ++k) r.location[k] = number(11 + k);
    if (fields.size() > 14) r.rotation_y = number(14);
    if (fields.size() > 15) r.score = number(15);
    out.push_back(std::move(r));
  }
  return out;
}

// DontCare lines become ignored annotations with their flags clamped into
// range; other lines must carry a truncation in [0, 1] and an occlusion
// state in 0..3 (3, KITTI's "unknown", is read as largely occluded).
inline ObjectAnnotation to_annotation(const KittiRecord& r, std::size_t line_no = 0) {
  const bool dont_care = r.type == kDontCare;
  double t = r.truncated;
  int occ = r.occluded;
  if (dont_care) {
    t = std::clamp(t, 0.0, 1.0);
    occ = std::clamp(occ, 0, 2);
  } else {
    if (!(0 <= t && t <= 1)) throw ParseError(line_no, 2, "truncation outside [0, 1]");
    if (occ < 0 || occ > 3) throw ParseError(line_no, 3, "occlusion state outside 0..3");
    occ = std::min(occ, 2);
  }
  if (!BBox2D::valid(r.bbox[0], r.bbox[1], r.bbox[2], r.bbox[3]))
    throw ParseError(line_no, 5, "bounding box has no area");
  return {r.type, BBox2D(r.bbox[0], r.bbox[1], r.bbox[2], r.bbox[3]), t, static_cast<Occlusion>(occ), dont_care, 0};
}

inline std::vector<ObjectAnnotation> parse_kitti(std::string_view text) {
  const auto records = parse_kitti_records(text);
  std::vector<ObjectAnnotation> out;
  // Line numbers for semantic errors: recount nonempty lines.
  std::vector<std::size_t> lines;
  {
    std::size_t line_no = 0, pos = 0;
    while (pos < text.size()) {
      const auto end = text.find('\n', pos);
      const auto line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
      pos = end == std::string_view::npos ? text.size() : end + 1;
      ++line_no;
      if (!detail::split_ws(line).empty()) lines.push_back(line_no);
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) out.push_back(to_annotation(records[i], lines[i]));
  return out;
}

}  // namespace synthfridge
