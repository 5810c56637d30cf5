#pragma once

// GenerationConfig: the single declarative description of a dataset run.
// Stored as JSON; unknown keys are rejected so typos cannot silently fall
// back to defaults.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "annotate.hpp"
#include "composer.hpp"
#include "detector_math.hpp"
#include "errors.hpp"
#include "meshio.hpp"

namespace synthfridge {

inline constexpr int kConfigVersion = 1;

struct RepositoryConfig {
  std::size_t procedural_count = 400;  // used when obj_dir is empty
  std::uint64_t seed = 0x5EEDF00DULL;
  std::string obj_dir;  // *.obj files, loaded in file-name order
  std::string label = "product";
  double min_height = 0.1, max_height = 0.25;  // for OBJ models
};

enum class SweepAxis { dataset_size, dictionary_size };

struct GenerationConfig {
  std::uint64_t seed = 1;
  std::size_t dataset_size = 10;
  std::size_t dictionary_size = 200;
  std::string output_dir = "dataset";
  int workers = 1;

  RepositoryConfig repository;
  ComposeConfig compose;
  AnnotateConfig annotate;
  DecodeParams decode;
  int stride = 16;
  double eval_iou = 0.5;

  // Command inputs.
  std::string encode_dataset;  // defaults to output_dir
  std::string eval_gt_dir, eval_det_dir, eval_report_dir;
  SweepAxis sweep_axis = SweepAxis::dataset_size;
  std::vector<std::size_t> sweep_values;
};

namespace detail {

inline Vec3 vec_from(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + " must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

class Reader {
 public:
  Reader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, _] : j_.items())
      if (!used_.contains(k)) throw ConfigError("unknown config key '" + path_ + k + "'");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key '" + path_ + key + "': " + e.what());
    }
  }
  void get_vec(const char* key, Vec3& out) {
    used_.insert(key);
    if (j_.contains(key)) out = vec_from(j_.at(key), (path_ + key).c_str());
  }
  const nlohmann::json* child(const char* key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string path(const char* key) const { return path_ + key + "."; }

 private:
  std::string where() const { return path_.empty() ? std::string("config") : path_.substr(0, path_.size() - 1); }
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace detail

inline const char* to_string(SweepAxis a) { return a == SweepAxis::dataset_size ? "dataset_size" : "dictionary_size"; }

inline SweepAxis sweep_axis_from(const std::string& s) {
  if (s == "dataset_size") return SweepAxis::dataset_size;
  if (s == "dictionary_size") return SweepAxis::dictionary_size;
  throw ConfigError("sweep axis must be dataset_size or dictionary_size, got '" + s + "'");
}

inline void validate_config(const GenerationConfig& c) {
  if (c.dataset_size < 1) throw ConfigError("dataset_size must be >= 1");
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  if (c.output_dir.empty()) throw ConfigError("output_dir must be set");
  if (c.repository.obj_dir.empty() && c.dictionary_size > c.repository.procedural_count)
    throw ConfigError("dictionary_size " + std::to_string(c.dictionary_size) + " exceeds repository size " +
                      std::to_string(c.repository.procedural_count));
  if (c.dictionary_size < 1) throw ConfigError("dictionary_size must be >= 1");
  if (!(c.repository.min_height > 0 && c.repository.min_height <= c.repository.max_height))
    throw ConfigError("repository height range invalid");
  validate_compose_config(c.compose);
  validate_annotate_config(c.annotate);
  try {
    validate_decode_params(c.decode);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (c.stride <= 0 || c.compose.intrinsics.width % c.stride != 0 || c.compose.intrinsics.height % c.stride != 0)
    throw ConfigError("stride must divide the image size");
  if (!(0 < c.eval_iou && c.eval_iou < 1)) throw ConfigError("eval iou must be in (0, 1)");
  for (std::size_t i = 1; i < c.sweep_values.size(); ++i)
    if (!(c.sweep_values[i - 1] < c.sweep_values[i])) throw ConfigError("sweep values must be strictly ascending");
}

inline GenerationConfig config_from_json(const nlohmann::json& j) {
  GenerationConfig c;
  {
    detail::Reader r(j, "");
    int version = kConfigVersion;
    r.get("version", version);
    if (version != kConfigVersion) throw ConfigError("unsupported config version " + std::to_string(version));
    r.get("seed", c.seed);
    r.get("dataset_size", c.dataset_size);
    r.get("dictionary_size", c.dictionary_size);
    r.get("output_dir", c.output_dir);
    r.get("workers", c.workers);

    if (const auto* s = r.child("repository")) {
      detail::Reader q(*s, r.path("repository"));
      q.get("procedural_count", c.repository.procedural_count);
      q.get("seed", c.repository.seed);
      q.get("obj_dir", c.repository.obj_dir);
      q.get("label", c.repository.label);
      q.get("min_height", c.repository.min_height);
      q.get("max_height", c.repository.max_height);
    }
    if (const auto* s = r.child("objects")) {
      detail::Reader q(*s, r.path("objects"));
      q.get("min", c.compose.min_objects);
      q.get("max", c.compose.max_objects);
    }
    if (const auto* s = r.child("placement")) {
      detail::Reader q(*s, r.path("placement"));
      if (const auto* w = q.child("weights")) {
        detail::Reader wq(*w, q.path("weights"));
        wq.get("grid", c.compose.pattern_weights[0]);
        wq.get("random", c.compose.pattern_weights[1]);
        wq.get("binpack", c.compose.pattern_weights[2]);
      }
      q.get("grid_pitch", c.compose.grid_pitch);
      q.get("attempts", c.compose.placement_attempts);
    }
    if (const auto* s = r.child("fridge")) {
      detail::Reader q(*s, r.path("fridge"));
      FridgeSpec& f = c.compose.fridge;
      q.get("width", f.width);
      q.get("depth", f.depth);
      q.get("height", f.height);
      q.get("trays", f.trays);
      q.get("tray_thickness", f.tray_thickness);
      q.get("tray_margin", f.tray_margin);
      q.get_vec("albedo_min", f.albedo_min);
      q.get_vec("albedo_max", f.albedo_max);
    }
    if (const auto* s = r.child("lights")) {
      detail::Reader q(*s, r.path("lights"));
      q.get("min", c.compose.min_lights);
      q.get("max", c.compose.max_lights);
      q.get("intensity_min", c.compose.light_intensity_min);
      q.get("intensity_max", c.compose.light_intensity_max);
      q.get("ambient_min", c.compose.ambient_min);
      q.get("ambient_max", c.compose.ambient_max);
    }
    if (const auto* s = r.child("cameras")) {
      detail::Reader q(*s, r.path("cameras"));
      q.get("min", c.compose.min_cameras);
      q.get("max", c.compose.max_cameras);
      q.get_vec("region_min", c.compose.camera_region_min);
      q.get_vec("region_max", c.compose.camera_region_max);
      CameraIntrinsics& k = c.compose.intrinsics;
      q.get("fx", k.fx);
      q.get("fy", k.fy);
      q.get("cx", k.cx);
      q.get("cy", k.cy);
      q.get("width", k.width);
      q.get("height", k.height);
    }
    if (const auto* s = r.child("annotate")) {
      detail::Reader q(*s, r.path("annotate"));
      q.get("max_truncation", c.annotate.max_truncation);
      q.get("min_pixels", c.annotate.min_pixels);
      q.get("partly_visible", c.annotate.partly_visible);
      q.get("largely_visible", c.annotate.largely_visible);
    }
    if (const auto* s = r.child("decode")) {
      detail::Reader q(*s, r.path("decode"));
      q.get("threshold", c.decode.threshold);
      q.get("cluster_iou", c.decode.cluster_iou);
      q.get("min_cluster", c.decode.min_cluster);
    }
    if (const auto* s = r.child("encode")) {
      detail::Reader q(*s, r.path("encode"));
      q.get("stride", c.stride);
      q.get("dataset", c.encode_dataset);
    }
    if (const auto* s = r.child("evaluate")) {
      detail::Reader q(*s, r.path("evaluate"));
      q.get("iou", c.eval_iou);
      q.get("gt_dir", c.eval_gt_dir);
      q.get("det_dir", c.eval_det_dir);
      q.get("report_dir", c.eval_report_dir);
    }
    if (const auto* s = r.child("sweep")) {
      detail::Reader q(*s, r.path("sweep"));
      std::string axis = to_string(c.sweep_axis);
      q.get("axis", axis);
      c.sweep_axis = sweep_axis_from(axis);
      q.get("values", c.sweep_values);
    }
  }
  validate_config(c);
  return c;
}

inline nlohmann::json config_to_json(const GenerationConfig& c) {
  auto vec = [](Vec3 v) { return nlohmann::json::array({v.x, v.y, v.z}); };
  const ComposeConfig& k = c.compose;
  return {
      {"version", kConfigVersion},
      {"seed", c.seed},
      {"dataset_size", c.dataset_size},
      {"dictionary_size", c.dictionary_size},
      {"output_dir", c.output_dir},
      {"workers", c.workers},
      {"repository",
       {{"procedural_count", c.repository.procedural_count},
        {"seed", c.repository.seed},
        {"obj_dir", c.repository.obj_dir},
        {"label", c.repository.label},
        {"min_height", c.repository.min_height},
        {"max_height", c.repository.max_height}}},
      {"objects", {{"min", k.min_objects}, {"max", k.max_objects}}},
      {"placement",
       {{"weights", {{"grid", k.pattern_weights[0]}, {"random", k.pattern_weights[1]}, {"binpack", k.pattern_weights[2]}}},
        {"grid_pitch", k.grid_pitch},
        {"attempts", k.placement_attempts}}},
      {"fridge",
       {{"width", k.fridge.width},
        {"depth", k.fridge.depth},
        {"height", k.fridge.height},
        {"trays", k.fridge.trays},
        {"tray_thickness", k.fridge.tray_thickness},
        {"tray_margin", k.fridge.tray_margin},
        {"albedo_min", vec(k.fridge.albedo_min)},
        {"albedo_max", vec(k.fridge.albedo_max)}}},
      {"lights",
       {{"min", k.min_lights},
        {"max", k.max_lights},
        {"intensity_min", k.light_intensity_min},
        {"intensity_max", k.light_intensity_max},
        {"ambient_min", k.ambient_min},
        {"ambient_max", k.ambient_max}}},
      {"cameras",
       {{"min", k.min_cameras},
        {"max", k.max_cameras},
        {"region_min", vec(k.camera_region_min)},
        {"region_max", vec(k.camera_region_max)},
        {"fx", k.intrinsics.fx},
        {"fy", k.intrinsics.fy},
        {"cx", k.intrinsics.cx},
        {"cy", k.intrinsics.cy},
        {"width", k.intrinsics.width},
        {"height", k.intrinsics.height}}},
      {"annotate",
       {{"max_truncation", c.annotate.max_truncation},
        {"min_pixels", c.annotate.min_pixels},
        {"partly_visible", c.annotate.partly_visible},
        {"largely_visible", c.annotate.largely_visible}}},
      {"decode",
       {{"threshold", c.decode.threshold}, {"cluster_iou", c.decode.cluster_iou}, {"min_cluster", c.decode.min_cluster}}},
      {"encode", {{"stride", c.stride}, {"dataset", c.encode_dataset}}},
      {"evaluate",
       {{"iou", c.eval_iou}, {"gt_dir", c.eval_gt_dir}, {"det_dir", c.eval_det_dir}, {"report_dir", c.eval_report_dir}}},
      {"sweep", {{"axis", to_string(c.sweep_axis)}, {"values", c.sweep_values}}},
  };
}

inline GenerationConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

// FNV-1a over the canonical JSON of the fields that shape image content
// (command inputs, output location and worker count excluded).
inline std::string config_hash(const GenerationConfig& c) {
  nlohmann::json j = config_to_json(c);
  for (const char* k : {"output_dir", "workers", "encode", "evaluate", "sweep", "dataset_size"}) j.erase(k);
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline ModelRepository load_repository(const RepositoryConfig& rc) {
  if (rc.obj_dir.empty()) return make_procedural_repository(rc.procedural_count, rc.seed, rc.label);
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(rc.obj_dir, ec))
    if (e.is_regular_file() && e.path().extension() == ".obj") files.push_back(e.path());
  if (ec) throw IoError("cannot list " + rc.obj_dir + ": " + ec.message());
  std::sort(files.begin(), files.end());
  ModelRepository repo;
  for (const auto& f : files) {
    std::ifstream is(f);
    std::stringstream ss;
    ss << is.rdbuf();
    try {
      repo.models.push_back({parse_obj(ss.str(), f.stem().string()), rc.label, rc.min_height, rc.max_height});
    } catch (const Error& e) {
      throw ConfigError(f.string() + ": " + e.what());
    }
  }
  validate_repository(repo);
  return repo;
}

}  // namespace synthfridge
