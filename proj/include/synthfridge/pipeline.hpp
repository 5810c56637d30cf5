#pragma once

// Dataset-level operations behind the command-line tool: generation,
// coverage encoding, evaluation and experiment sweeps.
//
// Dataset layout (version 1):
//   image_2/<id>.png    8-bit RGB render
//   label_2/<id>.txt    KITTI labels
//   instance/<id>.png   16-bit instance ids (0 = fridge / background)
//   depth/<id>.f32      float32 LE depth, row-major, +inf where empty
//   meta/<id>.json      sidecar: image id, scene seed, camera, scene
//   manifest.json       ids, seeds, config hash
//   coverage/<id>.cov   written by encode
// Image ids are 6-digit zero-padded indices. Image i is rendered from the
// scene seeded derive_seed(master seed, i), so the first k images of any
// run with the same configuration and seed are identical files.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "annotate.hpp"
#include "composer.hpp"
#include "config.hpp"
#include "detector_math.hpp"
#include "errors.hpp"
#include "evalkit.hpp"
#include "image_io.hpp"
#include "renderer.hpp"

namespace synthfridge {

namespace fs = std::filesystem;

inline constexpr int kManifestVersion = 1;

inline std::string image_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return buf;
}

inline std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write " + p.string());
  os << s;
  if (!os) throw IoError("failed writing " + p.string());
}

struct ImageRecord {
  std::string id;
  std::uint64_t scene_seed = 0;
  std::size_t camera = 0;
  std::size_t objects = 0;
  std::size_t labelled = 0;  // visible objects (including DontCare)
};

// Everything that makes up one dataset image, before it touches the disk.
struct GeneratedImage {
  ImageRecord record;
  Scene scene;
  RenderOutput render;
  std::vector<ObjectAnnotation> annotations;
};

inline std::uint64_t scene_seed_for(std::uint64_t master_seed, std::size_t index) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(index));
}

inline GeneratedImage generate_image(const ModelRepository& repo, const GenerationConfig& cfg, std::size_t index) {
  GeneratedImage g;
  g.record.id = image_id(index);
  g.record.scene_seed = scene_seed_for(cfg.seed, index);
  g.scene = compose_scene(repo, cfg.compose, g.record.scene_seed);
  Rng pick(g.record.scene_seed, Stream::render_camera);
  g.record.camera = pick.index(g.scene.cameras.size());
  g.render = render(repo, g.scene, g.record.camera);
  g.annotations = annotate_view(repo, g.scene, g.record.camera, g.render, cfg.annotate);
  g.record.objects = g.scene.objects.size();
  g.record.labelled = g.annotations.size();
  return g;
}

inline void write_image(const fs::path& root, const GeneratedImage& g) {
  const RenderOutput& r = g.render;
  const std::string& id = g.record.id;
  write_png_rgb8(root / "image_2" / (id + ".png"), r.width, r.height, r.rgb);
  write_text(root / "label_2" / (id + ".txt"), write_kitti(g.annotations));
  write_png_gray16(root / "instance" / (id + ".png"), r.width, r.height, r.instance);
  write_raw_f32(root / "depth" / (id + ".f32"), r.depth);
  const nlohmann::json meta = {{"version", kManifestVersion},
                               {"image_id", id},
                               {"scene_seed", g.record.scene_seed},
                               {"camera_index", g.record.camera},
                               {"camera", camera_json(g.scene.cameras[g.record.camera])},
                               {"width", r.width},
                               {"height", r.height},
                               {"depth_format", "float32 little-endian, row-major, +inf where empty"},
                               {"instance_format", "16-bit grayscale PNG, 0 = fridge or background"},
                               {"scene", scene_to_json(g.scene)}};
  write_text(root / "meta" / (id + ".json"), meta.dump(2) + "\n");
}

// Creates the output tree and proves it is writable.
inline void prepare_output(const fs::path& root, std::initializer_list<const char*> subdirs) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  for (const char* s : subdirs) {
    fs::create_directories(root / s, ec);
    if (ec) throw IoError("cannot create " + (root / s).string() + ": " + ec.message());
  }
  const fs::path probe = root / ".write_probe";
  {
    std::ofstream os(probe);
    if (!os) throw IoError(root.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

// Runs fn(i) for i in [0, n) on `workers` threads. The first exception is
// rethrown after all threads stop.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

struct GenerateResult {
  fs::path root;
  std::vector<ImageRecord> images;
};

inline GenerateResult generate_dataset(const GenerationConfig& cfg, const ModelRepository& full_repo) {
  validate_config(cfg);
  const ModelRepository repo = full_repo.prefix(cfg.dictionary_size);
  const fs::path root = cfg.output_dir;
  prepare_output(root, {"image_2", "label_2", "instance", "depth", "meta"});

  GenerateResult result{root, std::vector<ImageRecord>(cfg.dataset_size)};
  parallel_for(cfg.dataset_size, cfg.workers, [&](std::size_t i) {
    const GeneratedImage g = generate_image(repo, cfg, i);
    write_image(root, g);
    result.images[i] = g.record;
  });

  nlohmann::json manifest = {{"format", "synthfridge-dataset"},
                             {"version", kManifestVersion},
                             {"config_hash", config_hash(cfg)},
                             {"seed", cfg.seed},
                             {"dataset_size", cfg.dataset_size},
                             {"dictionary_size", cfg.dictionary_size},
                             {"image_width", cfg.compose.intrinsics.width},
                             {"image_height", cfg.compose.intrinsics.height},
                             {"images", nlohmann::json::array()}};
  for (const ImageRecord& r : result.images)
    manifest["images"].push_back(
        {{"id", r.id}, {"scene_seed", r.scene_seed}, {"camera", r.camera}, {"objects", r.objects}, {"labels", r.labelled}});
  write_text(root / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

inline GenerateResult generate_dataset(const GenerationConfig& cfg) {
  validate_config(cfg);
  return generate_dataset(cfg, load_repository(cfg.repository));
}

// Sorted stems of the files in `dir` with extension `ext`; empty when the
// directory does not exist.
inline std::vector<std::string> list_ids(const fs::path& dir, const std::string& ext) {
  std::vector<std::string> ids;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return ids;
  for (const auto& e : fs::directory_iterator(dir, ec))
    if (e.is_regular_file() && e.path().extension() == ext) ids.push_back(e.path().stem().string());
  if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct EncodeResult {
  std::vector<std::string> encoded;
  std::vector<std::pair<std::string, std::string>> errors;  // file, message
};

// Writes coverage/<id>.cov for every label file. Images without a label file
// and labels that fail to parse are reported and skipped.
inline EncodeResult encode_dataset(const fs::path& dataset, int stride, int width, int height) {
  if (stride <= 0 || width % stride != 0 || height % stride != 0)
    throw ConfigError("stride must divide the image size");
  EncodeResult result;
  const auto labels = list_ids(dataset / "label_2", ".txt");
  const auto images = list_ids(dataset / "image_2", ".png");
  for (const auto& id : images)
    if (!std::binary_search(labels.begin(), labels.end(), id))
      result.errors.push_back({(dataset / "label_2" / (id + ".txt")).string(), "missing label file"});
  if (labels.empty()) return result;

  prepare_output(dataset, {"coverage"});
  for (const auto& id : labels) {
    const fs::path file = dataset / "label_2" / (id + ".txt");
    try {
      const auto annotations = parse_kitti(read_text(file));
      const CoverageGrid grid = encode_coverage(annotations, stride, width, height);
      std::ofstream os(dataset / "coverage" / (id + ".cov"), std::ios::binary);
      write_coverage_grid(os, grid);
      if (!os) throw IoError("failed writing coverage for " + id);
      result.encoded.push_back(id);
    } catch (const Error& e) {
      result.errors.push_back({file.string(), e.what()});
    }
  }
  return result;
}

inline std::map<std::string, std::vector<ObjectAnnotation>> load_ground_truth(const fs::path& dir) {
  std::map<std::string, std::vector<ObjectAnnotation>> out;
  for (const auto& id : list_ids(dir, ".txt")) {
    const fs::path f = dir / (id + ".txt");
    try {
      out[id] = parse_kitti(read_text(f));
    } catch (const ParseError& e) {
      throw ParseError(e.line(), e.column(), f.string() + ": " + e.what());
    }
  }
  return out;
}

// Detection files are KITTI lines with a 16th confidence field (1.0 when
// absent). DontCare lines are skipped.
inline std::map<std::string, std::vector<Detection>> load_detections(const fs::path& dir) {
  std::map<std::string, std::vector<Detection>> out;
  for (const auto& id : list_ids(dir, ".txt")) {
    const fs::path f = dir / (id + ".txt");
    auto& dets = out[id];
    try {
      for (const KittiRecord& r : parse_kitti_records(read_text(f))) {
        if (r.type == kDontCare) continue;
        if (!BBox2D::valid(r.bbox[0], r.bbox[1], r.bbox[2], r.bbox[3])) continue;
        dets.push_back({BBox2D(r.bbox[0], r.bbox[1], r.bbox[2], r.bbox[3]), std::clamp(r.score.value_or(1.0), 0.0, 1.0)});
      }
    } catch (const ParseError& e) {
      throw ParseError(e.line(), e.column(), f.string() + ": " + e.what());
    }
  }
  return out;
}

inline std::string detections_to_kitti(const std::vector<Detection>& dets, const std::string& label = "product") {
  std::string out;
  for (const Detection& d : dets) {
    KittiRecord r;
    r.type = label;
    r.bbox = {d.bbox.x1(), d.bbox.y1(), d.bbox.x2(), d.bbox.y2()};
    r.score = d.confidence;
    out += format_record(r);
  }
  return out;
}

// Scores a detection directory against a label directory. An empty
// detection directory stands for a detector that reported nothing;
// otherwise the id sets must match.
inline EvalReport evaluate_dirs(const fs::path& gt_dir, const fs::path& det_dir, double iou_thresh) {
  if (!fs::is_directory(gt_dir)) throw IoError("ground-truth directory " + gt_dir.string() + " does not exist");
  const auto gts = load_ground_truth(gt_dir);
  auto dets = load_detections(det_dir);
  if (dets.empty())
    for (const auto& [id, _] : gts) dets[id];
  return evaluate(dets, gts, iou_thresh);
}

inline void write_report(const fs::path& dir, const EvalReport& r) {
  prepare_output(dir, {});
  write_text(dir / "report.json", report_to_json(r).dump(2) + "\n");
  write_text(dir / "per_image.csv", report_to_csv(r));
}

struct SweepEntry {
  std::size_t value;
  fs::path root;
};

// One dataset per value under <output_dir>/<axis>_<value>. Dataset-size
// sweeps share image prefixes; dictionary-size sweeps use nested prefixes
// of the same repository.
inline std::vector<SweepEntry> sweep(const GenerationConfig& base, SweepAxis axis, const std::vector<std::size_t>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i - 1] < values[i])) throw ConfigError("sweep values must be strictly ascending");
  std::vector<GenerationConfig> runs;
  for (std::size_t v : values) {
    GenerationConfig c = base;
    c.sweep_values.clear();
    (axis == SweepAxis::dataset_size ? c.dataset_size : c.dictionary_size) = v;
    c.output_dir = (fs::path(base.output_dir) / (std::string(to_string(axis)) + "_" + std::to_string(v))).string();
    validate_config(c);
    runs.push_back(std::move(c));
  }
  const ModelRepository repo = load_repository(base.repository);
  std::vector<SweepEntry> out;
  for (const GenerationConfig& c : runs) {
    generate_dataset(c, repo);
    out.push_back({axis == SweepAxis::dataset_size ? c.dataset_size : c.dictionary_size, c.output_dir});
  }
  return out;
}

}  // namespace synthfridge
