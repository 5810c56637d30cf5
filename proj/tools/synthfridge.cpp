// synthfridge: generate, encode, evaluate and sweep synthetic refrigerator
// detection datasets.
//
// Exit codes: 0 success, 1 usage, 2 configuration, 3 I/O, 4 validation
// (label errors, image-id mismatch), 5 generation failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "synthfridge/synthfridge.hpp"

namespace fs = std::filesystem;
using namespace synthfridge;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kConfig = 2, kIo = 3, kValidation = 4, kGeneration = 5 };

constexpr const char* kConfigDirEnv = "SYNTHFRIDGE_CONFIG_DIR";

nlohmann::json load_config_json(const std::string& config_arg) {
  const char* env = std::getenv(kConfigDirEnv);
  fs::path path;
  if (!config_arg.empty()) {
    path = config_arg;
    if (!fs::exists(path) && path.is_relative() && env) path = fs::path(env) / config_arg;
  } else if (env && fs::exists(fs::path(env) / "synthfridge.json")) {
    path = fs::path(env) / "synthfridge.json";
  } else {
    return config_to_json(GenerationConfig{});
  }
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

// "a.b.c=value"; value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  std::string pointer = "/" + assignment.substr(0, eq);
  for (char& c : pointer)
    if (c == '.') c = '/';
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  j[nlohmann::json::json_pointer(pointer)] = value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic refrigerator scenes with KITTI annotations"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "Config file (JSON); relative paths also searched in $" +
                                              std::string(kConfigDirEnv));
  app.add_option("--seed", seed, "Override the master seed");
  app.add_option("--workers", workers, "Worker threads (output does not depend on this)");
  app.add_option("--out", out, "Output directory (dataset for generate/encode, report for evaluate, root for sweep)");
  app.add_option("--set", overrides, "Override a config key, e.g. --set objects.max=12");

  auto* generate = app.add_subcommand("generate", "Render and annotate a dataset");
  auto* encode = app.add_subcommand("encode", "Write coverage grids for every label file");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score detections against ground-truth labels");
  auto* sweep_cmd = app.add_subcommand("sweep", "Generate nested datasets along one experiment axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  GenerationConfig cfg;
  try {
    nlohmann::json j = load_config_json(config_path);
    for (const auto& o : overrides) apply_override(j, o);
    if (seed) j["seed"] = *seed;
    if (workers) j["workers"] = *workers;
    if (!out.empty()) {
      if (encode->parsed())
        j["encode"]["dataset"] = out;
      else if (evaluate_cmd->parsed())
        j["evaluate"]["report_dir"] = out;
      else
        j["output_dir"] = out;
    }
    cfg = config_from_json(j);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  }

  try {
    if (generate->parsed()) {
      const auto result = generate_dataset(cfg);
      std::cout << "wrote " << result.images.size() << " images to " << result.root.string() << "\n";
    } else if (encode->parsed()) {
      const fs::path dataset = cfg.encode_dataset.empty() ? cfg.output_dir : cfg.encode_dataset;
      const auto result =
          encode_dataset(dataset, cfg.stride, cfg.compose.intrinsics.width, cfg.compose.intrinsics.height);
      std::cout << "encoded " << result.encoded.size() << " label files in " << dataset.string() << "\n";
      for (const auto& [file, msg] : result.errors) std::cerr << "error: " << file << ": " << msg << "\n";
      if (!result.errors.empty()) return kValidation;
    } else if (evaluate_cmd->parsed()) {
      if (cfg.eval_gt_dir.empty() || cfg.eval_det_dir.empty())
        throw ConfigError("evaluate.gt_dir and evaluate.det_dir must be set");
      const EvalReport report = evaluate_dirs(cfg.eval_gt_dir, cfg.eval_det_dir, cfg.eval_iou);
      std::cout << report_to_text(report);
      write_report(cfg.eval_report_dir.empty() ? fs::path("eval_report") : fs::path(cfg.eval_report_dir), report);
    } else if (sweep_cmd->parsed()) {
      const auto runs = sweep(cfg, cfg.sweep_axis, cfg.sweep_values);
      for (const auto& r : runs)
        std::cout << to_string(cfg.sweep_axis) << "=" << r.value << " -> " << r.root.string() << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const KeyError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const ParseError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kGeneration;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  }
  return kOk;
}
