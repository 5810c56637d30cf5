#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>

#include "fixtures.hpp"
#include "synthfridge/pipeline.hpp"

namespace fs = std::filesystem;
using synthfridge::read_text;
using synthfridge::write_text;

namespace {

const std::string kSmall =
    " --set cameras.width=128 --set cameras.height=128 --set cameras.fx=112.5 --set cameras.fy=112.5"
    " --set cameras.cx=64 --set cameras.cy=64";

int run(const std::string& args) {
  const std::string cmd = std::string(SYNTHFRIDGE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("cli generate", "[cli]") {
  const fs::path root = fixture::scratch_dir("cli_gen");
  REQUIRE(run("generate --out " + q(root / "one") + " --set dataset_size=1" + kSmall) == 0);
  CHECK(fs::is_regular_file(root / "one/image_2/000000.png"));
  CHECK(fs::is_regular_file(root / "one/label_2/000000.txt"));
  CHECK(fs::is_regular_file(root / "one/manifest.json"));

  REQUIRE(run("generate --seed 5 --out " + q(root / "a") + " --set dataset_size=2" + kSmall) == 0);
  REQUIRE(run("generate --seed 5 --workers 2 --out " + q(root / "b") + " --set dataset_size=2" + kSmall) == 0);
  CHECK(fixture::read_tree(root / "a") == fixture::read_tree(root / "b"));
}

TEST_CASE("cli config handling", "[cli]") {
  const fs::path root = fixture::scratch_dir("cli_cfg");
  write_text(root / "cfg.json", R"({"version": 1, "dataset_size": 1, "cameras": {"width": 128, "height": 128,
    "fx": 112.5, "fy": 112.5, "cx": 64, "cy": 64}})");
  CHECK(run("generate --config " + q(root / "cfg.json") + " --out " + q(root / "out")) == 0);
  CHECK(fs::is_regular_file(root / "out/image_2/000000.png"));

  write_text(root / "bad.json", R"({"version": 1, "objects": {"min": 2}})");
  CHECK(run("generate --config " + q(root / "bad.json") + " --out " + q(root / "x")) == 2);
  write_text(root / "typo.json", R"({"version": 1, "datset_size": 3})");
  CHECK(run("generate --config " + q(root / "typo.json") + " --out " + q(root / "x")) == 2);
  CHECK(run("generate --config " + q(root / "missing.json")) == 2);
  CHECK(run("frobnicate") == 1);
  CHECK(run("") == 1);
}

TEST_CASE("cli encode", "[cli]") {
  const fs::path root = fixture::scratch_dir("cli_enc");
  fs::create_directories(root / "empty");
  CHECK(run("encode --out " + q(root / "empty")) == 0);

  fs::create_directories(root / "ok/label_2");
  write_text(root / "ok/label_2/000000.txt", "product 0.00 0 -10 100 100 200 200\n");
  CHECK(run("encode --out " + q(root / "ok")) == 0);
  CHECK(fs::is_regular_file(root / "ok/coverage/000000.cov"));

  fs::create_directories(root / "bad/label_2");
  write_text(root / "bad/label_2/000000.txt", "product 0 zero -10 100 100 200 200\n");
  CHECK(run("encode --out " + q(root / "bad")) == 4);
}

TEST_CASE("cli evaluate", "[cli]") {
  const fs::path root = fixture::scratch_dir("cli_eval");
  fs::create_directories(root / "gt");
  fs::create_directories(root / "empty");
  fs::create_directories(root / "other");
  write_text(root / "gt/000000.txt", "product 0 0 -10 0 0 50 50\n");
  write_text(root / "other/000009.txt", "product 0 0 -10 0 0 50 50\n");
  auto eval = [&](const fs::path& det, const fs::path& out) {
    return run("evaluate --set evaluate.gt_dir=" + q(root / "gt") + " --set evaluate.det_dir=" + q(det) + " --out " +
               q(out));
  };
  REQUIRE(eval(root / "gt", root / "r1") == 0);
  auto report = nlohmann::json::parse(read_text(root / "r1/report.json"));
  CHECK(report["map"] == 1.0);
  REQUIRE(eval(root / "empty", root / "r2") == 0);
  report = nlohmann::json::parse(read_text(root / "r2/report.json"));
  CHECK(report["recall"] == 0.0);
  CHECK(eval(root / "other", root / "r3") == 4);
  CHECK(run("evaluate") == 2);
}

TEST_CASE("cli sweep", "[cli]") {
  const fs::path root = fixture::scratch_dir("cli_sweep");
  REQUIRE(run("sweep --out " + q(root / "s") + " --set sweep.axis=dataset_size --set 'sweep.values=[1,2]'" + kSmall) == 0);
  const auto small = fixture::read_tree(root / "s/dataset_size_1");
  const auto large = fixture::read_tree(root / "s/dataset_size_2");
  for (const auto& [path, bytes] : small)
    if (path != "manifest.json") CHECK(large.at(path) == bytes);
  CHECK(run("sweep --out " + q(root / "t") + " --set 'sweep.values=[2,1]'" + kSmall) == 2);
  CHECK(run("sweep --out " + q(root / "u") + " --set sweep.axis=colour --set 'sweep.values=[1]'" + kSmall) == 2);
}
