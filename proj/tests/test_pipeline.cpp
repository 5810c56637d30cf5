#include <catch2/catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "synthfridge/pipeline.hpp"

using namespace synthfridge;
namespace fs = std::filesystem;

namespace {

std::map<std::string, std::string> without_manifest(std::map<std::string, std::string> t) {
  t.erase("manifest.json");
  return t;
}

}  // namespace

TEST_CASE("config JSON round trip and validation", "[config]") {
  GenerationConfig c;
  c.seed = 99;
  c.compose.grid_pitch = 0.12;
  c.sweep_values = {10, 50};
  const auto j = config_to_json(c);
  CHECK(config_to_json(config_from_json(j)) == j);

  auto bad = j;
  bad["objects"]["maximum"] = 3;
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = j;
  bad["version"] = 2;
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = j;
  bad["encode"]["stride"] = 15;
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);

  GenerationConfig moved = c;
  moved.output_dir = "elsewhere";
  moved.workers = 4;
  CHECK(config_hash(moved) == config_hash(c));
  moved.seed = 100;
  CHECK(config_hash(moved) != config_hash(c));
}

TEST_CASE("generate writes a complete dataset", "[pipeline]") {
  const fs::path out = fixture::scratch_dir("gen_one");
  const auto r = generate_dataset(fixture::small_config(out, 1));
  REQUIRE(r.images.size() == 1);
  for (const char* f : {"image_2/000000.png", "label_2/000000.txt", "instance/000000.png", "depth/000000.f32",
                        "meta/000000.json", "manifest.json"})
    CHECK(fs::is_regular_file(out / f));
  const auto png = read_png(out / "image_2/000000.png");
  CHECK(png.width == 128);
  CHECK(png.channels == 3);
  const auto manifest = nlohmann::json::parse(read_text(out / "manifest.json"));
  CHECK(manifest["images"].size() == 1);
  // Label file parses and every box lies inside the image.
  for (const auto& a : parse_kitti(read_text(out / "label_2/000000.txt"))) {
    CHECK(a.bbox.x1() >= 0);
    CHECK(a.bbox.x2() <= 128);
  }
}

TEST_CASE("generate is reproducible and prefix-stable", "[pipeline]") {
  const fs::path a = fixture::scratch_dir("gen_a"), b = fixture::scratch_dir("gen_b"), c = fixture::scratch_dir("gen_c");
  auto cfg = fixture::small_config(a, 3);
  generate_dataset(cfg);
  cfg.output_dir = b.string();
  cfg.workers = 3;
  generate_dataset(cfg);
  CHECK(fixture::read_tree(a) == fixture::read_tree(b));

  cfg.output_dir = c.string();
  cfg.dataset_size = 6;
  cfg.workers = 2;
  generate_dataset(cfg);
  const auto small = without_manifest(fixture::read_tree(a));
  const auto large = fixture::read_tree(c);
  for (const auto& [path, bytes] : small) {
    REQUIRE(large.contains(path));
    CHECK(large.at(path) == bytes);
  }
  CHECK(large.size() > small.size());
}

TEST_CASE("encode_dataset", "[pipeline]") {
  SECTION("empty dataset is a no-op") {
    const fs::path d = fixture::scratch_dir("enc_empty");
    const auto r = encode_dataset(d, 16, 512, 512);
    CHECK(r.encoded.empty());
    CHECK(r.errors.empty());
  }
  SECTION("known label produces the expected grid") {
    const fs::path d = fixture::scratch_dir("enc_known");
    fs::create_directories(d / "label_2");
    write_text(d / "label_2/000000.txt", "product 0.00 0 -10 100 100 200 200\n");
    const auto r = encode_dataset(d, 16, 512, 512);
    REQUIRE(r.encoded.size() == 1);
    std::ifstream is(d / "coverage/000000.cov", std::ios::binary);
    const CoverageGrid g = read_coverage_grid(is);
    CHECK(std::count(g.coverage.begin(), g.coverage.end(), 1.0) == 36);
  }
  SECTION("corrupt label is reported") {
    const fs::path d = fixture::scratch_dir("enc_bad");
    fs::create_directories(d / "label_2");
    write_text(d / "label_2/000000.txt", "product 0 0\n");
    write_text(d / "label_2/000001.txt", "product 0.00 0 -10 100 100 200 200\n");
    const auto r = encode_dataset(d, 16, 512, 512);
    CHECK(r.encoded == std::vector<std::string>{"000001"});
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].first.find("000000.txt") != std::string::npos);
  }
}

TEST_CASE("evaluate_dirs", "[pipeline]") {
  const fs::path root = fixture::scratch_dir("eval");
  fs::create_directories(root / "gt");
  fs::create_directories(root / "det");
  fs::create_directories(root / "empty");
  write_text(root / "gt/a.txt", "product 0 0 -10 0 0 50 50\nproduct 0 0 -10 100 100 160 170\n");
  write_text(root / "gt/b.txt", "product 0 0 -10 10 10 90 90\n");
  SECTION("ground truth as detections") {
    CHECK(evaluate_dirs(root / "gt", root / "gt", 0.5).map == 1.0);
  }
  SECTION("empty detection directory") {
    const auto r = evaluate_dirs(root / "gt", root / "empty", 0.5);
    CHECK(r.recall == 0);
    CHECK(r.fn == 3);
  }
  SECTION("detections with scores") {
    write_text(root / "det/a.txt", detections_to_kitti({{BBox2D(0, 0, 50, 50), 0.9}, {BBox2D(300, 300, 310, 310), 0.2}}));
    write_text(root / "det/b.txt", "");
    const auto r = evaluate_dirs(root / "gt", root / "det", 0.5);
    CHECK(r.tp == 1);
    CHECK(r.fp == 1);
    CHECK(r.fn == 2);
    write_report(root / "report", r);
    CHECK(fs::is_regular_file(root / "report/report.json"));
  }
  SECTION("mismatched ids") {
    write_text(root / "det/a.txt", "");
    write_text(root / "det/z.txt", "");
    CHECK_THROWS_AS(evaluate_dirs(root / "gt", root / "det", 0.5), KeyError);
  }
}

TEST_CASE("sweep", "[pipeline]") {
  SECTION("dataset sizes share prefixes") {
    const fs::path root = fixture::scratch_dir("sweep_ds");
    const auto runs = sweep(fixture::small_config(root, 1), SweepAxis::dataset_size, {2, 4});
    REQUIRE(runs.size() == 2);
    const auto small = without_manifest(fixture::read_tree(runs[0].root));
    const auto large = fixture::read_tree(runs[1].root);
    for (const auto& [path, bytes] : small) CHECK(large.at(path) == bytes);
    CHECK(runs[0].root == root / "dataset_size_2");
  }
  SECTION("dictionary sizes are nested repository prefixes") {
    const fs::path root = fixture::scratch_dir("sweep_dict");
    const auto runs = sweep(fixture::small_config(root, 2), SweepAxis::dictionary_size, {10, 200});
    REQUIRE(runs.size() == 2);
    for (const auto& r : runs) {
      const auto m = nlohmann::json::parse(read_text(r.root / "manifest.json"));
      CHECK(m["dictionary_size"] == r.value);
      for (const auto& f : fs::directory_iterator(r.root / "meta")) {
        const auto meta = nlohmann::json::parse(read_text(f.path()));
        for (const auto& o : meta["scene"]["objects"]) CHECK(o["model"].get<std::size_t>() < r.value);
      }
    }
  }
  SECTION("single value") {
    const fs::path root = fixture::scratch_dir("sweep_one");
    CHECK(sweep(fixture::small_config(root, 1), SweepAxis::dataset_size, {1}).size() == 1);
  }
  SECTION("values must ascend") {
    const fs::path root = fixture::scratch_dir("sweep_bad");
    CHECK_THROWS_AS(sweep(fixture::small_config(root, 1), SweepAxis::dataset_size, {50, 10}), ConfigError);
    CHECK_THROWS_AS(sweep(fixture::small_config(root, 1), SweepAxis::dataset_size, {}), ConfigError);
  }
}
