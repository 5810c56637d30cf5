#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "oracles.hpp"
#include "synthfridge/detector_math.hpp"
#include "synthfridge/seed.hpp"

using namespace synthfridge;
using Catch::Approx;

namespace {

ObjectAnnotation gt(double x1, double y1, double x2, double y2, bool ignore = false) {
  return {"product", BBox2D(x1, y1, x2, y2), 0, Occlusion::fully_visible, ignore, 0};
}

CoverageGrid random_grid(Rng& rng, int gw, int gh, bool binary) {
  CoverageGrid g = CoverageGrid::zeros(gw, gh);
  for (std::size_t c = 0; c < g.cells(); ++c) {
    g.coverage[c] = binary ? static_cast<double>(rng.index(2)) : rng.uniform();
    for (double& v : g.boxes[c]) v = rng.uniform(0, 512);
  }
  return g;
}

}  // namespace

TEST_CASE("encode_coverage", "[detector]") {
  SECTION("no annotations") {
    const CoverageGrid g = encode_coverage({}, 16, 512, 512);
    CHECK(g.gw == 32);
    CHECK(g.gh == 32);
    for (double c : g.coverage) CHECK(c == 0);
  }
  SECTION("single box covers the cells whose centers it contains") {
    const std::vector<ObjectAnnotation> a{gt(100, 100, 200, 200)};
    const CoverageGrid g = encode_coverage(a, 16, 512, 512);
    std::size_t covered = 0;
    for (int cy = 0; cy < g.gh; ++cy)
      for (int cx = 0; cx < g.gw; ++cx) {
        const std::size_t i = g.cell(cx, cy);
        if (g.coverage[i] == 1.0) {
          ++covered;
          CHECK(g.boxes[i] == Corners{100, 100, 200, 200});
        } else {
          CHECK(g.boxes[i] == Corners{});
        }
      }
    CHECK(covered == 36);
  }
  SECTION("nested boxes: the inner one wins") {
    const std::vector<ObjectAnnotation> a{gt(0, 0, 320, 320), gt(96, 96, 160, 160)};
    const CoverageGrid g = encode_coverage(a, 16, 512, 512);
    CHECK(g.boxes[g.cell(7, 7)] == Corners{96, 96, 160, 160});
    CHECK(g.boxes[g.cell(1, 1)] == Corners{0, 0, 320, 320});
  }
  SECTION("ignored annotations are skipped") {
    const std::vector<ObjectAnnotation> a{gt(100, 100, 200, 200, true)};
    for (double c : encode_coverage(a).coverage) CHECK(c == 0);
  }
  SECTION("stride must divide the image") {
    CHECK_THROWS_AS(encode_coverage({}, 15, 512, 512), ConfigError);
    CHECK_THROWS_AS(encode_coverage({}, 0, 512, 512), ConfigError);
  }
  SECTION("at most one box per cell and covered cells lie inside it") {
    Rng rng(21);
    for (int t = 0; t < 50; ++t) {
      std::vector<ObjectAnnotation> a;
      for (int k = 0; k < 6; ++k) {
        const double x = rng.uniform(0, 400), y = rng.uniform(0, 400);
        a.push_back(gt(x, y, x + rng.uniform(5, 200), y + rng.uniform(5, 200)));
      }
      const CoverageGrid g = encode_coverage(a);
      for (int cy = 0; cy < g.gh; ++cy)
        for (int cx = 0; cx < g.gw; ++cx) {
          const std::size_t i = g.cell(cx, cy);
          if (g.coverage[i] == 0) continue;
          const Corners& b = g.boxes[i];
          CHECK((b[0] <= g.center_x(cx) && g.center_x(cx) < b[2] && b[1] <= g.center_y(cy) && g.center_y(cy) < b[3]));
        }
    }
  }
}

TEST_CASE("losses: hand-computed values", "[detector]") {
  LossBatch b;
  b.truth = {CoverageGrid::zeros(2, 2)};
  b.pred = {CoverageGrid::zeros(2, 2)};
  CHECK(coverage_loss(b).value == 0);
  CHECK(bbox_loss(b).value == 0);
  CHECK(total_loss(b) == 0);

  b.pred[0].coverage[0] = 1;
  CHECK(coverage_loss(b).value == 0.5);

  b.truth[0].coverage[3] = 1;
  b.truth[0].boxes[3] = {10, 10, 20, 20};
  b.pred[0].coverage[3] = 1;
  b.pred[0].boxes[3] = {11, 9, 21, 19};
  CHECK(bbox_loss(b).value == 2.0);
  const auto g = bbox_loss(b).gradient[0][3];
  CHECK(g == Corners{0.5, -0.5, 0.5, -0.5});

  // pred coverage 1 at cell 0 (truth 0) gives coverage sum 0.5.
  b.weights = {1, 0};
  CHECK(total_loss(b) == 0.5);
  b.weights = {1, 2};
  CHECK(total_loss(b) == 4.5);
  b.weights = {-1, 2};
  CHECK_THROWS_AS(total_loss(b), DomainError);
}

TEST_CASE("losses: shape checks", "[detector]") {
  LossBatch b;
  b.truth = {CoverageGrid::zeros(2, 2)};
  b.pred = {CoverageGrid::zeros(3, 2)};
  CHECK_THROWS_AS(coverage_loss(b), DimensionError);
  b.pred = {};
  CHECK_THROWS_AS(bbox_loss(b), DimensionError);
  b.truth = {};
  CHECK_THROWS_AS(coverage_loss(b), DimensionError);
}

TEST_CASE("losses are nonnegative and zero only at equality", "[detector][property]") {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    LossBatch b;
    for (int n = 0; n < 3; ++n) {
      b.truth.push_back(random_grid(rng, 4, 3, true));
      b.pred.push_back(random_grid(rng, 4, 3, false));
    }
    CHECK(coverage_loss(b).value >= 0);
    CHECK(bbox_loss(b).value >= 0);
    b.pred = b.truth;
    CHECK(total_loss(b) == 0);
  }
}

TEST_CASE("coverage gradient matches finite differences", "[detector][property]") {
  Rng rng(8);
  LossBatch b;
  b.truth = {random_grid(rng, 3, 2, true), random_grid(rng, 3, 2, true)};
  b.pred = {random_grid(rng, 3, 2, false), random_grid(rng, 3, 2, false)};
  const auto grad = coverage_loss(b).gradient;
  for (std::size_t img = 0; img < 2; ++img)
    for (std::size_t c = 0; c < 6; ++c) {
      auto f = [&](const std::vector<double>& x) {
        LossBatch copy = b;
        copy.pred[img].coverage = x;
        return coverage_loss(copy).value;
      };
      const double fd = oracle::central_difference(f, b.pred[img].coverage, c, 1e-5);
      CHECK(grad[img][c] == Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("decode_detections", "[detector]") {
  SECTION("zero grid") { CHECK(decode_detections(CoverageGrid::zeros(32, 32)).empty()); }
  SECTION("one encoded box") {
    const std::vector<ObjectAnnotation> a{gt(100, 100, 200, 200)};
    const auto d = decode_detections(encode_coverage(a));
    REQUIRE(d.size() == 1);
    CHECK(d[0].bbox == BBox2D(100, 100, 200, 200));
    CHECK(d[0].confidence == 1.0);
  }
  SECTION("two separated boxes") {
    const std::vector<ObjectAnnotation> a{gt(20, 20, 120, 140), gt(300, 260, 420, 400)};
    const auto d = decode_detections(encode_coverage(a));
    REQUIRE(d.size() == 2);
    for (const ObjectAnnotation& g : a) {
      double best = 0;
      for (const Detection& x : d) best = std::max(best, iou(x.bbox, g.bbox));
      CHECK(best >= 0.8);
    }
  }
  SECTION("uniform coverage scaling above threshold does not change boxes") {
    const std::vector<ObjectAnnotation> a{gt(20, 20, 120, 140), gt(300, 260, 420, 400)};
    const CoverageGrid g = encode_coverage(a);
    // Equal confidences may come back in either order.
    auto by_x = [](std::vector<Detection> v) {
      std::sort(v.begin(), v.end(), [](const Detection& p, const Detection& q) { return p.bbox.x1() < q.bbox.x1(); });
      return v;
    };
    const auto base = by_x(decode_detections(g));
    for (double s : {0.7, 0.85, 0.95}) {
      CoverageGrid scaled = g;
      for (double& c : scaled.coverage) c *= s;
      const auto d = by_x(decode_detections(scaled));
      REQUIRE(d.size() == base.size());
      for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(d[i].bbox.x1() == Approx(base[i].bbox.x1()).margin(1e-9));
        CHECK(d[i].bbox.y2() == Approx(base[i].bbox.y2()).margin(1e-9));
        CHECK(d[i].confidence == Approx(s));
      }
    }
  }
  SECTION("singleton clusters are dropped") {
    CoverageGrid g = CoverageGrid::zeros(4, 4);
    g.coverage[5] = 0.9;
    g.boxes[5] = {10, 10, 30, 30};
    CHECK(decode_detections(g).empty());
    CHECK(decode_detections(g, {0.6, 0.5, 1}).size() == 1);
  }
  SECTION("parameter domain") {
    CHECK_THROWS_AS(decode_detections(CoverageGrid::zeros(2, 2), {1.5, 0.5, 2}), DomainError);
    CHECK_THROWS_AS(decode_detections(CoverageGrid::zeros(2, 2), {0.5, 0.0, 2}), DomainError);
  }
}

TEST_CASE("coverage grid binary round trip", "[detector]") {
  Rng rng(2);
  const CoverageGrid g = random_grid(rng, 5, 3, false);
  std::stringstream ss;
  write_coverage_grid(ss, g);
  const CoverageGrid back = read_coverage_grid(ss);
  REQUIRE(back.same_shape(g));
  for (std::size_t c = 0; c < g.cells(); ++c) {
    CHECK(back.coverage[c] == Approx(g.coverage[c]).margin(1e-6));
    for (std::size_t k = 0; k < 4; ++k) CHECK(back.boxes[c][k] == Approx(g.boxes[c][k]).margin(1e-4));
  }
  std::stringstream bad("NOTAGRID");
  CHECK_THROWS_AS(read_coverage_grid(bad), ParseError);
}
