#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "synthfridge/composer.hpp"

using namespace synthfridge;
using Catch::Approx;

namespace {

bool pairwise_disjoint(const std::vector<Rect2>& rs) {
  for (std::size_t i = 0; i < rs.size(); ++i)
    for (std::size_t j = i + 1; j < rs.size(); ++j)
      if (rs[i].overlaps(rs[j])) return false;
  return true;
}

const ModelRepository& repo() {
  static const ModelRepository r = make_procedural_repository(200);
  return r;
}

}  // namespace

TEST_CASE("place_grid", "[composer]") {
  const Rect2 tray{-0.3, -0.3, 0.3, 0.3};
  const std::vector<Rect2> trays{tray};
  SECTION("nine objects form a centered 3x3 lattice") {
    const std::vector<Vec2> f(9, Vec2{0.1, 0.1});
    const auto p = place_grid(f, trays, 0.15);
    REQUIRE(p.size() == 9);
    std::set<std::pair<long, long>> cells;
    for (const Placement& q : p) {
      cells.insert({std::lround(q.center.x / 0.15), std::lround(q.center.y / 0.15)});
      CHECK(std::abs(q.center.x / 0.15 - std::round(q.center.x / 0.15)) < 1e-9);
      CHECK(std::abs(q.center.y / 0.15 - std::round(q.center.y / 0.15)) < 1e-9);
    }
    CHECK(cells.size() == 9);
    for (const auto& [i, j] : cells) {
      CHECK(std::abs(i) <= 1);
      CHECK(std::abs(j) <= 1);
    }
  }
  SECTION("single object at the tray center") {
    const std::vector<Vec2> f{{0.1, 0.1}};
    const auto p = place_grid(f, std::vector<Rect2>{{0, 0, 0.4, 0.2}}, 0.15);
    REQUIRE(p.size() == 1);
    CHECK(p[0].center.x == Approx(0.2));
    CHECK(p[0].center.y == Approx(0.1));
  }
  SECTION("no objects") { CHECK(place_grid({}, trays, 0.15).empty()); }
  SECTION("four objects form 2x2") {
    const std::vector<Vec2> f(4, Vec2{0.1, 0.1});
    const auto p = place_grid(f, trays, 0.15);
    std::set<double> xs, zs;
    for (const Placement& q : p) {
      xs.insert(std::round(q.center.x * 1e9) / 1e9);
      zs.insert(std::round(q.center.y * 1e9) / 1e9);
    }
    CHECK(xs == std::set<double>{-0.075, 0.075});
    CHECK(zs == std::set<double>{-0.075, 0.075});
  }
  SECTION("overflow moves to the next tray, then fails") {
    const std::vector<Rect2> two{{0, 0, 0.25, 0.25}, {0, 0, 0.25, 0.25}};
    const std::vector<Vec2> f(6, Vec2{0.1, 0.1});
    const auto p = place_grid(f, two, 0.1);
    CHECK(std::count_if(p.begin(), p.end(), [](const Placement& q) { return q.tray == 0; }) == 4);
    CHECK(std::count_if(p.begin(), p.end(), [](const Placement& q) { return q.tray == 1; }) == 2);
    const std::vector<Vec2> many(9, Vec2{0.1, 0.1});
    CHECK_THROWS_AS(place_grid(many, two, 0.1), CapacityError);
  }
}

TEST_CASE("place_random", "[composer]") {
  Rng rng(1);
  SECTION("one object on a huge tray") {
    const std::vector<Vec2> f{{0.1, 0.1}};
    const auto p = place_random(f, {-10, -10, 10, 10}, rng);
    REQUIRE(p[0]);
    CHECK(Rect2{-10, -10, 10, 10}.contains(Rect2::centered(*p[0], f[0])));
  }
  SECTION("second unit footprint on a unit tray is skipped") {
    const std::vector<Vec2> f{{1, 1}, {1, 1}};
    const auto p = place_random(f, {0, 0, 1, 1}, rng);
    CHECK(p[0]);
    CHECK_FALSE(p[1]);
  }
  SECTION("accepted footprints are disjoint and inside") {
    for (int t = 0; t < 50; ++t) {
      std::vector<Vec2> f;
      for (int k = 0; k < 15; ++k) f.push_back({rng.uniform(0.03, 0.15), rng.uniform(0.03, 0.15)});
      const Rect2 tray{-0.29, 0.01, 0.29, 0.44};
      const auto p = place_random(f, tray, rng);
      std::vector<Rect2> rs;
      for (std::size_t i = 0; i < f.size(); ++i)
        if (p[i]) rs.push_back(Rect2::centered(*p[i], f[i]));
      for (const Rect2& r : rs) CHECK(tray.contains(r, 1e-12));
      CHECK(pairwise_disjoint(rs));
    }
  }
}

TEST_CASE("place_binpack", "[composer]") {
  SECTION("single object sits in the min corner") {
    const std::vector<Vec2> f{{0.1, 0.2}};
    const auto p = place_binpack(f, {0, 0, 1, 1});
    REQUIRE(p[0]);
    CHECK(p[0]->x == Approx(0.05));
    CHECK(p[0]->y == Approx(0.1));
  }
  SECTION("four squares, three per shelf") {
    const std::vector<Vec2> f(4, Vec2{0.1, 0.1});
    const auto p = place_binpack(f, {0, 0, 0.35, 0.2});
    for (int i = 0; i < 3; ++i) {
      REQUIRE(p[static_cast<std::size_t>(i)]);
      CHECK(p[static_cast<std::size_t>(i)]->y == Approx(0.05));
    }
    REQUIRE(p[3]);
    CHECK(p[3]->x == Approx(0.05));
    CHECK(p[3]->y == Approx(0.15));
  }
  SECTION("shallow tray leaves the overflow unplaced") {
    const std::vector<Vec2> f(4, Vec2{0.1, 0.1});
    const auto p = place_binpack(f, {0, 0, 0.35, 0.1});
    CHECK(std::count_if(p.begin(), p.end(), [](const auto& o) { return o.has_value(); }) == 3);
  }
  SECTION("oversize item") {
    const std::vector<Vec2> f{{0.1, 0.1}, {2, 0.1}};
    try {
      place_binpack(f, {0, 0, 1, 1});
      FAIL("expected OversizeError");
    } catch (const OversizeError& e) {
      CHECK(e.index() == 1);
    }
  }
}

TEST_CASE("compose_scene is deterministic in its seed", "[composer]") {
  const ComposeConfig cfg;
  const Scene a = compose_scene(repo(), cfg, 77);
  const Scene b = compose_scene(repo(), cfg, 77);
  CHECK(scene_to_json(a) == scene_to_json(b));
  const Scene c = compose_scene(repo(), cfg, 78);
  CHECK(scene_to_json(a) != scene_to_json(c));
}

TEST_CASE("compose_scene invariants over seeds", "[composer][property]") {
  const ComposeConfig cfg;
  std::set<PlacementPattern> patterns;
  std::set<std::size_t> trays, lights;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Scene s = compose_scene(repo(), cfg, seed);
    REQUIRE_NOTHROW(validate_scene(s));
    CHECK(s.objects.size() >= 5);
    CHECK(s.objects.size() <= 25);
    CHECK(s.ambient >= 0.03);
    CHECK(s.ambient <= 0.25);
    CHECK(s.cameras.size() >= 1);
    CHECK(s.cameras.size() <= 4);
    patterns.insert(s.pattern);
    lights.insert(s.lights.size());
    for (const SceneObject& o : s.objects) {
      trays.insert(o.tray);
      // Object rests on its tray surface.
      CHECK(o.pose.translation.y == s.fridge.trays[o.tray]);
      const double h = bounds(repo()[o.model].mesh).extent().y * o.scale;
      CHECK(h <= s.fridge.headroom(o.tray));
    }
    for (const Light& l : s.lights) {
      CHECK(std::abs(l.position.x) <= s.fridge.width / 2);
      CHECK(l.position.z >= 0);
    }
    for (const Camera& c : s.cameras) {
      CHECK(c.position().z < 0);
      CHECK(c.pose.is_rigid());
    }
  }
  CHECK(patterns.size() == 3);
  CHECK(trays.size() == 3);
  CHECK(lights == std::set<std::size_t>{1, 2, 3});
}

TEST_CASE("compose config validation", "[composer]") {
  ComposeConfig cfg;
  cfg.min_objects = 3;
  CHECK_THROWS_AS(compose_scene(repo(), cfg, 1), ConfigError);
  cfg = {};
  cfg.pattern_weights = {0, 0, 0};
  CHECK_THROWS_AS(compose_scene(repo(), cfg, 1), ConfigError);
  cfg = {};
  cfg.fridge.trays = {0.05, 0.06};
  CHECK_THROWS_AS(compose_scene(repo(), cfg, 1), ConfigError);
}
