#include "mdlod/error.hpp"
#include "mdlod/geometry.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

using namespace mdlod::geom;

namespace {

GeometrySpec cross_spec() { return {{0, 0, 1, 1}, {{{0.5, 0}, {0.5, 1}}, {{0, 0.5}, {1, 0.5}}}}; }

GeometrySpec tee_spec() { return {{0, 0, 1, 1}, {{{0, 0.5}, {1, 0.5}}, {{0.5, 0.5}, {0.5, 1}}}}; }

// Connected components of the n x n cell grid where a shared cell edge is a wall
// when its midpoint lies on one of the input polylines.
struct FloodFill {
  int n;
  std::vector<int> label;
  int components = 0;
};

FloodFill flood_fill(const GeometrySpec& spec, int n) {
  const double dx = spec.box.width() / n;
  const double dy = spec.box.height() / n;
  auto wall = [&](Point mid) {
    for (const auto& line : spec.polylines)
      for (std::size_t k = 0; k + 1 < line.size(); ++k)
        if (distance_to_segment(mid, line[k], line[k + 1]) < 1e-9) return true;
    return false;
  };
  FloodFill ff{n, std::vector<int>(n * n, -1)};
  for (int start = 0; start < n * n; ++start) {
    if (ff.label[start] >= 0) continue;
    std::vector<int> stack{start};
    ff.label[start] = ff.components;
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      const int i = c % n;
      const int j = c / n;
      const std::array<std::array<int, 2>, 4> steps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
      for (auto [di, dj] : steps) {
        const int ni = i + di;
        const int nj = j + dj;
        if (ni < 0 || nj < 0 || ni >= n || nj >= n) continue;
        const Point mid{spec.box.x0 + (i + 0.5 + 0.5 * di) * dx, spec.box.y0 + (j + 0.5 + 0.5 * dj) * dy};
        if (wall(mid)) continue;
        const int nc = nj * n + ni;
        if (ff.label[nc] < 0) {
          ff.label[nc] = ff.components;
          stack.push_back(nc);
        }
      }
    }
    ++ff.components;
  }
  return ff;
}

void check_against_flood_fill(const GeometrySpec& spec, const MixedDomain& d, int n) {
  const FloodFill ff = flood_fill(spec, n);
  REQUIRE(ff.components == static_cast<int>(d.bulk.size()));
  std::map<int, std::set<int>> seen;
  for (int c = 0; c < n * n; ++c) {
    const Point center{spec.box.x0 + (c % n + 0.5) * spec.box.width() / n,
                       spec.box.y0 + (c / n + 0.5) * spec.box.height() / n};
    seen[ff.label[c]].insert(d.locate_bulk(center));
  }
  std::set<int> images;
  for (const auto& [comp, segs] : seen) {
    CHECK(segs.size() == 1);
    CHECK(*segs.begin() >= 0);
    images.insert(*segs.begin());
  }
  CHECK(images.size() == d.bulk.size());
}

int index_of_bulk_containing(const MixedDomain& d, Point p) { return d.locate_bulk(p); }

int index_of_interface_through(const MixedDomain& d, Point p) {
  for (const auto& s : d.interfaces)
    if (distance_to_segment(p, s.a, s.b) < 1e-12) return s.id.index;
  return -1;
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("cross: four bulk segments, four interfaces, one junction") {
    const auto spec = cross_spec();
    const MixedDomain d = build_domain(spec);
    CHECK(d.bulk.size() == 4);
    CHECK(d.interfaces.size() == 4);
    REQUIRE(d.junctions.size() == 1);
    CHECK(distance(d.junctions[0].p, {0.5, 0.5}) < 1e-14);
    CHECK(validate_domain(d).empty());
    CHECK(d.adjacency.e0.size() == 8);
    CHECK(d.adjacency.e1.size() == 4);
    check_against_flood_fill(spec, d, 16);
    for (const auto& b : d.bulk) CHECK(b.area() == doctest::Approx(0.25).epsilon(1e-14));
  }

  TEST_CASE("transversal half-line meeting a diagonal line") {
    const GeometrySpec spec{{0, 0, 1, 1}, {{{0, 0.2}, {1, 0.8}}, {{0.4, 1}, {0.5, 0.5}}}};
    const MixedDomain d = build_domain(spec);
    CHECK(d.bulk.size() == 3);
    CHECK(d.interfaces.size() == 3);
    CHECK(d.junctions.size() == 1);
    CHECK(validate_domain(d).empty());
    // the lower region touches only the two pieces of the full line
    const int lower = index_of_bulk_containing(d, {0.5, 0.1});
    CHECK(d.adjacency.e0.count({lower, index_of_interface_through(d, {0.25, 0.35})}) == 1);
    CHECK(d.adjacency.e0.count({lower, index_of_interface_through(d, {0.45, 0.75})}) == 0);
  }

  TEST_CASE("no interfaces") {
    const MixedDomain d = build_domain({{0, 0, 1, 1}, {}});
    CHECK(d.bulk.size() == 1);
    CHECK(d.interfaces.empty());
    CHECK(d.junctions.empty());
    CHECK(validate_domain(d).empty());
  }

  TEST_CASE("polyline kinks become junction points") {
    const GeometrySpec spec{{0, 0, 1, 1}, {{{0, 0.5}, {0.5, 0.5}, {0.5, 1}}}};
    const MixedDomain d = build_domain(spec);
    CHECK(d.bulk.size() == 2);
    CHECK(d.interfaces.size() == 2);
    CHECK(d.junctions.size() == 1);
    check_against_flood_fill(spec, d, 8);
  }

  TEST_CASE("collinear polyline vertices are merged") {
    const GeometrySpec spec{{0, 0, 1, 1}, {{{0, 0.5}, {0.25, 0.5}, {1, 0.5}}}};
    const MixedDomain d = build_domain(spec);
    CHECK(d.interfaces.size() == 1);
    CHECK(d.junctions.empty());
  }

  TEST_CASE("closed loop encloses a hole") {
    const GeometrySpec spec{{0, 0, 1, 1}, {{{0.25, 0.25}, {0.75, 0.25}, {0.75, 0.75}, {0.25, 0.75}, {0.25, 0.25}}}};
    const MixedDomain d = build_domain(spec);
    REQUIRE(d.bulk.size() == 2);
    const int outer = d.locate_bulk({0.1, 0.1});
    const int inner = d.locate_bulk({0.5, 0.5});
    CHECK(outer != inner);
    CHECK(d.bulk[outer].area() == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(d.bulk[inner].area() == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(validate_domain(d).empty());
    for (const auto& s : d.interfaces) CHECK(d.bulk_adjacent_to(s.id.index).size() == 2);
  }

  TEST_CASE("dangling interface is reported once") {
    const MixedDomain d = construct_domain({{0, 0, 1, 1}, {{{0, 0.5}, {0.5, 0.5}}}});
    const auto v = validate_domain(d);
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == ViolationKind::dangling_interface);
    CHECK(v[0].segments == std::vector<SegmentId>{{1, 0}});
    CHECK_THROWS_AS(build_domain({{0, 0, 1, 1}, {{{0, 0.5}, {0.5, 0.5}}}}), mdlod::GeometryError);
  }

  TEST_CASE("claimed adjacency that is not on the boundary is reported") {
    MixedDomain d = build_domain(tee_spec());
    const int top_left = d.locate_bulk({0.25, 0.75});
    const int right_half = index_of_interface_through(d, {0.75, 0.5});
    REQUIRE(top_left >= 0);
    REQUIRE(right_half >= 0);
    REQUIRE(d.adjacency.e0.count({top_left, right_half}) == 0);
    d.adjacency.e0.insert({top_left, right_half});
    const auto v = validate_domain(d);
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == ViolationKind::adjacency);
    CHECK(v[0].segments == std::vector<SegmentId>{{0, top_left}, {1, right_half}});
  }

  TEST_CASE("missing adjacency is reported as an inclusion violation") {
    MixedDomain d = build_domain(tee_spec());
    d.adjacency.e0.erase(d.adjacency.e0.begin());
    const auto v = validate_domain(d);
    REQUIRE(!v.empty());
    CHECK(v[0].kind == ViolationKind::inclusion);
  }

  TEST_CASE("invalid inputs are rejected") {
    using mdlod::GeometryError;
    CHECK_THROWS_AS(construct_domain({{0, 0, 1, 1}, {{{0, 0.5}, {1, 0.5}}, {{0.2, 0.5}, {0.7, 0.5}}}}), GeometryError);
    CHECK_THROWS_AS(construct_domain({{0, 0, 1, 1}, {{{0, 0.5}, {1.5, 0.5}}}}), GeometryError);
    CHECK_THROWS_AS(construct_domain({{0, 0, 1, 1}, {{{0, 0.5}, {0, 0.5}, {1, 0.5}}}}), GeometryError);
    CHECK_THROWS_AS(construct_domain({{0, 0, 1, 1}, {{{0, 0}, {1, 0}}}}), GeometryError);
    CHECK_THROWS_AS(construct_domain({{0, 0, 1, 1}, {{{0, 0.5}}}}), GeometryError);
    CHECK_THROWS_AS(construct_domain({{0, 0, 0, 1}, {}}), GeometryError);
  }

  TEST_CASE("splitting is idempotent") {
    const MixedDomain once = build_domain(cross_spec());
    GeometrySpec split{{0, 0, 1, 1}, {}};
    for (const auto& s : once.interfaces) split.polylines.push_back({s.a, s.b});
    const MixedDomain twice = build_domain(split);
    CHECK(twice.bulk.size() == once.bulk.size());
    CHECK(twice.interfaces.size() == once.interfaces.size());
    CHECK(twice.junctions.size() == once.junctions.size());
    CHECK(twice.adjacency.e0 == once.adjacency.e0);
    CHECK(twice.adjacency.e1 == once.adjacency.e1);
  }

  TEST_CASE("random grid-line arrangements partition the box") {
    std::mt19937_64 rng(20261016);
    for (int trial = 0; trial < 40; ++trial) {
      const int n = 16;
      std::uniform_int_distribution<int> pos(1, n - 1);
      std::uniform_int_distribution<int> count(0, 3);
      GeometrySpec spec{{0, 0, 2, 1}, {}};
      std::set<int> xs;
      std::set<int> ys;
      const int nx = count(rng);
      const int ny = count(rng);
      for (int k = 0; k < nx; ++k) xs.insert(pos(rng));
      for (int k = 0; k < ny; ++k) ys.insert(pos(rng));
      for (int x : xs) spec.polylines.push_back({{2.0 * x / n, 0}, {2.0 * x / n, 1}});
      for (int y : ys) spec.polylines.push_back({{0, 1.0 * y / n}, {2, 1.0 * y / n}});
      // a staircase from the left side to the top side
      if (trial % 2 == 0) {
        std::vector<Point> stair{{0, 0.5 + 0.5 / n}};
        double x = 0;
        double y = 0.5 + 0.5 / n;
        while (y < 1.0 - 1e-12) {
          x += 2.0 / n;
          stair.push_back({x, y});
          y += 1.0 / n;
          stair.push_back({x, y});
        }
        // keep the staircase off the random lines by using odd half positions
        bool clash = false;
        for (int xi : xs) clash |= (2.0 * xi / n <= x + 1e-12);
        for (int yi : ys) clash |= (1.0 * yi / n >= 0.5);
        if (!clash) spec.polylines.push_back(stair);
      }
      const MixedDomain d = build_domain(spec);
      double total = 0.0;
      for (const auto& b : d.bulk) total += b.area();
      CHECK(std::abs(total - 2.0) <= 1e-12 * 2.0);
      CHECK(validate_domain(d).empty());
      check_against_flood_fill(spec, d, 2 * n);
      CHECK(d.bulk.size() == (xs.size() + 1) * (ys.size() + 1) + (spec.polylines.size() > xs.size() + ys.size()));
    }
  }

  TEST_CASE("geometry file parsing") {
    const auto spec = parse_geometry_spec("domain = [0, 0, 1, 1]\ninterfaces = [\n [[0.5, 0], [0.5, 1]]\n]\n");
    CHECK(spec.polylines.size() == 1);
    CHECK(spec.box.x1 == 1.0);
    CHECK(parse_geometry_spec("domain = [0, 0, 2, 1]\n").polylines.empty());
    CHECK_THROWS_AS(parse_geometry_spec("domain = [0, 0, 1, 1]\ncolour = 1\n"), mdlod::ConfigError);
    CHECK_THROWS_AS(parse_geometry_spec("domain = [0, 0, 1]\n"), mdlod::ConfigError);
    CHECK_THROWS_AS(parse_geometry_spec("interfaces = []\n"), mdlod::ConfigError);
    CHECK_THROWS_AS(parse_geometry_spec("domain = [0, 0, 1, 1]\ninterfaces = [[[0, 1, 2]]]\n"), mdlod::ConfigError);
  }
}
