#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "potkit/geometry.hpp"

using namespace potkit;

TEST_CASE("contains follows the open-set convention") {
  const auto iv = Domain::interval(0.0, 1.0);
  CHECK(iv.contains(Point{0.5}));
  CHECK_FALSE(iv.contains(Point{2.0}));
  CHECK_FALSE(iv.contains(Point{0.0}));

  const auto disk = Domain::ball(Point{0.0, 0.0}, 1.0);
  CHECK_FALSE(disk.contains(Point{1.0, 0.0}));
  CHECK(disk.contains(Point{0.5, 0.5}));
  CHECK_THROWS_AS(disk.contains(Point{0.5}), DimensionMismatch);
}

TEST_CASE("domain invariants are enforced") {
  CHECK_THROWS(Domain::interval(1.0, 1.0));
  CHECK_THROWS(Domain::ball(Point{0.0, 0.0}, 0.0));
  CHECK_THROWS(Point(4));
}

TEST_CASE("interval grid at h = 1/4") {
  const auto g = build_grid(Domain::interval(0.0, 1.0), 0.25);
  REQUIRE(g.interior_count() == 3);
  CHECK(g.interior_coord(0)[0] == doctest::Approx(0.25));
  CHECK(g.interior_coord(1)[0] == doctest::Approx(0.5));
  CHECK(g.interior_coord(2)[0] == doctest::Approx(0.75));
  int boundary = 0;
  for (std::int64_t l = 0; l < g.lattice_size(); ++l) boundary += g.kind(l) == NodeKind::boundary;
  CHECK(boundary == 2);
}

TEST_CASE("disk grid at h = 1/2 matches lattice enumeration") {
  const auto g = build_grid(Domain::ball(Point{0.0, 0.0}, 1.0), 0.5);
  // brute-force count of lattice points (i/2, j/2) strictly inside the unit disk
  int expected = 0;
  for (int i = -4; i <= 4; ++i) {
    for (int j = -4; j <= 4; ++j) {
      if (0.25 * (i * i + j * j) < 1.0) ++expected;
    }
  }
  CHECK(expected == 9);
  CHECK(g.interior_count() == expected);
}

TEST_CASE("degenerate meshes are rejected") {
  CHECK_THROWS(build_grid(Domain::interval(0.0, 1.0), 10.0));
  CHECK_THROWS(build_grid(Domain::interval(0.0, 1.0), 0.0));
  GridOptions small;
  small.node_cap = 100;
  CHECK_THROWS_AS(build_grid(Domain::ball(Point{0.0, 0.0}, 1.0), 0.01, small), std::length_error);
}

TEST_CASE("grid classification is consistent with contains") {
  const auto dom = Domain::ball(Point{0.1, -0.2}, 0.7);
  const auto g = build_grid(dom, 0.05);
  for (std::int64_t l = 0; l < g.lattice_size(); ++l) {
    const bool inside = dom.contains(g.coord(l));
    CHECK((g.kind(l) == NodeKind::interior) == inside);
  }
  for (std::int64_t i = 0; i < g.interior_count(); ++i) {
    const auto l = g.lattice_of(i);
    for (int k = 0; k < 2; ++k) {
      for (int s : {-1, 1}) {
        const auto nb = g.neighbor(l, k, s);
        REQUIRE(nb >= 0);
        CHECK(g.kind(nb) != NodeKind::exterior);
      }
    }
  }
}

TEST_CASE("refinement nests interior nodes") {
  const auto dom = Domain::ball(Point{0.0, 0.0}, 1.0);
  const auto coarse = build_grid(dom, 1.0 / 8);
  const auto fine = build_grid(dom, 1.0 / 16);
  for (std::int64_t i = 0; i < coarse.interior_count(); ++i) {
    CHECK(fine.interior_node_at(coarse.interior_coord(i)) >= 0);
  }
  const auto r1 = build_grid(Domain::rectangle(Point{0.0, 0.0}, Point{1.0, 0.5}), 0.125);
  const auto r2 = build_grid(Domain::rectangle(Point{0.0, 0.0}, Point{1.0, 0.5}), 0.0625);
  for (std::int64_t i = 0; i < r1.interior_count(); ++i) {
    CHECK(r2.interior_node_at(r1.interior_coord(i)) >= 0);
  }
}

TEST_CASE("masked rectangle keeps only the open subset") {
  const auto dom = Domain::rectangle(Point{-1.0, -1.0}, Point{1.0, 1.0},
                                     [](const Point& x) { return !(x[0] >= 0.0 && x[1] >= 0.0); });
  const auto g = build_grid(dom, 0.25);
  for (std::int64_t i = 0; i < g.interior_count(); ++i) {
    const auto x = g.interior_coord(i);
    CHECK_FALSE((x[0] >= 0.0 && x[1] >= 0.0));
  }
  CHECK(g.interior_count() == 7 * 7 - 4 * 4);
}

TEST_CASE("multilinear stencil weights sum to one") {
  const auto g = build_grid(Domain::ball(Point{0.0, 0.0}, 1.0), 0.1);
  const auto st = g.multilinear_stencil(Point{0.123, -0.456});
  double s = 0.0;
  for (auto [l, w] : st) s += w;
  CHECK(st.size() == 4);
  CHECK(s == doctest::Approx(1.0));
  CHECK(g.multilinear_stencil(Point{0.0, 0.0}).size() == 1);
}
