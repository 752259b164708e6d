#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "potkit/solve.hpp"

using namespace potkit;
using doctest::Approx;

namespace {

const Domain unit_interval = Domain::interval(0.0, 1.0);
const Domain disk = Domain::ball(Point{0.0, 0.0}, 1.0);
const OperatorSpec lap = OperatorSpec::laplacian();

}  // namespace

TEST_CASE("integral solutions: closed-form examples") {
  const auto u1 = integral_solution(lap, unit_interval, MeasureData::dirac(Point{0.5}));
  CHECK(u1(Point{0.25}) == Approx(0.125).epsilon(1e-15));
  CHECK(u1(Point{1.5}) == 0.0);
  CHECK(u1(Point{1.0}) == 0.0);

  const auto u2 = integral_solution(lap, disk, MeasureData::dirac(Point{0.0, 0.0}));
  CHECK(u2(Point{0.5, 0.0}) == Approx(0.110318).epsilon(1e-6));
  CHECK(u2(Point{0.0, -0.5}) == Approx(std::log(2.0) / (2 * M_PI)).epsilon(1e-14));
  CHECK(std::isinf(u2(Point{0.0, 0.0})));
  CHECK(u2(Point{0.0, 0.0}) > 0);
  CHECK(std::isinf(integral_solution(lap, disk, MeasureData::dirac(Point{0.0, 0.0}, -1.0))(Point{0.0, 0.0})));
  CHECK(integral_solution(lap, disk, MeasureData::dirac(Point{0.0, 0.0}, -1.0))(Point{0.0, 0.0}) < 0);

  const auto z = integral_solution(lap, disk, MeasureData());
  CHECK(z(Point{0.3, 0.3}) == 0.0);
}

TEST_CASE("density potentials") {
  const Density one = Density::constant(1.0);
  CHECK(density_potential(lap, unit_interval, one, Point{0.5}) == Approx(0.125).epsilon(1e-14));
  CHECK(density_potential(lap, disk, Density::constant(1.0 / M_PI), Point{0.0, 0.0}) ==
        Approx(1.0 / (4 * M_PI)).epsilon(1e-14));
  CHECK(density_potential(lap, disk, Density(), Point{0.0, 0.0}) == 0.0);

  // a gaussian density goes through quadrature; compare with the radial oracle
  // u(0) = int_0^1 ln(1/r)/(2 pi) f(r) 2 pi r dr
  const double w = 0.3;
  const Density g = Density::gaussian(1.0, Point{0.0, 0.0}, w);
  const double exact = oracle::integrate(
      [&](double r) { return r > 0 ? -std::log(r) * std::exp(-r * r / (2 * w * w)) * r : 0.0; }, 0.0, 1.0);
  CHECK(density_potential(lap, disk, g, Point{0.0, 0.0}) == Approx(exact).epsilon(1e-6));
  // 1D: u(x) = int G(x,y) f(y) dy against a direct oracle
  const Density g1 = Density::gaussian(1.0, Point{0.3}, 0.1);
  for (double x : {0.2, 0.5, 0.8}) {
    const double ex = oracle::integrate(
        [&](double y) { return oracle::interval_green(x, y) * std::exp(-(y - 0.3) * (y - 0.3) / 0.02); }, 0.0, 1.0,
        {x});
    CHECK(density_potential(lap, unit_interval, g1, Point{x}) == Approx(ex).epsilon(1e-10));
  }
  // fractional constant density: expected exit time
  const Domain sym = Domain::interval(-1.0, 1.0);
  const auto frac = OperatorSpec::fractional(1.5);
  CHECK(density_potential(frac, sym, Density::constant(2.0), Point{0.3}) ==
        Approx(2.0 * oracle::stable_exit_time(1.5, 1, 1.0 - 0.09)).epsilon(1e-10));
}

TEST_CASE("linearity, positivity and domination") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  const MeasureData m1({{Point{0.2, -0.1}, 0.7}}, Density::constant(0.5));
  const MeasureData m2({{Point{-0.3, 0.4}, 1.3}});
  const auto s1 = integral_solution(lap, disk, m1);
  const auto s2 = integral_solution(lap, disk, m2);
  const auto s12 = integral_solution(lap, disk, m1 + m2);
  for (int t = 0; t < 50; ++t) {
    const Point x{u(rng), u(rng)};
    CHECK(s12(x) == Approx(s1(x) + s2(x)).epsilon(1e-13));
    CHECK(s12(x) >= 0.0);
  }
  // discrete path
  const auto grid = make_grid(disk, 1.0 / 16);
  const auto dop = assemble(lap, grid);
  const auto d1 = integral_solution(dop, m1).field();
  const auto d2 = integral_solution(dop, m2).field();
  const auto d12 = integral_solution(dop, m1 + m2).field();
  for (std::int64_t i = 0; i < d12.size(); ++i) {
    CHECK(d12[i] == Approx(d1[i] + d2[i]).epsilon(1e-11));
    CHECK(d12[i] >= 0.0);
  }
  // |mu| <= nu  =>  |u| <= R nu on the grid
  const MeasureData mu({{Point{0.1, 0.1}, -0.4}}, Density::constant(-0.2));
  const MeasureData nu({{Point{0.1, 0.1}, 0.5}}, Density::constant(0.3));
  const auto uu = integral_solution(dop, mu).field();
  const auto nn = integral_solution(dop, nu).field();
  for (std::int64_t i = 0; i < uu.size(); ++i) CHECK(std::abs(uu[i]) <= nn[i] + 1e-14);
}

TEST_CASE("bounded density gives a bounded continuous solution") {
  const auto grid = make_grid(disk, 1.0 / 32);
  const Density f = Density::gaussian(1.0, Point{0.2, 0.0}, 0.2);
  const auto u = integral_solution(lap, disk, MeasureData::with_density(f)).on_grid(grid);
  // ||R^D 1||_inf ||f||_inf = 1/4
  CHECK(u.max() <= 0.25);
  CHECK(u.min() >= 0.0);
  // neighbouring nodes differ by O(h)
  const Grid& g = *grid;
  double jump = 0.0;
  for (std::int64_t i = 0; i < u.size(); ++i) {
    const auto nb = g.neighbor(g.lattice_of(i), 0, 1);
    const auto j = nb >= 0 ? g.interior_of(nb) : -1;
    if (j >= 0) jump = std::max(jump, std::abs(u[i] - u[j]));
  }
  CHECK(jump < 0.1 * g.h());
}

TEST_CASE("discrete path agrees with the closed form away from atoms") {
  const auto grid = make_grid(disk, 1.0 / 32);
  const auto dop = assemble(lap, grid);
  const MeasureData mu = MeasureData::dirac(Point{0.0, 0.0});
  const auto closed = integral_solution(lap, disk, mu);
  const auto disc = integral_solution(dop, mu);
  const auto field = disc.on_grid(grid);
  for (double r : {0.25, 0.5, 0.75}) {
    const auto i = grid->interior_node_at(Point{r, 0.0});
    CHECK(field[i] == Approx(closed(Point{r, 0.0})).epsilon(0.01));
  }
  // nodes within h of the atom report the closed-form kernel value
  CHECK(std::isinf(field[grid->interior_node_at(Point{0.0, 0.0})]));
  const auto j = grid->interior_node_at(Point{1.0 / 32, 0.0});
  CHECK(field[j] == closed(Point{1.0 / 32, 0.0}));
}

TEST_CASE("potentials used as tail weights") {
  const auto grid = make_grid(disk, 1.0 / 16);
  const auto p = potential(lap, disk, Density::constant(1.0 / M_PI), grid);
  CHECK(p[grid->interior_node_at(Point{0.0, 0.0})] == Approx(1.0 / (4 * M_PI)).epsilon(1e-14));
  const auto g1 = make_grid(unit_interval, 1.0 / 16);
  const auto p1 = potential(lap, unit_interval, Density::constant(1.0), g1);
  CHECK(p1[g1->interior_node_at(Point{0.5})] == Approx(0.125).epsilon(1e-14));
  const auto z = potential(lap, disk, Density(), grid);
  CHECK(z.max() == 0.0);
  CHECK(z.min() == 0.0);
  const auto w = weight_field(grid, Density::constant(1.0 / M_PI));
  CHECK(w.integral() == Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(weight_field(grid, Density()), std::invalid_argument);
  const std::vector<Point> xs{Point{0.5, 0.0}, Point{0.0, 0.5}, Point{0.1, 0.0}};
  const auto vals = evaluate(integral_solution(lap, disk, MeasureData::dirac(Point{0.0, 0.0})), xs);
  CHECK(vals[0] == vals[1]);
  CHECK(vals[2] == Approx(std::log(10.0) / (2 * M_PI)));
}
