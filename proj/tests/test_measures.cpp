#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "potkit/measures.hpp"

using namespace potkit;
using doctest::Approx;

namespace {

const Domain unit_interval = Domain::interval(0.0, 1.0);
const Domain disk = Domain::ball(Point{0.0, 0.0}, 1.0);

}  // namespace

TEST_CASE("decomposition follows the diagonal rule") {
  const auto lap = OperatorSpec::laplacian();
  const MeasureData mu({{Point{0.1, 0.2}, 1.0}}, Density::constant(1.0));
  const auto dec = decompose(mu, lap, disk);
  REQUIRE(dec.concentrated.atoms().size() == 1);
  CHECK(dec.concentrated.atoms()[0].x == Point{0.1, 0.2});
  CHECK(dec.diffuse.atoms().empty());
  CHECK(dec.diffuse.density() == Density::constant(1.0));
  CHECK(dec.concentrated.density().empty());

  const auto d1 = decompose(MeasureData::dirac(Point{0.5}), lap, unit_interval);
  CHECK(d1.concentrated.atoms().empty());
  CHECK(d1.diffuse.atoms().size() == 1);

  const Domain sym = Domain::interval(-1.0, 1.0);
  CHECK(decompose(MeasureData::dirac(Point{0.0}), OperatorSpec::fractional(1.5), sym).concentrated.atoms().empty());
  CHECK(decompose(MeasureData::dirac(Point{0.0}), OperatorSpec::fractional(0.5), sym).concentrated.atoms().size() == 1);
  CHECK(decompose(MeasureData::dirac(Point{0.0}), OperatorSpec::fractional(1.0), sym).concentrated.atoms().size() == 1);
}

TEST_CASE("decompose is exact and idempotent") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  const auto lap = OperatorSpec::laplacian();
  for (int t = 0; t < 20; ++t) {
    std::vector<Atom> atoms;
    for (int k = 0; k < 5; ++k) atoms.push_back({Point{u(rng), u(rng)}, u(rng)});
    const MeasureData mu(atoms, Density::gaussian(u(rng), Point{0.0, 0.0}, 0.3));
    const auto dec = decompose(mu, lap, disk);
    CHECK(recombine(dec) == mu);
    const auto again = decompose(recombine(dec), lap, disk);
    CHECK(again.diffuse == dec.diffuse);
    CHECK(again.concentrated == dec.concentrated);
    CHECK(decompose(dec.concentrated, lap, disk).concentrated == dec.concentrated);
    CHECK(decompose(dec.diffuse, lap, disk).diffuse == dec.diffuse);
  }
  // mixed polarity keeps the original atom order
  const OperatorSpec lap1 = OperatorSpec::laplacian();
  const MeasureData m1({{Point{0.2}, 1.0}, {Point{0.7}, -2.0}});
  CHECK(recombine(decompose(m1, lap1, unit_interval)) == m1);
}

TEST_CASE("total variation") {
  CHECK(total_variation(MeasureData::dirac(Point{0.5}, -2.0), unit_interval) == 2.0);
  CHECK(total_variation(MeasureData::with_density(Density::constant(1.0)), unit_interval) == Approx(1.0));
  CHECK(total_variation(MeasureData({{Point{0.5}, 1.0}}, Density::constant(1.0)), unit_interval) == Approx(2.0));
  CHECK(total_variation(MeasureData::with_density(Density::constant(-3.0)), disk) == Approx(3.0 * M_PI));
  // gaussian bump on the disk: radial oracle 2 pi w^2 (1 - e^{-1/(2w^2)})
  const double w = 0.3;
  const double exact = 2 * M_PI * w * w * (1 - std::exp(-1.0 / (2 * w * w)));
  CHECK(total_variation(MeasureData::with_density(Density::gaussian(-1.0, Point{0.0, 0.0}, w)), disk) ==
        Approx(exact).epsilon(1e-10));
  CHECK(density_integral(Density::gaussian(1.0, Point{0.5}, 0.1), unit_interval) ==
        Approx(0.1 * std::sqrt(2 * M_PI) * std::erf(0.5 / (0.1 * std::sqrt(2.0)))).epsilon(1e-12));
}

TEST_CASE("Jordan parts are mutually singular and sum to the measure") {
  const MeasureData mu({{Point{0.2}, 1.5}, {Point{0.6}, -0.5}}, Density::constant(-2.0));
  const auto p = positive_part(mu);
  const auto n = negative_part(mu);
  CHECK(p.atoms().size() == 1);
  CHECK(n.atoms().size() == 1);
  CHECK(n.atoms()[0].weight == 0.5);
  CHECK(p.density().empty());
  CHECK(n.density() == Density::constant(2.0));
  CHECK(total_variation(p, unit_interval) + total_variation(n, unit_interval) ==
        Approx(total_variation(mu, unit_interval)));

  const Density g = Density::gaussian(1.0, Point{0.5}, 0.2);
  for (double x : {0.1, 0.4, 0.9}) {
    CHECK(g.jordan(Density::Part::positive)(Point{x}) == g(Point{x}));
    CHECK(g.jordan(Density::Part::negative)(Point{x}) == 0.0);
  }
}

TEST_CASE("validation and arithmetic") {
  CHECK_THROWS_AS(MeasureData::dirac(Point{1.0}).validate(unit_interval), std::invalid_argument);
  CHECK_THROWS_AS(MeasureData::dirac(Point{0.5}, NAN), std::invalid_argument);
  CHECK_NOTHROW(MeasureData::dirac(Point{0.5}).validate(unit_interval));
  CHECK(MeasureData().is_zero());
  CHECK(MeasureData::dirac(Point{0.5}, 0.0).is_zero());
  const auto s = MeasureData::with_density(Density::constant(1.0)) + MeasureData::with_density(Density::constant(2.0));
  CHECK(s.density() == Density::constant(3.0));
  CHECK_THROWS_AS(MeasureData::with_density(Density::gaussian(1.0, Point{0.5}, 0.1)) +
                      MeasureData::with_density(Density::constant(1.0)),
                  std::invalid_argument);
}

TEST_CASE("deposit preserves mass") {
  const auto grid = make_grid(disk, 1.0 / 16);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (int t = 0; t < 20; ++t) {
    const MeasureData mu = MeasureData::dirac(Point{u(rng), u(rng)}, 1.7);
    const auto b = deposit(mu, *grid);
    double mass = 0.0;
    for (double v : b) mass += v * grid->cell_volume();
    CHECK(mass == Approx(1.7).epsilon(1e-13));
  }
  // on-node atom: a single h^{-d}-scaled node mass
  const auto b = deposit(MeasureData::dirac(Point{0.0, 0.0}), *grid);
  const auto i = grid->interior_node_at(Point{0.0, 0.0});
  CHECK(b[static_cast<std::size_t>(i)] == Approx(256.0));
  int nonzero = 0;
  for (double v : b) nonzero += v != 0.0;
  CHECK(nonzero == 1);
}
