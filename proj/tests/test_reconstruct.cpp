#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>
#include <random>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/tools/roots.hpp>

#include "oracles.hpp"
#include "potkit/reconstruct.hpp"

using namespace potkit;
using doctest::Approx;

namespace {

const Domain disk = Domain::ball(Point{0.0, 0.0}, 1.0);
const Domain sym = Domain::interval(-1.0, 1.0);
const OperatorSpec lap = OperatorSpec::laplacian();

// C^inf approximation of the indicator of [n, 2n] with ramps of width w
double smooth_indicator(double a, double n, double w) {
  auto step = [](double t) {
    if (t <= 0) return 0.0;
    if (t >= 1) return 1.0;
    const double p = std::exp(-1 / t), q = std::exp(-1 / (1 - t));
    return p / (p + q);
  };
  return step((a - n + w) / w) * step((2 * n + w - a) / w);
}

// 1D alpha-stable Green function of (-1,1) with pole at 0, via the incomplete beta form
// kappa |x|^{alpha-1} B(w/(1+w); alpha/2, 1/2 - alpha/2), w = (1 - x^2)/x^2, so w/(1+w) = 1 - x^2
double frac_green_origin(double x, double alpha) {
  const double kappa = std::tgamma(0.5) / (std::pow(2.0, alpha) * std::sqrt(oracle::pi) * std::pow(std::tgamma(alpha / 2), 2));
  const double a = alpha / 2, b = 0.5 - alpha / 2;
  return kappa * std::pow(std::abs(x), alpha - 1) * boost::math::beta(a, b, 1 - x * x);
}

}  // namespace

TEST_CASE("clamp and theta") {
  CHECK(s_n(0.0, 1.0) == 1.0);
  CHECK(s_n(3.0, 1.0) == 2.0);
  CHECK(s_n(1.5, 1.0) == 1.5);
  CHECK(theta_n(3.0, 0.0, 1.0) == 6.0);
  CHECK(theta_n(3.0 * 2.5, 0.0, 2.5) == 6.0 * 2.5 * 2.5);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double n = 0.1 + 5 * u(rng);
    const double x = n * (1 + u(rng)), y = n * (1 + u(rng));
    CHECK(theta_n(x, y, n) == 2 * (x - y) * (x - y));
    CHECK(theta_n(n * u(rng), n * u(rng), n) == 0.0);
    CHECK(theta_n(2 * n * (1 + u(rng)), 2 * n * (1 + u(rng)), n) == 0.0);
  }
}

TEST_CASE("sigma and the quadratic Taylor identity") {
  auto one = [](double) { return 1.0; };
  CHECK(sigma(one, 0.3, 1.7) == Approx(0.5).epsilon(1e-15));
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  const double n = 1.0;
  auto ident = [](double a) { return a; };
  auto cubic = [](double a) { return 1 - a + 0.5 * a * a * a; };
  auto bump = [&](double a) { return smooth_indicator(a, n, 0.25); };
  for (int k = 0; k < 100; ++k) {
    const double x = u(rng), y = u(rng);
    const double d2 = (x - y) * (x - y);
    CHECK(std::abs(oracle::taylor_lhs(one, x, y) - d2 * sigma(one, x, y)) <= 1e-12);
    CHECK(std::abs(oracle::taylor_lhs(ident, x, y) - d2 * sigma(ident, x, y)) <= 1e-12);
    CHECK(std::abs(oracle::taylor_lhs(cubic, x, y) - d2 * sigma(cubic, x, y)) <= 1e-12);
    CHECK(std::abs(oracle::taylor_lhs(bump, x, y, {n - 0.25, n, 2 * n, 2 * n + 0.25}) -
                   d2 * sigma(bump, x, y, SigmaRule::adaptive)) <= 1e-10);
  }
  // with the sharp indicator: (x-y)^2 sigma = (1/2)(S(x)-S(y))(2x-S(x)-S(y)), i.e. theta = 4 (x-y)^2 sigma
  auto ind = [&](double a) { return a >= n && a <= 2 * n ? 1.0 : 0.0; };
  for (int k = 0; k < 50; ++k) {
    const double x = u(rng), y = u(rng);
    const double d2 = (x - y) * (x - y);
    const double sx = s_n(x, n), sy = s_n(y, n);
    const double sg = sigma(ind, x, y, SigmaRule::adaptive, {n, 2 * n});
    CHECK(std::abs(d2 * sg - 0.5 * (sx - sy) * (2 * x - sx - sy)) <= 1e-12);
    CHECK(std::abs(theta_n(x, y, n) - 4 * d2 * sg) <= 1e-12);
  }
}

TEST_CASE("cutoffs") {
  const auto eta = Cutoff::smooth(Point{0.0, 0.0}, 0.25, 0.5);
  CHECK(eta(Point{0.1, 0.1}) == 1.0);
  CHECK(eta(Point{0.6, 0.0}) == 0.0);
  CHECK(eta(Point{0.375, 0.0}) == Approx(0.5));
  CHECK(eta.compact());
  CHECK_FALSE((eta + Cutoff::constant(1.0)).compact());
  CHECK((eta + Cutoff::constant(2.0))(Point{0.0, 0.0}) == 3.0);
  CHECK_THROWS_AS(Cutoff::smooth(Point{0.0}, 0.5, 0.5), std::invalid_argument);
}

TEST_CASE("local energy of the disk Dirac potential") {
  const auto u = integral_solution(lap, disk, MeasureData::dirac(Point{0.0, 0.0}));
  const auto eta = Cutoff::smooth(Point{0.0, 0.0}, 0.25, 0.5);
  for (double n : {0.25, 0.5, 1.0, 2.0}) {
    const auto v = local_energy(u, eta, n);
    CHECK_FALSE(v.empty_window);
    CHECK(v.value == Approx(1.0).epsilon(1e-9));
  }
  // linearity in eta; at n = 0.1 the window reaches past the cutoff transition
  const auto e2 = Cutoff::smooth(Point{0.2, 0.0}, 0.1, 0.4, 0.5);
  for (double n : {0.1, 0.25}) {
    const double a = local_energy(u, eta, n).value, b = local_energy(u, e2, n).value;
    CHECK(local_energy(u, eta + e2, n).value == Approx(a + b).epsilon(1e-8));
    CHECK(a >= 0.0);
    CHECK(b >= 0.0);
  }
  // radial oracle for a window that crosses the cutoff transition
  const double n = 0.1;
  const double lo = std::exp(-4 * oracle::pi * n), hi = std::exp(-2 * oracle::pi * n);
  auto radial = [&](double r) { return eta(Point{r, 0.0}) / (2 * oracle::pi * r); };
  CHECK(local_energy(u, eta, n).value == Approx(oracle::integrate(radial, lo, hi, {0.25, 0.5}) / n).epsilon(1e-9));
}

TEST_CASE("local energy: diffuse and grid cases") {
  const auto eta = Cutoff::constant(1.0);
  const auto ub = integral_solution(lap, disk, MeasureData::with_density(Density::constant(1.0)));
  const auto v = local_energy(ub, eta, 1.0);
  CHECK(v.empty_window);
  CHECK(v.value == 0.0);
  // window inside (1 - r^2)/4: |grad u|^2 = r^2/4 on {1/16 <= u <= 1/8}, i.e. r^2 in [1/2, 3/4]
  const double n = 1.0 / 16;
  const double exact = 2 * oracle::pi * oracle::integrate([](double r) { return r * r * r / 4; }, std::sqrt(0.5),
                                                          std::sqrt(0.75)) / n;
  CHECK(local_energy(ub, eta, n).value == Approx(exact).epsilon(1e-4));
  // 1D bounded potential
  const Domain iv = Domain::interval(0.0, 1.0);
  const auto u1 = integral_solution(lap, iv, MeasureData::dirac(Point{0.5}));
  CHECK(local_energy(u1, eta, 0.2).empty_window == false);
  CHECK(local_energy(u1, eta, 0.25).value == 0.0);
  CHECK(local_energy(u1, eta, 0.3).empty_window);
  // {1/16 <= u <= 1/8} = [1/8, 1/4] and mirror with |u'| = 1/2
  CHECK(local_energy(u1, eta, 1.0 / 16).value == Approx(2 * 0.125 * 0.25 * 16).epsilon(1e-10));

  // grid version approximates the disk Dirac value
  const auto grid = make_grid(disk, 1.0 / 128);
  const auto dop = assemble(lap, grid);
  const auto ud = integral_solution(dop, MeasureData::dirac(Point{0.0, 0.0})).field();
  const auto eta0 = Cutoff::smooth(Point{0.0, 0.0}, 0.25, 0.5);
  const auto g = local_energy(dop, ud, eta0, 0.25);
  CHECK(g.value == Approx(1.0).epsilon(0.05));

  // window locality: values away from the window and its neighbours do not matter
  GridField pert = ud;
  const Grid& gr = *grid;
  auto near_window = [&](std::int64_t i) {
    if (ud[i] >= 0.2 && ud[i] <= 0.55) return true;
    const auto l = gr.lattice_of(i);
    for (int k = 0; k < 2; ++k) {
      for (int s : {-1, 1}) {
        const auto nb = gr.neighbor(l, k, s);
        const auto j = nb >= 0 ? gr.interior_of(nb) : -1;
        if (j >= 0 && ud[j] >= 0.2 && ud[j] <= 0.55) return true;
      }
    }
    return false;
  };
  for (std::int64_t i = 0; i < pert.size(); ++i) {
    if (!near_window(i)) pert[i] = ud[i] < 0.25 ? 0.5 * ud[i] : 3 * ud[i];
  }
  CHECK(local_energy(dop, pert, eta0, 0.25).value == g.value);
}

TEST_CASE("nonlocal energy against a nested-quadrature oracle") {
  const double alpha = 0.5, n = 4.0;
  const auto u = integral_solution(OperatorSpec::fractional(alpha), sym, MeasureData::dirac(Point{0.0}));
  const auto eta = Cutoff::smooth(Point{0.0}, 0.25, 0.5);
  for (double x : {0.01, 0.3, -0.7}) CHECK(u(Point{x}) == Approx(frac_green_origin(x, alpha)).epsilon(1e-10));

  // window radii from the oracle Green function
  auto radius = [&](double level) {
    auto f = [&](double r) { return frac_green_origin(r, alpha) - level; };
    std::uintmax_t it = 200;
    const auto r = boost::math::tools::bisect(f, 1e-12, 0.999, boost::math::tools::eps_tolerance<double>(50), it);
    return 0.5 * (r.first + r.second);
  };
  const double rn = radius(n), r2n = radius(2 * n);
  const double c = std::pow(2.0, alpha) * std::tgamma((1 + alpha) / 2) /
                   (std::sqrt(oracle::pi) * std::abs(std::tgamma(-alpha / 2)));
  auto eta1 = [](double x) {
    const double t = (std::abs(x) - 0.25) / 0.25;
    if (t <= 0) return 1.0;
    if (t >= 1) return 0.0;
    const double a = std::exp(-1 / (1 - t)), b = std::exp(-1 / t);
    return a / (a + b);
  };
  auto theta = [&](double a, double b) {
    const double sa = std::clamp(a, n, 2 * n), sb = std::clamp(b, n, 2 * n);
    return 2 * (sa - sb) * (2 * a - sa - sb);
  };
  const std::vector<double> ybreaks{-r2n, -rn, 0.0, rn, r2n};
  auto inner = [&](double x) {
    const double ux = frac_green_origin(x, alpha);
    std::vector<double> br = ybreaks;
    br.push_back(x);
    auto f = [&](double y) {
      if (y == x || y == 0.0) return 0.0;
      const double th = theta(ux, frac_green_origin(y, alpha));
      return th == 0.0 ? 0.0 : th * c * std::pow(std::abs(x - y), -1 - alpha);
    };
    return oracle::integrate(f, -1.0, 1.0, br, 1e-8);
  };
  auto outer = [&](double x) {
    if (x == 0.0) return 0.0;
    const double ux = frac_green_origin(x, alpha);
    const double kill = (c / alpha) * (std::pow(1 + x, -alpha) + std::pow(1 - x, -alpha));
    return eta1(x) * (inner(x) + theta(ux, 0.0) * kill);
  };
  // eta, u and the kernel are even in x
  const double exact = 2 * oracle::integrate(outer, 0.0, 0.5, {r2n, rn, 0.25}, 1e-7) / (2 * n);
  const auto v = nonlocal_energy(u, eta, n);
  CHECK(v.converged);
  CHECK(v.value == Approx(exact).epsilon(1e-4));
}

TEST_CASE("nonlocal energy: trivial cases and trend") {
  const auto eta = Cutoff::smooth(Point{0.0}, 0.25, 0.5);
  const auto u = integral_solution(OperatorSpec::fractional(0.5), sym, MeasureData::dirac(Point{0.0}));
  const auto zero = nonlocal_energy(u, Cutoff::smooth(Point{0.0}, 0.25, 0.5, 0.0), 2.0);
  CHECK(zero.value == 0.0);
  // alpha > d: the atom is diffuse and u is bounded
  const auto ub = integral_solution(OperatorSpec::fractional(1.5), sym, MeasureData::dirac(Point{0.0}));
  const double umax = ub(Point{0.0});
  const auto e = nonlocal_energy(ub, eta, 1.01 * umax);
  CHECK(e.empty_window);
  CHECK(e.value == 0.0);
  CHECK(nonlocal_energy(ub, eta, 0.3 * umax).value >= 0.0);
  double prev = 0.0;
  for (double n : {1.0, 8.0, 64.0}) {
    const auto v = nonlocal_energy(u, eta, n);
    CHECK(v.converged);
    CHECK(v.value > prev);
    prev = v.value;
  }
  CHECK_THROWS_AS(nonlocal_energy(integral_solution(lap, disk, MeasureData::dirac(Point{0.0, 0.0})), eta, 1.0),
                  UnsupportedOperator);
}

TEST_CASE("reconstruction reports") {
  const auto eta = Cutoff::smooth(Point{0.0, 0.0}, 0.25, 0.5);
  const auto u = integral_solution(lap, disk, MeasureData::dirac(Point{0.0, 0.0}));
  const auto rep = reconstruct_mu_c(u, eta, {0.25, 0.5, 1.0});
  CHECK(rep.functional == "local");
  CHECK(rep.target == 1.0);
  for (double v : rep.values) CHECK(v == Approx(1.0).epsilon(1e-9));
  CHECK(rep.prefactor == Approx(1.0).epsilon(1e-9));
  CHECK(rep.warnings.empty());

  const auto ub = integral_solution(lap, disk, MeasureData::with_density(Density::constant(1.0)));
  const auto rb = reconstruct_mu_c(ub, eta, {0.5, 1.0});
  CHECK(rb.target == 0.0);
  CHECK(rb.values == std::vector<double>{0.0, 0.0});
  CHECK(rb.trend == "vanishing");

  // two atoms, eta supported near one of them
  const MeasureData two({{Point{0.4, 0.0}, 2.0}, {Point{-0.4, 0.0}, 3.0}});
  const auto u2 = integral_solution(lap, disk, two);
  const auto e1 = Cutoff::smooth(Point{0.4, 0.0}, 0.05, 0.1);
  CHECK(reconstruction_target(u2, e1) == 2.0);
  CHECK(reconstruction_target(integral_solution(lap, disk, MeasureData::dirac(Point{0.0, 0.0}, -1.0)), eta) == 0.0);
}
