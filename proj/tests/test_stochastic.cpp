#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <omp.h>

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "potkit/stochastic.hpp"

using namespace potkit;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;
const Domain disk = Domain::ball(Point{0.0, 0.0}, 1.0);
const OperatorSpec lap = OperatorSpec::laplacian();

template <class F>
double gk(F&& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

// int over the unit circle of P(x, z) g(z)
template <class G>
double disk_harmonic(const Point& x, G&& g) {
  return gk([&](double t) {
    const Point z{std::cos(t), std::sin(t)};
    return poisson_kernel(lap, disk, x, z) * g(z);
  }, 0.0, 2.0 * kPi);
}

bool within(const Estimate& e, double exact, double k = 3.0) { return std::abs(e.mean - exact) <= k * e.stderr_; }

Solution disk_dirac() { return integral_solution(lap, disk, MeasureData::dirac(Point{0.0, 0.0})); }
Solution disk_bounded() { return integral_solution(lap, disk, MeasureData::with_density(Density::constant(1.0))); }

}  // namespace

TEST_CASE("substreams and reductions are deterministic") {
  Rng a = substream(42, 7), b = substream(42, 7), c = substream(42, 8), e = substream(43, 7);
  const auto va = a(), vb = b(), vc = c(), ve = e();
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != ve);

  auto f = [](std::int64_t, Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); };
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto one = sample_values(5000, 9, f);
  omp_set_num_threads(4);
  const auto four = sample_values(5000, 9, f);
  omp_set_num_threads(saved);
  CHECK(one == four);
  const Estimate s1 = summarize(one), s4 = summarize(four);
  CHECK(s1.mean == s4.mean);
  CHECK(s1.stderr_ == s4.stderr_);

  const Estimate k = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(k.mean == 2.5);
  CHECK(k.stderr_ == Approx(std::sqrt(5.0 / 3.0 / 4.0)).epsilon(1e-15));
  CHECK(k.samples == 4);
}

TEST_CASE("stderr scales like N^-1/2") {
  auto f = [](std::int64_t, Rng& rng) {
    const Point x = wos_exit(disk, Point{0.3, 0.2}, rng);
    return x[0];
  };
  const Estimate e3 = summarize(sample_values(1000, 5, f));
  const Estimate e4 = summarize(sample_values(10000, 5, f));
  const Estimate e5 = summarize(sample_values(100000, 5, f));
  CHECK(e3.stderr_ / e4.stderr_ == Approx(std::sqrt(10.0)).epsilon(0.5));
  CHECK(e4.stderr_ / e5.stderr_ == Approx(std::sqrt(10.0)).epsilon(0.5));
  CHECK(e3.stderr_ / e4.stderr_ >= std::sqrt(10.0) / 1.5);
  CHECK(e3.stderr_ / e4.stderr_ <= std::sqrt(10.0) * 1.5);
  CHECK(e4.stderr_ / e5.stderr_ >= std::sqrt(10.0) / 1.5);
  CHECK(e4.stderr_ / e5.stderr_ <= std::sqrt(10.0) * 1.5);
}

TEST_CASE("walk on spheres: exact disk draws") {
  constexpr std::int64_t N = 100000;
  SUBCASE("center: uniform on the circle") {
    std::vector<double> sector(16, 0.0);
    const auto angles = sample_values(N, 11, [](std::int64_t, Rng& rng) {
      const Point z = wos_exit(disk, Point{0.0, 0.0}, rng);
      CHECK(norm(z) == Approx(1.0).epsilon(1e-14));
      return std::atan2(z[1], z[0]);
    });
    for (double t : angles) sector[static_cast<std::size_t>(std::min(15.0, (t + kPi) / (2 * kPi) * 16))] += 1.0;
    double chi2 = 0.0;
    const double expected = N / 16.0;
    for (double c : sector) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 30.578);  // chi-square(15) at the 1% level

    std::vector<double> xs(angles.size());
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = std::cos(angles[i]);
    CHECK(within(summarize(xs), 0.0));
  }
  SUBCASE("harmonic measure agreement") {
    const Point x{0.3, 0.2};
    auto g = [](const Point& z) { return z[0] * z[0] + std::exp(z[1]); };
    const double exact = disk_harmonic(x, g);
    const Estimate e = summarize(sample_values(N, 12, [&](std::int64_t, Rng& rng) { return g(wos_exit(disk, x, rng)); }));
    CHECK(within(e, exact));
  }
  SUBCASE("near the boundary the exit concentrates") {
    const Point x{0.9, 0.0};
    const Point z0{1.0, 0.0};
    const double exact = disk_harmonic(x, [&](const Point& z) { return distance(z, z0); });
    const Estimate e =
        summarize(sample_values(N, 13, [&](std::int64_t, Rng& rng) { return distance(wos_exit(disk, x, rng), z0); }));
    CHECK(e.mean < disk.diameter() / 4);
    CHECK(within(e, exact));
  }
}

TEST_CASE("walk on spheres: iterated steps") {
  constexpr std::int64_t N = 40000;
  SUBCASE("interval") {
    const Domain I = Domain::interval(0.0, 2.0);
    const Estimate e = summarize(
        sample_values(N, 21, [&](std::int64_t, Rng& rng) { return wos_exit(I, Point{0.5}, rng)[0] == 2.0 ? 1.0 : 0.0; }));
    CHECK(within(e, 0.25));
  }
  SUBCASE("ball in 3D, harmonic test functions") {
    const Domain B = Domain::ball(Point{0.0, 0.0, 0.0}, 1.0);
    const Point x{0.2, -0.3, 0.4};
    const Estimate e = summarize(sample_values(N, 22, [&](std::int64_t, Rng& rng) {
      const Point z = wos_exit(B, x, rng);
      CHECK(norm(z) == Approx(1.0).epsilon(1e-14));
      return z[0] * z[0] - z[1] * z[1] + z[2];
    }));
    CHECK(within(e, 0.04 - 0.09 + 0.4));
  }
  SUBCASE("rectangle") {
    const Domain R = Domain::rectangle(Point{0.0, 0.0}, Point{2.0, 1.0});
    const Point x{0.7, 0.4};
    const Estimate e = summarize(sample_values(N, 23, [&](std::int64_t, Rng& rng) {
      const Point z = wos_exit(R, x, rng);
      return z[0] * z[1] + z[0];
    }));
    CHECK(within(e, 0.7 * 0.4 + 0.7));
  }
  SUBCASE("masked rectangles are rejected") {
    const Domain M = Domain::rectangle(Point{0.0, 0.0}, Point{1.0, 1.0}, [](const Point& p) { return p[0] < 0.5; });
    Rng rng = substream(1, 0);
    CHECK_THROWS_AS(wos_exit(M, Point{0.25, 0.5}, rng), UnsupportedOperator);
  }
}

TEST_CASE("stable increments") {
  constexpr std::int64_t N = 100000;
  for (double alpha : {0.5, 1.0, 1.5}) {
    CAPTURE(alpha);
    const Estimate a = summarize(sample_values(N, 31, [&](std::int64_t, Rng& rng) {
      return std::exp(-positive_stable(0.5 * alpha, rng));
    }));
    CHECK(within(a, std::exp(-1.0), 4.0));
    const Estimate c1 = summarize(sample_values(N, 32, [&](std::int64_t, Rng& rng) {
      return std::cos(1.3 * stable_increment(1, alpha, rng)[0]);
    }));
    CHECK(within(c1, std::exp(-std::pow(1.3, alpha)), 4.0));
    const Estimate c2 = summarize(sample_values(N, 33, [&](std::int64_t, Rng& rng) {
      const Point s = stable_increment(2, alpha, rng);
      return std::cos(0.8 * s[0] + 0.6 * s[1]);
    }));
    CHECK(within(c2, std::exp(-1.0), 4.0));
  }
  Rng rng = substream(1, 0);
  CHECK_THROWS_AS(stable_increment(1, 2.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(stable_exit(Domain::interval(-1, 1), Point{0.0}, 1.5, 1e-9, rng, 10), StepBudgetExceeded);
}

TEST_CASE("stable exit law") {
  const Domain I = Domain::interval(-1.0, 1.0);
  const double alpha = 1.5;
  const OperatorSpec frac = OperatorSpec::fractional(alpha);
  // 16 bins per side in s = 1 - 1/|z|
  std::vector<double> p(32);
  for (int b = 0; b < 16; ++b) {
    const double s0 = b / 16.0, s1 = (b + 1) / 16.0;
    const double m = gk([&](double t) {
      const double s = s0 + (s1 - s0) * t * t * t * t;
      if (t <= 0.0 || s >= 1.0) return 0.0;
      const double z = 1.0 / (1.0 - s);
      if (z <= 1.0) return 0.0;
      return poisson_kernel(frac, I, Point{0.0}, Point{z}) * z * z * (s1 - s0) * 4 * t * t * t;
    }, 0.0, 1.0);
    p[16 + b] = p[15 - b] = m;
  }
  auto tv = [&](double dt, std::int64_t N) {
    const auto z = sample_values(N, 41, [&](std::int64_t, Rng& rng) {
      const double v = stable_exit(I, Point{0.0}, alpha, dt, rng)[0];
      CHECK(std::abs(v) >= 1.0);
      return v;
    });
    std::vector<double> h(32, 0.0);
    for (double v : z) {
      const int b = std::min(15, static_cast<int>((1.0 - 1.0 / std::abs(v)) * 16));
      h[static_cast<std::size_t>(v > 0 ? 16 + b : 15 - b)] += 1.0 / static_cast<double>(N);
    }
    double d = 0.0;
    for (int i = 0; i < 32; ++i) d += std::abs(h[static_cast<std::size_t>(i)] - p[static_cast<std::size_t>(i)]);
    std::vector<double> sign(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) sign[i] = z[i] > 0 ? 1.0 : -1.0;
    CHECK(within(summarize(sign), 0.0));
    return 0.5 * d;
  };
  const double coarse = tv(1e-2, 20000);
  const double fine = tv(1e-3, 40000);
  MESSAGE("exit-law TV: dt=1e-2 " << coarse << ", dt=1e-3 " << fine);
  CHECK(fine < 0.05);
  CHECK(fine < coarse);
}

TEST_CASE("reducing family on the disk Dirac potential") {
  const Solution u = disk_dirac();
  const Point x{0.5, 0.0};
  const double ux = std::log(2.0) / (2 * kPi);
  CHECK(reducing_radius(u, 4.0) == Approx(std::exp(-8 * kPi)).epsilon(1e-12));

  const ReducingResult r = reducing_expectation(u, 4.0, 1.0, StartLaw::at(x), 100000, 2024);
  CHECK(within(r.value, 0.75 * ux));
  CHECK(r.value.stderr_ < 0.002);

  CHECK(reducing_expectation(u, 4.0, 4.0, StartLaw::at(x), 2000, 1).value.mean == 0.0);
  CHECK(reducing_expectation(u, 4.0, 5.0, StartLaw::at(x), 2000, 1).value.mean == 0.0);

  double previous = 1.0;
  for (double k : {2.0, 4.0, 16.0, 48.0}) {
    CAPTURE(k);
    const ReducingResult rk = reducing_expectation(u, k, 1.0, StartLaw::at(x), 40000, 7);
    CHECK(within(rk.value, (k - 1.0) / k * ux));
    CHECK(rk.early_fraction == Approx(ux / k).epsilon(0.15));
    CHECK(rk.early_fraction < previous);
    previous = rk.early_fraction;
  }

  const ReducingResult rho = reducing_expectation(u, 8.0, 1.0, StartLaw::from(Density::constant(1 / kPi)), 40000, 8);
  CHECK(within(rho.value, 7.0 / 8.0 / (4 * kPi)));
}

TEST_CASE("reducing family on a bounded potential") {
  const Solution u = disk_bounded();
  CHECK(reducing_radius(u, 0.09) == Approx(std::sqrt(1 - 4 * 0.09)).epsilon(1e-12));
  CHECK(reducing_radius(u, 0.25) == 0.0);
  // start inside {u > k}: stopped at once
  Rng rng = substream(3, 0);
  StoppingFamily fam;
  const StopOutcome s = stop_path(u, fam, 0.09, Point{0.1, 0.0}, rng);
  CHECK(s.before_exit);
  CHECK(s.value == Approx(0.99 / 4).epsilon(1e-14));
  // exit of {u <= 0.09} from |x| = 0.9: hits radius 0.8 with probability ln(1/0.9)/ln(1/0.8)
  const ReducingResult r = reducing_expectation(u, 0.09, 0.0, StartLaw::at(Point{0.0, 0.9}), 40000, 4);
  CHECK(within(r.value, 0.09 * std::log(0.9) / std::log(0.8)));
}

TEST_CASE("other stopping families") {
  const Solution u = disk_bounded();
  StoppingFamily region;
  region.kind = StoppingFamily::Kind::region;
  region.center = Point{0.0, 0.0};
  Rng rng = substream(5, 0);
  const StopOutcome s = stop_path(u, region, 0.5, Point{0.1, 0.2}, rng);
  CHECK(s.before_exit);
  CHECK(norm(s.x) == Approx(0.5).epsilon(1e-5));
  CHECK(s.value == Approx(0.75 / 4).epsilon(1e-5));
  const StopOutcome outside = stop_path(u, region, 0.5, Point{0.7, 0.0}, rng);
  CHECK(outside.value == Approx(0.51 / 4).epsilon(1e-14));

  StoppingFamily clock;
  clock.kind = StoppingFamily::Kind::fixed_time;
  const StopOutcome t0 = stop_path(u, clock, 0.0, Point{0.3, 0.0}, rng);
  CHECK(t0.value == Approx(0.91 / 4).epsilon(1e-14));
  // Dynkin: E u(X_{t ^ tau}) = u(x) - E (t ^ tau) since -Delta u = 1
  const Point x{0.3, 0.0};
  const double t = 0.05;
  const auto vals = sample_values(20000, 6, [&](std::int64_t, Rng& r) { return stop_path(u, clock, t, x, r).value; });
  const Estimate e = summarize(vals);
  CHECK(e.mean < 0.91 / 4);
  CHECK(e.mean > 0.91 / 4 - t);

  CHECK_THROWS_AS(stop_path(integral_solution(lap, disk, MeasureData::dirac(Point{0.2, 0.0})), StoppingFamily{}, 4.0,
                            Point{0.5, 0.0}, rng),
                  UnsupportedOperator);
  CHECK_THROWS_AS(stop_path(integral_solution(OperatorSpec::fractional(1.0), disk, MeasureData::dirac(Point{0.0, 0.0})),
                            StoppingFamily{}, 4.0, Point{0.5, 0.0}, rng),
                  UnsupportedOperator);
}

TEST_CASE("class-(D) diagnostics") {
  const Density rho = Density::constant(1 / kPi);
  SUBCASE("bounded potential: exact zeros above the maximum") {
    StoppingFamily fam;
    fam.params = {0.05, 0.1, 0.2, 1.0};
    const UIDiagnostic D = class_d_diagnostic(disk_bounded(), fam, {0.1, 0.25, 0.5, 1.0}, rho, 20000, 5, 0.0);
    CHECK(D.verdict == "class-D");
    CHECK(D.estimates[0].mean > 0.0);
    for (std::size_t j = 1; j < D.levels.size(); ++j) CHECK(D.estimates[j].mean == 0.0);
    CHECK(D.warnings.empty());
  }
  SUBCASE("zero potential") {
    StoppingFamily fam;
    fam.kind = StoppingFamily::Kind::region;
    fam.center = Point{0.0, 0.0};
    fam.params = {0.3, 0.6};
    const Solution zero = integral_solution(lap, disk, MeasureData{});
    const UIDiagnostic D = class_d_diagnostic(zero, fam, {0.0, 0.5}, rho, 2000, 5, 0.0);
    for (const auto& e : D.estimates) CHECK(e.mean == 0.0);
    CHECK(D.verdict == "class-D");
  }
  SUBCASE("disk Dirac: plateau at the concentrated mass") {
    StoppingFamily fam;
    fam.params = {8.0, 16.0, 32.0, 48.0};
    const double target = 1 / (4 * kPi);
    const UIDiagnostic D = class_d_diagnostic(disk_dirac(), fam, {0.25, 0.5, 1.0}, rho, 30000, 5, target);
    CHECK(D.verdict == "not-class-D");
    CHECK(std::abs(D.limit - target) <= 3 * D.limit_stderr);
    CHECK(D.warnings.empty());
    for (std::size_t j = 1; j < D.levels.size(); ++j) {
      CHECK(D.estimates[j].mean <= D.estimates[j - 1].mean + 3 * D.estimates[j].stderr_);
    }
  }
}

TEST_CASE("maximal inequality") {
  const Density rho = Density::constant(1 / kPi);
  SUBCASE("zero potential") {
    const MaximalCheck m = maximal_inequality_check(integral_solution(lap, disk, MeasureData{}), rho, 0.0, 1000, 1);
    CHECK(m.lhs.mean == 0.0);
    CHECK(m.pass);
  }
  SUBCASE("disk Dirac") {
    const double d1 = 1 / (4 * kPi);
    const MaximalCheck m = maximal_inequality_check(disk_dirac(), rho, d1, 10000, 2);
    CHECK(m.pass);
    CHECK(m.bound == Approx(2 * std::sqrt(d1)).epsilon(1e-15));
    // analytic left side: 2 E_rho sqrt(u) = 1/2
    CHECK(m.lhs.mean == Approx(0.5).epsilon(0.1));
  }
  SUBCASE("bounded potential") {
    const MaximalCheck m = maximal_inequality_check(disk_bounded(), rho, 0.125, 10000, 3);
    CHECK(m.pass);
    // the supremum dominates the starting value: E sqrt(u(x)) = int sqrt((1-r^2)/4) 2r dr = 1/3
    CHECK(m.lhs.mean > 1.0 / 3.0);
  }
  SUBCASE("interval Dirac potential") {
    const Domain I = Domain::interval(0.0, 1.0);
    const Solution u = integral_solution(lap, I, MeasureData::dirac(Point{0.5}));
    const MaximalCheck m = maximal_inequality_check(u, Density::constant(1.0), 0.125, 10000, 4);
    CHECK(m.pass);
    CHECK(m.margin > 0.0);
  }
}
