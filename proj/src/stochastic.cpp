#include "potkit/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <exception>
#include <limits>
#include <numbers>

#include <boost/math/tools/roots.hpp>

namespace potkit {

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// uniform on (0, 1]
double uniform_open(Rng& rng) { return 1.0 - uniform01(rng); }

double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

void require_laplacian(const Solution& u, const char* what) {
  if (u.op().kind() != OperatorSpec::Kind::laplacian) {
    throw UnsupportedOperator(std::string(what) + ": Brownian samplers need the laplacian");
  }
  if (!u.closed_form()) throw UnsupportedOperator(std::string(what) + ": needs a closed-form solution");
}

// Nearest point of the boundary of a ball-like or rectangular domain.
Point project_to_boundary(const Domain& dom, const Point& x) {
  if (dom.is_ball_like()) {
    const Point xc = x - dom.center();
    const double r = norm(xc);
    if (r == 0.0) {
      Point e(dom.dim());
      e[0] = dom.radius();
      return dom.center() + e;
    }
    return dom.center() + (dom.radius() / r) * xc;
  }
  Point p = x;
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  bool upper = false;
  for (int i = 0; i < dom.dim(); ++i) {
    const double dl = x[i] - dom.lower()[i];
    const double du = dom.upper()[i] - x[i];
    if (dl < best_d) best_d = dl, best = i, upper = false;
    if (du < best_d) best_d = du, best = i, upper = true;
  }
  p[best] = upper ? dom.upper()[best] : dom.lower()[best];
  return p;
}

double nearest_atom_distance(const Solution& u, const Point& x) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& a : u.decomposition().concentrated.atoms()) d = std::min(d, distance(x, a.x));
  return d;
}

bool is_radial(const Solution& u) {
  const Domain& dom = u.domain();
  if (!dom.is_ball_like()) return false;
  for (const auto& a : u.measure().atoms()) {
    if (a.weight < 0.0 || distance(a.x, dom.center()) > 1e-14 * dom.radius()) return false;
  }
  const Density& f = u.measure().density();
  return f.empty() || (f.kind() == Density::Kind::constant && f.amplitude() >= 0.0);
}

double density_max(const Density& rho) {
  switch (rho.kind()) {
    case Density::Kind::constant:
    case Density::Kind::gaussian:
      return std::abs(rho.amplitude());
    case Density::Kind::field: {
      double m = 0.0;
      for (double v : rho.nodes().values()) m = std::max(m, std::abs(v));
      return m;
    }
    case Density::Kind::none:
      break;
  }
  throw std::invalid_argument("sample_start: empty start density");
}

Estimate positive_part_mean(const std::vector<double>& values, double n) {
  std::vector<double> v(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) v[i] = std::max(values[i] - n, 0.0);
  return summarize(v);
}

}  // namespace

Rng substream(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t state = seed;
  state = splitmix64(state) ^ index;
  return Rng(splitmix64(state));
}

Estimate summarize(const std::vector<double>& values) {
  Estimate e;
  e.samples = static_cast<std::int64_t>(values.size());
  if (values.empty()) return e;
  double s = 0.0;
  for (double v : values) s += v;
  e.mean = s / static_cast<double>(values.size());
  if (values.size() < 2) return e;
  double q = 0.0;
  for (double v : values) q += (v - e.mean) * (v - e.mean);
  const double n = static_cast<double>(values.size());
  e.stderr_ = std::sqrt(q / (n - 1.0) / n);
  return e;
}

std::vector<double> sample_values(std::int64_t n, std::uint64_t seed,
                                  const std::function<double(std::int64_t, Rng&)>& f) {
  std::vector<double> out(static_cast<std::size_t>(n));
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      Rng rng = substream(seed, static_cast<std::uint64_t>(i));
      out[static_cast<std::size_t>(i)] = f(i, rng);
    } catch (...) {
#pragma omp critical(potkit_sample_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

Point random_direction(int d, Rng& rng) {
  Point e(d);
  if (d == 1) {
    e[0] = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    return e;
  }
  if (d == 2) {
    const double t = 2.0 * kPi * uniform01(rng);
    e[0] = std::cos(t);
    e[1] = std::sin(t);
    return e;
  }
  double r = 0.0;
  do {
    for (int i = 0; i < d; ++i) e[i] = standard_normal(rng);
    r = norm(e);
  } while (r == 0.0);
  return (1.0 / r) * e;
}

Point wos_exit(const Domain& dom, const Point& x, Rng& rng, double eps_rel) {
  if (!dom.contains(x)) throw std::invalid_argument("wos_exit: start point must be interior");
  if (dom.kind() == Domain::Kind::interval) {
    const double a = dom.lower()[0], b = dom.upper()[0];
    return Point{uniform01(rng) < (x[0] - a) / (b - a) ? b : a};
  }
  if (dom.kind() == Domain::Kind::ball && dom.dim() == 2) {
    const double r = dom.radius();
    const std::complex<double> z0((x[0] - dom.center()[0]) / r, (x[1] - dom.center()[1]) / r);
    const std::complex<double> zeta = std::polar(1.0, 2.0 * kPi * uniform01(rng));
    const std::complex<double> w = (zeta + z0) / (1.0 + std::conj(z0) * zeta);
    return project_to_boundary(dom, Point{dom.center()[0] + r * w.real(), dom.center()[1] + r * w.imag()});
  }
  if (dom.has_mask()) throw UnsupportedOperator("wos_exit: masked rectangles are not supported");
  const double eps = eps_rel * dom.diameter();
  Point y = x;
  for (;;) {
    const double r = dom.distance_to_boundary(y);
    if (r <= eps) return project_to_boundary(dom, y);
    y += r * random_direction(dom.dim(), rng);
  }
}

double positive_stable(double beta, Rng& rng) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("positive_stable: beta must lie in (0,1)");
  const double u = kPi * uniform_open(rng);
  const double e = -std::log(uniform_open(rng));
  return std::sin(beta * u) / std::pow(std::sin(u), 1.0 / beta) *
         std::pow(std::sin((1.0 - beta) * u) / e, (1.0 - beta) / beta);
}

Point stable_increment(int d, double alpha, Rng& rng) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("stable_increment: alpha must lie in (0,2)");
  const double s = std::sqrt(2.0 * positive_stable(0.5 * alpha, rng));
  Point g(d);
  for (int i = 0; i < d; ++i) g[i] = s * standard_normal(rng);
  return g;
}

Point stable_exit(const Domain& dom, const Point& x, double alpha, double dt, Rng& rng, std::int64_t max_steps) {
  if (!(dt > 0.0)) throw std::invalid_argument("stable_exit: dt must be positive");
  if (!dom.contains(x)) throw std::invalid_argument("stable_exit: start point must be interior");
  const double scale = std::pow(dt, 1.0 / alpha);
  Point y = x;
  for (std::int64_t step = 0; step < max_steps; ++step) {
    y += scale * stable_increment(dom.dim(), alpha, rng);
    if (!dom.contains(y)) return y;
  }
  throw StepBudgetExceeded("stable_exit: step budget exceeded");
}

Point sample_start(const Domain& dom, const Density& rho, Rng& rng) {
  const double m = density_max(rho);
  if (!(m > 0.0)) throw std::invalid_argument("sample_start: start density vanishes");
  Point lo = dom.is_ball_like() ? dom.center() : dom.lower();
  Point hi = dom.is_ball_like() ? dom.center() : dom.upper();
  if (dom.is_ball_like()) {
    for (int i = 0; i < dom.dim(); ++i) lo[i] -= dom.radius(), hi[i] += dom.radius();
  }
  for (int attempt = 0; attempt < 100'000'000; ++attempt) {
    Point y(dom.dim());
    for (int i = 0; i < dom.dim(); ++i) y[i] = lo[i] + (hi[i] - lo[i]) * uniform01(rng);
    if (!dom.contains(y)) continue;
    const double v = rho(y);
    if (v < 0.0) throw std::invalid_argument("sample_start: start density must be nonnegative");
    if (uniform01(rng) * m < v) return y;
  }
  throw StepBudgetExceeded("sample_start: rejection sampler did not accept");
}

Point sample_start(const Domain& dom, const StartLaw& law, Rng& rng) {
  if (law.kind == StartLaw::Kind::point) {
    if (!dom.contains(law.x)) throw std::invalid_argument("start point must be interior");
    return law.x;
  }
  return sample_start(dom, law.rho, rng);
}

std::string StoppingFamily::kind_name() const {
  switch (kind) {
    case Kind::reducing:
      return "reducing";
    case Kind::region:
      return "region";
    case Kind::fixed_time:
      return "fixed_time";
  }
  return "";
}

double reducing_radius(const Solution& u, double k) {
  if (!is_radial(u)) {
    throw UnsupportedOperator("reducing family: level sets are computed for potentials radial about the domain center");
  }
  const Domain& dom = u.domain();
  const Point c = dom.center();
  Point e(dom.dim());
  e[0] = 1.0;
  auto w = [&](double r) { return std::abs(u(c + r * e)); };
  const double R = dom.radius();
  constexpr double kTiny = 1e-150;
  if (w(kTiny * R) <= k) {
    if (!u.decomposition().concentrated.atoms().empty()) {
      throw std::invalid_argument("reducing family: level k exceeds the resolvable range of the atom");
    }
    return 0.0;
  }
  // w decreases in r; solve in log-radius
  auto f = [&](double s) { return w(R * std::exp(s)) - k; };
  double lo = std::log(kTiny), hi = 0.0;
  if (f(hi) >= 0.0) return R;
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return R * std::exp(0.5 * (a + b));
}

StopOutcome stop_path(const Solution& u, const StoppingFamily& family, double param, const Point& x, Rng& rng) {
  require_laplacian(u, "stop_path");
  const Domain& dom = u.domain();
  if (dom.has_mask()) throw UnsupportedOperator("stop_path: masked rectangles are not supported");
  if (!dom.contains(x)) return {x, 0.0, false};
  const int d = dom.dim();
  const double eps = family.eps_rel * dom.diameter();
  Point y = x;
  switch (family.kind) {
    case StoppingFamily::Kind::reducing: {
      const double rk = reducing_radius(u, param);
      const Point c = dom.center();
      if (distance(y, c) < rk) return {y, std::abs(u(y)), true};
      const double eps_inner = family.eps_rel * rk;
      for (;;) {
        const double rb = dom.distance_to_boundary(y);
        if (rb <= eps) return {project_to_boundary(dom, y), 0.0, false};
        double r = rb;
        if (rk > 0.0) {
          const double ri = distance(y, c) - rk;
          if (ri <= eps_inner) return {y, param, true};
          r = std::min(r, ri);
        }
        y += r * random_direction(d, rng);
      }
    }
    case StoppingFamily::Kind::region: {
      const double rr = param;
      if (!(distance(y, family.center) < rr)) return {y, std::abs(u(y)), true};
      for (;;) {
        const double rb = dom.distance_to_boundary(y);
        if (rb <= eps) return {project_to_boundary(dom, y), 0.0, false};
        const double ri = rr - distance(y, family.center);
        if (ri <= eps) return {y, std::abs(u(y)), true};
        y += std::min(rb, ri) * random_direction(d, rng);
      }
    }
    case StoppingFamily::Kind::fixed_time: {
      double t = 0.0;
      for (;;) {
        const double rb = dom.distance_to_boundary(y);
        if (rb <= eps) return {project_to_boundary(dom, y), 0.0, false};
        if (t >= param) return {y, std::abs(u(y)), true};
        // variance 2 dt per coordinate
        const double sd = std::min(family.step_fraction * std::min(rb, nearest_atom_distance(u, y)),
                                   std::sqrt(2.0 * (param - t)));
        t = std::min(param, t + 0.5 * sd * sd);
        Point z(d);
        for (int i = 0; i < d; ++i) z[i] = sd * standard_normal(rng);
        y += z;
        if (!dom.contains(y)) return {project_to_boundary(dom, y), 0.0, false};
      }
    }
  }
  return {y, 0.0, false};
}

ReducingResult reducing_expectation(const Solution& u, double k, double n, const StartLaw& start,
                                    std::int64_t samples, std::uint64_t seed) {
  StoppingFamily fam;
  fam.kind = StoppingFamily::Kind::reducing;
  fam.params = {k};
  std::vector<double> early(static_cast<std::size_t>(samples));
  const auto vals = sample_values(samples, seed, [&](std::int64_t i, Rng& rng) {
    const Point x0 = sample_start(u.domain(), start, rng);
    const StopOutcome s = stop_path(u, fam, k, x0, rng);
    early[static_cast<std::size_t>(i)] = s.before_exit ? 1.0 : 0.0;
    return s.value;
  });
  ReducingResult r;
  r.value = positive_part_mean(vals, n);
  r.early_fraction = summarize(early).mean;
  return r;
}

UIDiagnostic class_d_diagnostic(const Solution& u, const StoppingFamily& family, const std::vector<double>& levels,
                                const Density& rho, std::int64_t samples, std::uint64_t seed, double target) {
  if (family.params.empty()) throw std::invalid_argument("class_d_diagnostic: empty stopping family");
  if (levels.empty()) throw std::invalid_argument("class_d_diagnostic: no levels");
  UIDiagnostic out;
  out.levels = levels;
  out.target = target;
  out.estimates.assign(levels.size(), Estimate{});
  out.argmax_param.assign(levels.size(), family.params.front());
  std::vector<bool> seen(levels.size(), false);
  for (double p : family.params) {
    const auto vals = sample_values(samples, seed, [&](std::int64_t, Rng& rng) {
      const Point x0 = sample_start(u.domain(), rho, rng);
      return stop_path(u, family, p, x0, rng).value;
    });
    for (std::size_t j = 0; j < levels.size(); ++j) {
      const Estimate e = positive_part_mean(vals, levels[j]);
      if (!seen[j] || e.mean > out.estimates[j].mean) {
        out.estimates[j] = e;
        out.argmax_param[j] = p;
        seen[j] = true;
      }
    }
  }
  for (std::size_t j = 1; j < levels.size(); ++j) {
    const Estimate& a = out.estimates[j - 1];
    const Estimate& b = out.estimates[j];
    if (levels[j] > levels[j - 1] && b.mean > a.mean + 3.0 * std::hypot(a.stderr_, b.stderr_)) {
      out.warnings.push_back("estimate increases between levels " + std::to_string(levels[j - 1]) + " and " +
                             std::to_string(levels[j]));
    }
  }
  const std::size_t top = static_cast<std::size_t>(std::max_element(levels.begin(), levels.end()) - levels.begin());
  out.limit = out.estimates[top].mean;
  out.limit_stderr = out.estimates[top].stderr_;
  const bool vanishing = out.limit == 0.0 || out.limit <= 3.0 * out.limit_stderr;
  out.verdict = vanishing ? "class-D" : "not-class-D";
  if (!vanishing && target > 0.0 && std::abs(out.limit - target) > 3.0 * out.limit_stderr) {
    out.warnings.push_back("plateau differs from the concentrated target by more than 3 standard errors");
  }
  return out;
}

MaximalCheck maximal_inequality_check(const Solution& u, const Density& rho, double d1, std::int64_t samples,
                                      std::uint64_t seed, double step_fraction, double eps_rel) {
  require_laplacian(u, "maximal_inequality_check");
  const Domain& dom = u.domain();
  if (dom.has_mask()) throw UnsupportedOperator("maximal_inequality_check: masked rectangles are not supported");
  if (!(d1 >= 0.0)) throw std::invalid_argument("maximal_inequality_check: d1 norm must be finite and nonnegative");
  const double diam = dom.diameter();
  const double eps = eps_rel * diam;
  const double zone = 1e-3 * diam;
  const int d = dom.dim();
  const auto& atoms = u.decomposition().concentrated.atoms();
  constexpr std::int64_t kMaxSteps = 100'000'000;
  const auto vals = sample_values(samples, seed, [&](std::int64_t, Rng& rng) {
    Point y = sample_start(dom, rho, rng);
    double sup = std::abs(u(y));
    for (std::int64_t step = 0; step < kMaxSteps; ++step) {
      const double rb = dom.distance_to_boundary(y);
      if (rb <= eps) return std::sqrt(sup);
      std::size_t near = atoms.size();
      double ra = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < atoms.size(); ++j) {
        const double r = distance(y, atoms[j].x);
        if (r < ra) ra = r, near = j;
      }
      if (ra < zone && 2.0 * ra < rb) {
        // excursion inside B(a, 2r): closest approach has the law of the radial hitting probabilities
        const Point& a = atoms[near].x;
        const double R = 2.0 * ra;
        const double U = uniform_open(rng);
        const double q = 2.0 - d;
        double s = d == 2 ? R * std::exp(-std::log(R / ra) / U)
                          : std::pow(std::pow(R, q) + (std::pow(ra, q) - std::pow(R, q)) / U, 1.0 / q);
        s = std::max(s, 1e-150 * diam);
        sup = std::max(sup, std::abs(u(a + s * (1.0 / ra) * (y - a))));
        y = a + R * random_direction(d, rng);
        continue;
      }
      const double sd = step_fraction * std::min(rb, ra);
      Point z(d);
      for (int i = 0; i < d; ++i) z[i] = sd * standard_normal(rng);
      y += z;
      if (!dom.contains(y)) return std::sqrt(sup);
      sup = std::max(sup, std::abs(u(y)));
    }
    throw StepBudgetExceeded("maximal_inequality_check: step budget exceeded");
  });
  MaximalCheck m;
  m.lhs = summarize(vals);
  m.bound = 2.0 * std::sqrt(d1);
  m.margin = m.bound + 3.0 * m.lhs.stderr_ - m.lhs.mean;
  m.pass = m.margin >= 0.0;
  return m;
}

}  // namespace potkit
