#include "potkit/acceptance.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "potkit/envelope.hpp"
#include "potkit/experiment.hpp"
#include "potkit/reconstruct.hpp"
#include "potkit/solve.hpp"
#include "potkit/stochastic.hpp"

namespace potkit::acceptance {

namespace {

constexpr double kPi = std::numbers::pi;

const Domain kDisk = Domain::ball(Point{0.0, 0.0}, 1.0);
const OperatorSpec kLap = OperatorSpec::laplacian();

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string join(const std::vector<double>& v, int digits = 6) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i], digits);
  return s;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Solution disk_dirac() { return integral_solution(kLap, kDisk, MeasureData::dirac(Point{0.0, 0.0})); }
Solution disk_bounded() { return integral_solution(kLap, kDisk, MeasureData::with_density(Density::constant(1.0))); }

std::vector<bool> ball_set(const Grid& g, const Point& c, double r) {
  std::vector<bool> V(static_cast<std::size_t>(g.interior_count()));
  for (std::int64_t i = 0; i < g.interior_count(); ++i) V[static_cast<std::size_t>(i)] = distance(g.interior_coord(i), c) < r;
  return V;
}

double max_abs_diff(const GridField& a, const GridField& b) {
  double m = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------------------

CriterionResult kernel_accuracy() {
  CriterionResult r{1, "kernel accuracy", false, "", "error <= 5e-4 at h=2^-10; order >= 1.9; < 1 s", "", 0};
  const auto t0 = std::chrono::steady_clock::now();
  const Domain I = Domain::interval(0.0, 1.0);
  // G(x, y) = x (1 - y) for x <= y
  const double exact = 0.25 * (1.0 - 0.5);
  std::vector<double> hs, errs;
  for (int e = 7; e <= 10; ++e) {
    const double h = std::ldexp(1.0, -e);
    const auto grid = make_grid(I, h);
    const auto dop = assemble(kLap, grid);
    const auto col = discrete_green(dop, grid->interior_node_at(Point{0.5}));
    hs.push_back(h);
    errs.push_back(std::abs(col[grid->interior_node_at(Point{0.25})] - exact));
  }
  r.seconds = seconds_since(t0);
  bool roundoff = true;
  for (double e : errs) roundoff = roundoff && e <= 1e-13;
  std::vector<double> orders;
  bool order_ok = true;
  for (std::size_t k = 1; k < errs.size(); ++k) {
    const double o = std::log2(errs[k - 1] / errs[k]);
    orders.push_back(o);
    order_ok = order_ok && o >= 1.9;
  }
  r.pass = errs.back() <= 5e-4 && (order_ok || roundoff) && r.seconds < 1.0;
  r.measured = "errors " + join(errs, 3) + "; runtime " + fmt(r.seconds, 3) + " s";
  if (roundoff) {
    r.note = "the 3-point discrete Green function is exact at grid nodes; errors are roundoff, so the observed order "
             "is not defined and the order check is met by exactness";
  } else {
    r.measured += "; orders " + join(orders, 3);
  }
  return r;
}

CriterionResult tail_diffuse() {
  CriterionResult r{2, "tail functional, diffuse", false, "", "T_n == 0 exactly for n >= 0.25", "", 0};
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> levels{0.25, 0.5, 1.0, 2.0};
  bool ok = true;
  std::vector<double> all;
  {
    const auto grid = make_grid(kDisk, 1.0 / 64);
    const auto dop = assemble(kLap, grid);
    const auto tc = tail_curve(dop, disk_bounded().on_grid(grid), weight_field(grid, Density::constant(1 / kPi)), levels, 0.0);
    for (double v : tc.values) ok = ok && v == 0.0, all.push_back(v);
  }
  {
    const Domain I = Domain::interval(0.0, 1.0);
    const auto grid = make_grid(I, 1.0 / 256);
    const auto dop = assemble(kLap, grid);
    const auto u = integral_solution(kLap, I, MeasureData::dirac(Point{0.5})).on_grid(grid);
    const auto tc = tail_curve(dop, u, weight_field(grid, Density::constant(1.0)), levels, 0.0);
    for (double v : tc.values) ok = ok && v == 0.0, all.push_back(v);
  }
  r.seconds = seconds_since(t0);
  r.pass = ok;
  r.measured = "disk density: " + join({all.begin(), all.begin() + 4}) + "; interval Dirac: " + join({all.begin() + 4, all.end()});
  return r;
}

CriterionResult tail_concentrated() {
  CriterionResult r{3, "tail functional, concentrated", false, "",
                    "|T_n - 1/(4 pi)| / (1/(4 pi)) <= 0.10 at h=2^-9 for n in {0.25, 0.5}; monotone in h; < 5 min", "", 0};
  const auto t0 = std::chrono::steady_clock::now();
  const double target = 1 / (4 * kPi);
  const std::vector<double> levels{0.25, 0.5};
  std::vector<std::vector<double>> rel, corr;
  for (int e = 7; e <= 9; ++e) {
    const auto grid = make_grid(kDisk, std::ldexp(1.0, -e));
    const auto dop = assemble(kLap, grid);
    const auto tc = tail_curve(dop, disk_dirac().on_grid(grid), weight_field(grid, Density::constant(1 / kPi)), levels, target);
    rel.push_back({(tc.values[0] - target) / target, (tc.values[1] - target) / target});
    corr.push_back({(tc.corrected[0] - target) / target, (tc.corrected[1] - target) / target});
  }
  r.seconds = seconds_since(t0);
  bool monotone = true;
  for (std::size_t k = 1; k < rel.size(); ++k) {
    for (std::size_t j = 0; j < levels.size(); ++j) monotone = monotone && std::abs(rel[k][j]) < std::abs(rel[k - 1][j]);
  }
  const bool accurate = std::abs(rel.back()[0]) <= 0.10 && std::abs(rel.back()[1]) <= 0.10;
  r.pass = accurate && monotone && r.seconds < 300.0;
  r.measured = "rel errors h=2^-7: " + join(rel[0], 3) + "; 2^-8: " + join(rel[1], 3) + "; 2^-9: " + join(rel[2], 3) +
               "; monotone " + (monotone ? "yes" : "no") + "; runtime " + fmt(r.seconds, 3) + " s";
  r.note = "raw T_n converge like n/cap with cap = ln(1/h)/(2 pi) (capped atom node); cap-corrected values at 2^-9: " +
           join(corr.back(), 3);
  return r;
}

CriterionResult tail_mixed() {
  CriterionResult r{4, "tail functional, mixed measure", false, "",
                    "T_n nonincreasing; gap to 1/(4 pi) shrinks by >= 50% from n=0.25 to n=1", "", 0};
  const auto t0 = std::chrono::steady_clock::now();
  const double target = 1 / (4 * kPi);
  const std::vector<double> levels{0.25, 0.5, 0.75, 1.0};
  const auto grid = make_grid(kDisk, 1.0 / 256);
  const auto dop = assemble(kLap, grid);
  const MeasureData mu({{Point{0.0, 0.0}, 1.0}}, Density::constant(8.0));
  const auto u = integral_solution(kLap, kDisk, mu).on_grid(grid);
  const auto tc = tail_curve(dop, u, weight_field(grid, Density::constant(1 / kPi)), levels, target);
  r.seconds = seconds_since(t0);
  bool nonincreasing = true;
  for (std::size_t k = 1; k < tc.values.size(); ++k) nonincreasing = nonincreasing && tc.values[k] <= tc.values[k - 1];
  const double g0 = std::abs(tc.values.front() - target), g1 = std::abs(tc.values.back() - target);
  r.pass = nonincreasing && g1 <= 0.5 * g0;
  r.measured = "T_n " + join(tc.values) + "; gap " + fmt(g0) + " -> " + fmt(g1) + " (" + fmt(100 * (1 - g1 / g0), 3) +
               "% shrink)";
  r.note = "mu = delta_0 + 8 dx on the unit disk, h = 2^-8";
  return r;
}

CriterionResult local_reconstruction() {
  CriterionResult r{5, "local reconstruction", false, "", "|value - 1| <= 0.01 at n = 0.25; < 10 s", "", 0};
  const auto t0 = std::chrono::steady_clock::now();
  const auto v = local_energy(disk_dirac(), Cutoff::constant(1.0), 0.25);
  r.seconds = seconds_since(t0);
  r.pass = !v.empty_window && std::abs(v.value - 1.0) <= 0.01 && r.seconds < 10.0;
  r.measured = "value " + fmt(v.value, 12) + "; runtime " + fmt(r.seconds, 3) + " s";
  return r;
}

CriterionResult nonlocal_reconstruction() {
  CriterionResult r{6, "nonlocal reconstruction", false, "",
                    "value within 0.15 of 1 at the largest resolvable n; trace change < 1%; < 60 s", "", 0};
  const auto t0 = std::chrono::steady_clock::now();
  const Domain I = Domain::interval(-1.0, 1.0);
  const auto u = integral_solution(OperatorSpec::fractional(0.5), I, MeasureData::dirac(Point{0.0}));
  const auto eta = Cutoff::smooth(Point{0.0}, 0.25, 0.5);
  const std::vector<double> levels{1.0, 4.0, 16.0, 64.0, 256.0};
  const auto rep = reconstruct_mu_c(u, eta, levels);
  r.seconds = seconds_since(t0);
  double last_change = 0.0;
  bool converged = true;
  for (std::size_t k = 0; k < rep.traces.size(); ++k) {
    converged = converged && rep.converged[k];
    const auto& t = rep.traces[k];
    if (k + 1 == rep.traces.size() && t.size() >= 2) last_change = std::abs(t.back() - t[t.size() - 2]) / std::abs(t.back());
  }
  const double value = rep.values.back();
  r.pass = std::abs(value - 1.0) <= 0.15 && converged && last_change < 0.01 && r.seconds < 60.0;
  r.measured = "values " + join(rep.values, 5) + "; fitted prefactor " + fmt(rep.prefactor, 4) + "; last trace change " +
               fmt(100 * last_change, 3) + "%; runtime " + fmt(r.seconds, 3) + " s";
  r.note = "the values converge to 2, not 1: with J = c(alpha,d)|x-y|^(-d-alpha) the double integral is twice the "
           "energy normalisation that yields mu_c (prefactor != 1 is a flagged finding)";
  return r;
}

CriterionResult taylor_identity() {
  CriterionResult r{7, "quadratic Taylor identity", false, "", "max |LHS - RHS| <= 1e-8", "", 0};
  const auto t0 = std::chrono::steady_clock::now();
  // f with F'' = f, F(0) = F'(0) = 0; LHS = F(x) - F(y) - F'(y)(x - y)
  struct Test {
    std::function<double(double)> f, F, dF;
  };
  const std::vector<Test> tests{
      {[](double) { return 1.0; }, [](double a) { return a * a / 2; }, [](double a) { return a; }},
      {[](double a) { return a; }, [](double a) { return a * a * a / 6; }, [](double a) { return a * a / 2; }},
      {[](double a) { return 1 - a + 0.5 * a * a * a; },
       [](double a) { return a * a / 2 - a * a * a / 6 + std::pow(a, 5) / 40; },
       [](double a) { return a - a * a / 2 + std::pow(a, 4) / 8; }},
  };
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double x = u(rng), y = u(rng);
    for (const auto& t : tests) {
      const double lhs = t.F(x) - t.F(y) - t.dF(y) * (x - y);
      const double rhs = (x - y) * (x - y) * sigma(t.f, x, y);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  }
  r.seconds = seconds_since(t0);
  r.pass = worst <= 1e-8;
  r.measured = "max deviation " + fmt(worst, 3);
  return r;
}

CriterionResult theta_window() {
  CriterionResult r{8, "theta_n window facts", false, "", "exact equalities on 1000 samples", "", 0};
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(67);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int bad = 0;
  for (int k = 0; k < 1000; ++k) {
    const double n = 0.1 + 5 * u(rng);
    const double x = n * (1 + u(rng)), y = n * (1 + u(rng));
    if (theta_n(x, y, n) != 2 * (x - y) * (x - y)) ++bad;
    if (theta_n(n * u(rng), n * u(rng), n) != 0.0) ++bad;
    if (theta_n(2 * n * (1 + u(rng)), 2 * n * (1 + u(rng)), n) != 0.0) ++bad;
  }
  r.seconds = seconds_since(t0);
  r.pass = bad == 0;
  r.measured = std::to_string(bad) + " mismatches in 3000 checks";
  return r;
}

CriterionResult grid_identities() {
  CriterionResult r{9, "grid identities", false, "", "Dynkin and tower residuals <= 1e-9, 5 pairs V in W", "", 0};
  const auto t0 = std::chrono::steady_clock::now();
  const auto grid = make_grid(kDisk, 2.0 / 64);
  const auto dop = assemble(kLap, grid);
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(-0.3, 0.3), pos(0.0, 1.0);
  double dynkin = 0.0, tower = 0.0;
  for (int t = 0; t < 5; ++t) {
    const Point c{u(rng), u(rng)};
    const auto W = ball_set(*grid, c, 0.6);
    const auto V = ball_set(*grid, c, 0.35);
    GridField f(grid, 0.0);
    for (std::int64_t i = 0; i < f.size(); ++i) {
      if (V[static_cast<std::size_t>(i)]) f[i] = 1.0 + u(rng);
    }
    // R^W f = R^V f + H_V R^W f
    const auto rw = killed_potential(dop, W, f);
    const auto rv = killed_potential(dop, V, f);
    const auto hv = harmonic_extension(dop, V, rw);
    GridField diff = rw;
    for (std::int64_t i = 0; i < diff.size(); ++i) diff[i] -= hv[i];
    dynkin = std::max(dynkin, max_abs_diff(diff, rv));
    // H_V H_W = H_W for V in W
    GridField g(grid);
    for (auto& v : g.values()) v = pos(rng);
    const auto hw = harmonic_extension(dop, W, g);
    tower = std::max(tower, max_abs_diff(harmonic_extension(dop, W, harmonic_extension(dop, V, g)), hw));
  }
  r.seconds = seconds_since(t0);
  r.pass = dynkin <= 1e-9 && tower <= 1e-9;
  r.measured = "Dynkin " + fmt(dynkin, 3) + "; tower " + fmt(tower, 3);
  return r;
}

CriterionResult reduite_oracle() {
  CriterionResult r{10, "reduite oracle", false, "", "gambler's ruin to 1e-10; complementarity <= 1e-10", "", 0};
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int N = 20;
  const auto grid = make_grid(Domain::interval(0.0, N), 1.0);
  const auto dop = assemble(kLap, grid);
  double err = 0.0, res = 0.0;
  for (bool parallel : {false, true}) {
    for (int j = 1; j < N; ++j) {
      GridField g(grid, 0.0);
      g[grid->interior_node_at(Point{double(j)})] = 1.0;
      ReduiteOptions opt;
      opt.parallel = parallel;
      const auto w = reduite(dop, g, opt);
      res = std::max(res, complementarity_residual(dop, w.envelope, g));
      for (int i = 1; i < N; ++i) {
        const double exact = std::min(double(i) / j, double(N - i) / (N - j));
        err = std::max(err, std::abs(w.envelope[grid->interior_node_at(Point{double(i)})] - exact));
      }
    }
  }
  r.seconds = seconds_since(t0);
  r.pass = err <= 1e-10 && res <= 1e-10;
  r.measured = "max error " + fmt(err, 3) + "; max residual " + fmt(res, 3);
  return r;
}

CriterionResult mc_reducing() {
  CriterionResult r{11, "Monte Carlo reducing expectation", false, "", "within 3 stderr of 0.08274; stderr < 0.002; < 30 s",
                    "", 0};
  const auto t0 = std::chrono::steady_clock::now();
  const double exact = 0.75 * std::log(2.0) / (2 * kPi);
  const auto res = reducing_expectation(disk_dirac(), 4.0, 1.0, StartLaw::at(Point{0.5, 0.0}), 100000, 2024);
  r.seconds = seconds_since(t0);
  const double z = (res.value.mean - exact) / res.value.stderr_;
  r.pass = std::abs(z) <= 3.0 && res.value.stderr_ < 0.002 && r.seconds < 30.0;
  r.measured = "estimate " + fmt(res.value.mean) + " +- " + fmt(res.value.stderr_, 3) + " (exact " + fmt(exact) + ", z = " +
               fmt(z, 3) + "); runtime " + fmt(r.seconds, 3) + " s";
  return r;
}

CriterionResult classd_verdicts() {
  CriterionResult r{12, "class-(D) verdicts", false, "",
                    "bounded: class-D with exact zeros above max u; Dirac: not-class-D, plateau within 3 stderr of 1/(4 pi)",
                    "", 0};
  const auto t0 = std::chrono::steady_clock::now();
  const Density rho = Density::constant(1 / kPi);
  StoppingFamily fb;
  fb.params = {0.05, 0.1, 0.2, 1.0};
  const auto B = class_d_diagnostic(disk_bounded(), fb, {0.1, 0.25, 0.5, 1.0}, rho, 100000, 12, 0.0);
  bool zeros = true;
  for (std::size_t j = 1; j < B.levels.size(); ++j) zeros = zeros && B.estimates[j].mean == 0.0;
  StoppingFamily fd;
  fd.params = {8.0, 16.0, 32.0, 48.0};
  const double target = 1 / (4 * kPi);
  const auto D = class_d_diagnostic(disk_dirac(), fd, {0.25, 0.5, 1.0}, rho, 100000, 12, target);
  r.seconds = seconds_since(t0);
  const bool plateau = std::abs(D.limit - target) <= 3 * D.limit_stderr;
  r.pass = B.verdict == "class-D" && zeros && D.verdict == "not-class-D" && plateau;
  r.measured = "bounded: " + B.verdict + ", zeros above 0.25 " + (zeros ? "yes" : "no") + "; Dirac: " + D.verdict +
               ", plateau " + fmt(D.limit) + " +- " + fmt(D.limit_stderr, 3) + " vs " + fmt(target);
  return r;
}

CriterionResult maximal() {
  CriterionResult r{13, "maximal inequality", false, "", "estimate <= 2 d1^(1/2) + 3 stderr on both presets", "", 0};
  const auto t0 = std::chrono::steady_clock::now();
  const Density rho = Density::constant(1 / kPi);
  const auto md = maximal_inequality_check(disk_dirac(), rho, 1 / (4 * kPi), 20000, 13);
  const auto mb = maximal_inequality_check(disk_bounded(), rho, 0.125, 20000, 13);
  r.seconds = seconds_since(t0);
  r.pass = md.pass && mb.pass;
  r.measured = "Dirac " + fmt(md.lhs.mean) + " +- " + fmt(md.lhs.stderr_, 3) + " <= " + fmt(md.bound) + "; bounded " +
               fmt(mb.lhs.mean) + " +- " + fmt(mb.lhs.stderr_, 3) + " <= " + fmt(mb.bound);
  r.note = "d1 norms are the analytic values 1/(4 pi) and 1/8 (u excessive, so e_|u| = u)";
  return r;
}

CriterionResult determinism() {
  CriterionResult r{14, "determinism", false, "", "identical CSV across reruns and thread counts", "", 0};
  const auto t0 = std::chrono::steady_clock::now();
  int presets = 0, mismatches = 0;
  std::string missing;
  const int saved = omp_get_max_threads();
  for (const auto& name : experiment::preset_names()) {
    const auto cfg = experiment::load_config(experiment::preset_path(name));
    if (!cfg.contains("mc")) continue;
    ++presets;
    omp_set_num_threads(1);
    const auto a = experiment::run("mc", cfg).csv;
    const auto b = experiment::run("mc", cfg).csv;
    omp_set_num_threads(3);
    const auto c = experiment::run("mc", cfg).csv;
    omp_set_num_threads(saved);
    if (a != b || a != c) ++mismatches;
  }
  r.seconds = seconds_since(t0);
  r.pass = presets > 0 && mismatches == 0;
  r.measured = std::to_string(presets) + " stochastic presets, " + std::to_string(mismatches) +
               " mismatches (1 thread twice, then 3 threads)";
  if (presets == 0) r.note = "no stochastic presets found in " + experiment::preset_dir().string();
  return r;
}

}  // namespace

std::vector<int> all_ids() { return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14}; }

CriterionResult run_criterion(int id) {
  switch (id) {
    case 1: return kernel_accuracy();
    case 2: return tail_diffuse();
    case 3: return tail_concentrated();
    case 4: return tail_mixed();
    case 5: return local_reconstruction();
    case 6: return nonlocal_reconstruction();
    case 7: return taylor_identity();
    case 8: return theta_window();
    case 9: return grid_identities();
    case 10: return reduite_oracle();
    case 11: return mc_reducing();
    case 12: return classd_verdicts();
    case 13: return maximal();
    case 14: return determinism();
    default: break;
  }
  throw std::invalid_argument("unknown acceptance criterion " + std::to_string(id));
}

}  // namespace potkit::acceptance
