#include "potkit/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include <boost/version.hpp>
#include <Eigen/Core>

#include "potkit/acceptance.hpp"
#include "potkit/envelope.hpp"
#include "potkit/solve.hpp"

#ifndef POTKIT_PRESET_DIR
#define POTKIT_PRESET_DIR "presets"
#endif
#ifndef POTKIT_VERSION
#define POTKIT_VERSION "0.0.0"
#endif

namespace potkit::experiment {

namespace {

const std::vector<std::string> kTopKeys = {
    "description", "domain", "operator", "measure", "grid",   "rho",      "levels",   "seed",   "samples",
    "tolerances",  "cutoff", "obstacle", "points",  "mc",     "target",   "expect",   "verify", "constants",
    "nonlocal",    "reduite", "output"};

std::string child_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

const char* axis_name(int k) { return k == 0 ? "x" : k == 1 ? "y" : "z"; }

std::vector<std::string> coordinate_columns(int d) {
  std::vector<std::string> c;
  for (int k = 0; k < d; ++k) c.emplace_back(axis_name(k));
  return c;
}

std::vector<std::string> coordinate_cells(const Point& x) {
  std::vector<std::string> c;
  for (int k = 0; k < x.dim(); ++k) c.push_back(format_number(x[k]));
  return c;
}

double interpolate(const GridField& f, const Point& x) {
  const Grid& g = f.grid();
  const auto node = g.interior_node_at(x);
  if (node >= 0) return f[node];
  double v = 0.0;
  for (const auto& [l, w] : g.multilinear_stencil(x)) {
    const auto i = g.interior_of(l);
    if (i >= 0) v += w * f[i];
  }
  return v;
}

std::optional<Solution> closed_solution(const OperatorSpec& op, const Domain& dom, const MeasureData& mu) {
  try {
    return integral_solution(op, dom, mu);
  } catch (const UnsupportedOperator&) {
    return std::nullopt;
  }
}

struct Problem {
  Domain dom;
  OperatorSpec op;
  MeasureData mu;
};

Problem parse_problem(const Node& root) {
  Domain dom = parse_domain(root.at("domain"));
  OperatorSpec op = root.has("operator") ? parse_operator(root.at("operator")) : OperatorSpec::laplacian();
  MeasureData mu = root.has("measure") ? parse_measure(root.at("measure"), dom) : MeasureData{};
  return {std::move(dom), std::move(op), std::move(mu)};
}

Density parse_rho(const Node& root, const Domain& dom) {
  if (!root.has("rho")) root.fail("rho: required for this subcommand");
  const Node r = root.at("rho");
  if (r.is_string()) {
    if (r.string() != "uniform") r.fail("expected \"uniform\" or a density object");
    return Density::constant(1.0 / dom.volume());
  }
  return parse_density(r, dom);
}

std::vector<double> parse_levels(const Node& root) {
  if (!root.has("levels")) root.fail("levels: required for this subcommand");
  const Node l = root.at("levels");
  auto v = l.numbers();
  if (v.empty()) l.fail("expected at least one level");
  for (double x : v) {
    if (!(x >= 0.0)) l.fail("levels must be nonnegative");
  }
  return v;
}

std::uint64_t parse_seed(const Node& root) {
  if (!root.has("seed")) root.fail("seed: required for stochastic runs");
  return root.at("seed").u64();
}

// int R^D (rho / |rho|) d|mu_c|
double concentrated_target(const Problem& p, const Density& rho, const std::vector<double>& steps) {
  const Decomposition dec = decompose(p.mu, p.op, p.dom);
  if (dec.concentrated.atoms().empty()) return 0.0;
  const double mass = density_integral(rho, p.dom);
  if (!(mass > 0.0)) throw ConfigError("rho: must have positive mass");
  double t = 0.0;
  std::optional<GridField> discrete;
  for (const auto& a : dec.concentrated.atoms()) {
    double r = 0.0;
    try {
      r = density_potential(p.op, p.dom, rho, a.x);
    } catch (const UnsupportedOperator&) {
      if (steps.empty()) throw ConfigError("grid: a step is needed to compute the target for this operator");
      if (!discrete) discrete = potential(assemble(p.op, make_grid(p.dom, *std::min_element(steps.begin(), steps.end()))), rho);
      r = interpolate(*discrete, a.x);
    }
    t += std::abs(a.weight) * r / mass;
  }
  return t;
}

double parse_target(const Node& root, const Problem& p, const Density& rho, const std::vector<double>& steps) {
  if (root.has("target")) {
    const Node t = root.at("target");
    if (t.is_number()) return t.number();
    if (!t.is_string() || t.string() != "auto") t.fail("expected a number or \"auto\"");
  }
  return concentrated_target(p, rho, steps);
}

void check_expected_verdict(const Node& root, const std::string& verdict, RunOutput& out) {
  if (!root.has("expect")) return;
  const Node e = root.at("expect");
  if (!e.has("verdict")) return;
  const std::string want = e.at("verdict").string();
  out.report["expected_verdict"] = want;
  if (verdict != want) out.verdict_ok = false;
}

ReduiteOptions parse_reduite_options(const Node& root) {
  ReduiteOptions opt;
  if (root.has("tolerances")) {
    const Node t = root.at("tolerances");
    t.expect_keys({"reduite", "nonlocal"});
    if (t.has("reduite")) opt.tol = t.at("reduite").positive();
  }
  if (root.has("reduite")) {
    const Node r = root.at("reduite");
    r.expect_keys({"parallel", "omega", "polish", "max_sweeps"});
    opt.parallel = r.boolean_or("parallel", opt.parallel);
    opt.omega = r.number_or("omega", opt.omega);
    opt.polish = r.boolean_or("polish", opt.polish);
    opt.max_sweeps = r.integer_or("max_sweeps", opt.max_sweeps);
  }
  return opt;
}

GridField solution_on_grid(const Problem& p, const std::optional<Solution>& closed, const DiscreteOperator& dop) {
  if (closed) return closed->on_grid(dop.grid_ptr());
  return integral_solution(dop, p.mu).field();
}

// ---------------------------------------------------------------------------

RunOutput run_solve(const Node& root) {
  const Problem p = parse_problem(root);
  const auto closed = closed_solution(p.op, p.dom, p.mu);
  std::vector<Point> points;
  if (root.has("points")) {
    const Node pts = root.at("points");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      points.push_back(pts.at(i).point());
      if (points.back().dim() != p.dom.dim()) pts.at(i).fail("point dimension does not match the domain");
    }
  }
  const auto steps = root.has("grid") ? parse_steps(root.at("grid")) : std::vector<double>{};
  const int d = p.dom.dim();
  RunOutput out;
  out.stem = "solve";
  if (steps.empty()) {
    if (!closed) root.fail("grid: required when no closed form exists");
    if (points.empty()) root.fail("points: required when no grid is given");
    auto cols = coordinate_columns(d);
    cols.push_back("u");
    CsvTable t(cols);
    t.comment("u = R^D mu, closed form");
    for (const auto& x : points) {
      auto cells = coordinate_cells(x);
      cells.push_back(format_number((*closed)(x)));
      t.row(cells);
    }
    out.csv = t.str();
    out.report["closed_form"] = true;
    return out;
  }
  auto cols = std::vector<std::string>{"h"};
  for (const auto& c : coordinate_columns(d)) cols.push_back(c);
  for (const char* c : {"discrete", "closed", "abs_error"}) cols.emplace_back(c);
  CsvTable t(cols);
  t.comment("discrete solve vs closed form; abs_error is nan without a closed form");
  json runs = json::array();
  std::vector<double> errors;
  for (double h : steps) {
    const auto grid = make_grid(p.dom, h);
    const auto dop = assemble(p.op, grid);
    const auto sol = integral_solution(dop, p.mu);
    const GridField& f = sol.field();
    std::vector<Point> xs = points;
    if (xs.empty()) {
      for (std::int64_t i = 0; i < grid->interior_count(); ++i) xs.push_back(grid->interior_coord(i));
    }
    double max_err = 0.0;
    for (const auto& x : xs) {
      const double vd = interpolate(f, x);
      const double vc = closed ? (*closed)(x) : std::numeric_limits<double>::quiet_NaN();
      const double err = std::abs(vd - vc);
      if (std::isfinite(err)) max_err = std::max(max_err, err);
      std::vector<std::string> cells{format_number(h)};
      for (auto& c : coordinate_cells(x)) cells.push_back(c);
      cells.push_back(format_number(vd));
      cells.push_back(format_number(vc));
      cells.push_back(format_number(err));
      t.row(cells);
    }
    errors.push_back(max_err);
    runs.push_back({{"h", h}, {"interior_nodes", grid->interior_count()}, {"max_abs_error", closed ? json(max_err) : json()}});
  }
  json orders = json::array();
  for (std::size_t k = 1; k < steps.size(); ++k) {
    const double o = std::log(errors[k - 1] / errors[k]) / std::log(steps[k - 1] / steps[k]);
    orders.push_back(std::isfinite(o) ? json(o) : json());
  }
  out.csv = t.str();
  out.report["closed_form"] = closed.has_value();
  out.report["runs"] = runs;
  out.report["observed_orders"] = orders;
  return out;
}

RunOutput run_reduite(const Node& root) {
  const Problem p = parse_problem(root);
  const auto steps = parse_steps(root.at("grid"));
  if (steps.size() != 1) root.at("grid").at("h").fail("reduite takes a single step");
  const auto grid = make_grid(p.dom, steps[0]);
  const auto dop = assemble(p.op, grid);
  GridField g(grid, 0.0);
  const Node ob = root.at("obstacle");
  ob.expect_keys({"type", "x"});
  const std::string type = ob.at("type").string();
  if (type == "potential") {
    const auto closed = closed_solution(p.op, p.dom, p.mu);
    g = cap_infinite(solution_on_grid(p, closed, dop)).values;
    for (auto& v : g.values()) v = std::abs(v);
  } else if (type == "indicator") {
    const Point x = ob.at("x").point();
    const auto node = grid->interior_node_at(x);
    if (node < 0) ob.at("x").fail("not an interior grid node");
    g[node] = 1.0;
  } else {
    ob.at("type").fail("expected \"potential\" or \"indicator\"");
  }
  const ReduiteOptions opt = parse_reduite_options(root);
  const ReduiteResult r = reduite(dop, g, opt);
  auto cols = coordinate_columns(p.dom.dim());
  for (const char* c : {"obstacle", "envelope", "continuation"}) cols.emplace_back(c);
  CsvTable t(cols);
  t.comment("smallest excessive majorant of the obstacle on the interior nodes");
  std::int64_t in_v = 0;
  for (std::int64_t i = 0; i < grid->interior_count(); ++i) {
    auto cells = coordinate_cells(grid->interior_coord(i));
    const bool c = r.continuation[static_cast<std::size_t>(i)];
    in_v += c ? 1 : 0;
    cells.push_back(format_number(g[i]));
    cells.push_back(format_number(r.envelope[i]));
    cells.push_back(c ? "1" : "0");
    t.row(cells);
  }
  RunOutput out;
  out.stem = "reduite";
  out.csv = t.str();
  out.report["iterations"] = r.iterations;
  out.report["polish_steps"] = r.polish_steps;
  out.report["residual"] = r.residual;
  out.report["omega"] = r.omega;
  out.report["converged"] = r.converged;
  out.report["continuation_nodes"] = in_v;
  if (root.has("rho")) {
    const auto w = weight_field(grid, parse_rho(root, p.dom));
    out.report["d1_norm"] = r.envelope.weighted_integral(w);
  }
  out.verdict_ok = r.converged && r.residual <= opt.tol;
  return out;
}

RunOutput run_tail(const Node& root) {
  const Problem p = parse_problem(root);
  const auto steps = parse_steps(root.at("grid"));
  const auto levels = parse_levels(root);
  const Density rho = parse_rho(root, p.dom);
  const double target = parse_target(root, p, rho, steps);
  const ReduiteOptions opt = parse_reduite_options(root);
  const auto closed = closed_solution(p.op, p.dom, p.mu);
  CsvTable t({"h", "level", "T_n", "corrected", "resolvable"});
  t.comment("T_n = d1 norm of (|u| - n)^+ with the normalised weight rho");
  t.comment("corrected = T_n / (1 - n/cap) for capped atom nodes");
  json runs = json::array();
  TailCurve last;
  for (double h : steps) {
    const auto grid = make_grid(p.dom, h);
    const auto dop = assemble(p.op, grid);
    const auto w = weight_field(grid, rho);
    last = tail_curve(dop, solution_on_grid(p, closed, dop), w, levels, target, opt);
    for (std::size_t k = 0; k < last.levels.size(); ++k) {
      t.row(std::vector<std::string>{format_number(h), format_number(last.levels[k]), format_number(last.values[k]),
                                     format_number(last.corrected[k]), last.resolvable[k] ? "1" : "0"});
    }
    runs.push_back({{"h", h},
                    {"cap", last.cap},
                    {"limit", last.limit},
                    {"verdict", last.verdict},
                    {"warnings", last.warnings},
                    {"iterations", last.iterations}});
  }
  RunOutput out;
  out.stem = "tail";
  out.csv = t.str();
  out.report["target"] = target;
  out.report["runs"] = runs;
  out.report["verdict"] = last.verdict;
  out.report["limit"] = last.limit;
  check_expected_verdict(root, last.verdict, out);
  return out;
}

RunOutput run_reconstruct(const Node& root) {
  const Problem p = parse_problem(root);
  const auto closed = closed_solution(p.op, p.dom, p.mu);
  if (!closed) root.at("operator").fail("reconstruction needs a closed-form solution");
  const Cutoff eta = root.has("cutoff") ? parse_cutoff(root.at("cutoff"), p.dom) : Cutoff::constant(1.0);
  const auto levels = parse_levels(root);
  NonlocalOptions opt;
  if (root.has("nonlocal")) {
    const Node n = root.at("nonlocal");
    n.expect_keys({"min_level", "max_level", "rel_tol"});
    opt.min_level = static_cast<int>(n.integer_or("min_level", opt.min_level));
    opt.max_level = static_cast<int>(n.integer_or("max_level", opt.max_level));
    opt.rel_tol = n.number_or("rel_tol", opt.rel_tol);
  }
  if (root.has("tolerances") && root.at("tolerances").has("nonlocal")) {
    opt.rel_tol = root.at("tolerances").at("nonlocal").positive();
  }
  const ReconstructionReport rep = reconstruct_mu_c(*closed, eta, levels, opt);
  CsvTable t({"level", "value", "rel_error", "converged", "refinements"});
  t.comment(rep.functional + " energy functional per level; rel_error against the concentrated target");
  for (std::size_t k = 0; k < rep.levels.size(); ++k) {
    t.row(std::vector<std::string>{format_number(rep.levels[k]), format_number(rep.values[k]),
                                   format_number(rep.rel_errors[k]), rep.converged[k] ? "1" : "0",
                                   std::to_string(rep.traces[k].size())});
  }
  RunOutput out;
  out.stem = "reconstruct";
  out.csv = t.str();
  out.report["functional"] = rep.functional;
  out.report["target"] = rep.target;
  out.report["prefactor"] = rep.prefactor;
  out.report["trend"] = rep.trend;
  out.report["warnings"] = rep.warnings;
  out.report["traces"] = rep.traces;
  if (root.has("expect")) {
    const Node e = root.at("expect");
    e.expect_keys({"value", "tolerance", "verdict"});
    if (e.has("value")) {
      const double want = e.at("value").number();
      const double tol = e.at("tolerance").positive();
      const double got = rep.prefactor * rep.target;
      out.report["expected_value"] = want;
      out.report["value_at_largest_level"] = got;
      if (!(std::abs(got - want) <= tol)) out.verdict_ok = false;
    }
  }
  for (bool c : rep.converged) {
    if (!c) out.verdict_ok = false;
  }
  return out;
}

StoppingFamily parse_family(const Node& n, const Domain& dom) {
  n.expect_keys({"kind", "params", "center", "step_fraction", "eps_rel"});
  StoppingFamily f;
  const std::string kind = n.at("kind").string();
  if (kind == "reducing") {
    f.kind = StoppingFamily::Kind::reducing;
  } else if (kind == "region") {
    f.kind = StoppingFamily::Kind::region;
  } else if (kind == "fixed_time") {
    f.kind = StoppingFamily::Kind::fixed_time;
  } else {
    n.at("kind").fail("expected reducing, region or fixed_time");
  }
  f.params = n.at("params").numbers();
  if (f.params.empty()) n.at("params").fail("expected at least one member");
  f.center = n.has("center") ? n.at("center").point() : dom.center();
  f.step_fraction = n.number_or("step_fraction", f.step_fraction);
  f.eps_rel = n.number_or("eps_rel", f.eps_rel);
  return f;
}

RunOutput run_mc(const Node& root) {
  const Problem p = parse_problem(root);
  const Node mc = root.at("mc");
  mc.expect_keys({"kind", "k", "n", "start", "family", "d1", "step_fraction", "eps_rel"});
  const std::string kind = mc.at("kind").string();
  const std::uint64_t seed = parse_seed(root);
  const std::int64_t samples = root.integer_or("samples", 100000);
  if (samples < 2) root.at("samples").fail("need at least 2 samples");
  const auto closed = closed_solution(p.op, p.dom, p.mu);
  if (!closed) root.at("operator").fail("Monte Carlo runs need a closed-form solution");
  RunOutput out;
  out.stem = "mc_" + kind;
  out.report["seed"] = seed;
  out.report["samples"] = samples;
  if (kind == "reducing") {
    const auto ks = mc.at("k").numbers();
    const auto ns = mc.at("n").numbers();
    const Node s = mc.at("start");
    StartLaw start;
    if (s.is_string()) {
      if (s.string() != "rho") s.fail("expected a point or \"rho\"");
      start = StartLaw::from(parse_rho(root, p.dom));
    } else {
      start = StartLaw::at(s.point());
    }
    const bool exact_known = start.kind == StartLaw::Kind::point && p.mu.density().empty();
    CsvTable t({"k", "n", "estimate", "stderr", "early_fraction", "exact"});
    t.comment("E[(u - n)^+ at the exit of {w <= k}]; exact is nan unless u is a pure atom potential started at a point");
    json rows = json::array();
    bool ok = true;
    for (double k : ks) {
      for (double n : ns) {
        const ReducingResult r = reducing_expectation(*closed, k, n, start, samples, seed);
        const double exact =
            exact_known ? std::max(k - n, 0.0) * (*closed)(start.x) / k : std::numeric_limits<double>::quiet_NaN();
        t.row({k, n, r.value.mean, r.value.stderr_, r.early_fraction, exact});
        json row = {{"k", k}, {"n", n}, {"estimate", r.value.mean}, {"stderr", r.value.stderr_}};
        if (exact_known) {
          row["exact"] = exact;
          const bool within = std::abs(r.value.mean - exact) <= 3.0 * r.value.stderr_;
          row["within_3_stderr"] = within;
          ok = ok && within;
        }
        rows.push_back(row);
      }
    }
    out.csv = t.str();
    out.report["rows"] = rows;
    if (root.has("expect") && root.at("expect").boolean_or("within_3_stderr", false)) out.verdict_ok = ok;
    return out;
  }
  const Density rho = parse_rho(root, p.dom);
  if (kind == "classd") {
    const auto levels = parse_levels(root);
    const StoppingFamily fam = parse_family(mc.at("family"), p.dom);
    const double target = parse_target(root, p, rho, {});
    const UIDiagnostic D = class_d_diagnostic(*closed, fam, levels, rho, samples, seed, target);
    CsvTable t({"level", "estimate", "stderr", "argmax_param"});
    t.comment("max over the " + fam.kind_name() + " family of E[(|u| - n)^+ at the stopping time], start rho m");
    for (std::size_t j = 0; j < levels.size(); ++j) {
      t.row({levels[j], D.estimates[j].mean, D.estimates[j].stderr_, D.argmax_param[j]});
    }
    out.csv = t.str();
    out.report["verdict"] = D.verdict;
    out.report["limit"] = D.limit;
    out.report["limit_stderr"] = D.limit_stderr;
    out.report["target"] = target;
    out.report["warnings"] = D.warnings;
    check_expected_verdict(root, D.verdict, out);
    return out;
  }
  if (kind == "maximal") {
    double d1 = 0.0;
    const Node d1n = mc.at("d1");
    if (d1n.is_number()) {
      d1 = d1n.number();
    } else {
      if (!d1n.is_string() || d1n.string() != "auto") d1n.fail("expected a number or \"auto\"");
      const auto steps = parse_steps(root.at("grid"));
      const auto grid = make_grid(p.dom, steps.back());
      const auto dop = assemble(p.op, grid);
      GridField u = cap_infinite(closed->on_grid(grid)).values;
      for (auto& v : u.values()) v = std::abs(v);
      d1 = d1_norm(dop, u, weight_field(grid, rho), parse_reduite_options(root));
    }
    const MaximalCheck m = maximal_inequality_check(*closed, rho, d1, samples, seed, mc.number_or("step_fraction", 0.2),
                                                    mc.number_or("eps_rel", 1e-6));
    CsvTable t({"estimate", "stderr", "bound", "margin", "pass"});
    t.comment("E sup |u(X_t)|^(1/2) along paths from rho m vs 2 * d1^(1/2)");
    t.row(std::vector<std::string>{format_number(m.lhs.mean), format_number(m.lhs.stderr_), format_number(m.bound),
                                   format_number(m.margin), m.pass ? "1" : "0"});
    out.csv = t.str();
    out.report["d1_norm"] = d1;
    out.report["estimate"] = m.lhs.mean;
    out.report["stderr"] = m.lhs.stderr_;
    out.report["bound"] = m.bound;
    out.report["margin"] = m.margin;
    out.report["pass"] = m.pass;
    out.verdict_ok = m.pass;
    return out;
  }
  mc.at("kind").fail("expected reducing, classd or maximal");
}

RunOutput run_verify(const Node& root) {
  std::vector<int> ids = acceptance::all_ids();
  if (root.has("verify")) {
    const Node v = root.at("verify");
    v.expect_keys({"criteria"});
    ids.clear();
    const Node c = v.at("criteria");
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto id = c.at(i).integer();
      const auto all = acceptance::all_ids();
      if (std::find(all.begin(), all.end(), id) == all.end()) c.at(i).fail("unknown criterion");
      ids.push_back(static_cast<int>(id));
    }
  }
  CsvTable t({"criterion", "name", "status", "measured", "threshold"});
  t.comment("acceptance suite");
  json results = json::array();
  RunOutput out;
  out.stem = "verify";
  for (int id : ids) {
    const auto r = acceptance::run_criterion(id);
    t.row(std::vector<std::string>{std::to_string(r.id), r.name, r.pass ? "PASS" : "FAIL", r.measured, r.threshold});
    results.push_back({{"criterion", r.id},
                       {"name", r.name},
                       {"pass", r.pass},
                       {"measured", r.measured},
                       {"threshold", r.threshold},
                       {"note", r.note},
                       {"seconds", r.seconds}});
    out.verdict_ok = out.verdict_ok && r.pass;
  }
  out.csv = t.str();
  out.report["results"] = results;
  return out;
}

RunOutput run_constants(const Node& root) {
  std::vector<double> alphas{0.5, 1.0, 1.5};
  std::vector<double> dims{1, 2, 3};
  if (root.has("constants")) {
    const Node c = root.at("constants");
    c.expect_keys({"alpha", "d"});
    if (c.has("alpha")) alphas = c.at("alpha").numbers();
    if (c.has("d")) dims = c.at("d").numbers();
  }
  CsvTable t({"alpha", "d", "fractional_constant", "green_constant", "unit_sphere_area", "unit_ball_volume"});
  t.comment("fractional_constant = 2^a Gamma((d+a)/2) / (pi^(d/2) |Gamma(-a/2)|)");
  t.comment("green_constant = Gamma(d/2) / (2^a pi^(d/2) Gamma(a/2)^2)");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 2.0)) root.at("constants").at("alpha").fail("alpha must lie in (0,2)");
    for (double dd : dims) {
      const int d = static_cast<int>(dd);
      if (d < 1 || d > 3 || d != dd) root.at("constants").at("d").fail("d must be 1, 2 or 3");
      t.row({a, dd, fractional_constant(a, d), fractional_green_constant(a, d), unit_sphere_area(d), unit_ball_volume(d)});
    }
  }
  RunOutput out;
  out.stem = "constants";
  out.csv = t.str();
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

bool Node::has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

Node Node::at(const std::string& key) const {
  if (!j_->is_object()) fail("expected an object");
  const auto it = j_->find(key);
  if (it == j_->end()) throw ConfigError(child_path(path_, key) + ": required field is missing");
  return Node(*it, child_path(path_, key));
}

Node Node::at(std::size_t i) const {
  if (!j_->is_array()) fail("expected an array");
  if (i >= j_->size()) fail("index out of range");
  return Node((*j_)[i], path_ + "[" + std::to_string(i) + "]");
}

std::size_t Node::size() const {
  if (!j_->is_array()) fail("expected an array");
  return j_->size();
}

void Node::fail(const std::string& what) const {
  throw ConfigError((path_.empty() ? std::string("config") : path_) + ": " + what);
}

double Node::number() const {
  if (!j_->is_number()) fail("expected a number");
  return j_->get<double>();
}

double Node::positive() const {
  const double v = number();
  if (!(v > 0.0)) fail("expected a positive number");
  return v;
}

std::int64_t Node::integer() const {
  if (!j_->is_number_integer()) fail("expected an integer");
  return j_->get<std::int64_t>();
}

std::uint64_t Node::u64() const {
  if (!j_->is_number_integer() || (j_->is_number_integer() && !j_->is_number_unsigned() && j_->get<std::int64_t>() < 0)) {
    fail("expected a nonnegative integer");
  }
  return j_->get<std::uint64_t>();
}

std::string Node::string() const {
  if (!j_->is_string()) fail("expected a string");
  return j_->get<std::string>();
}

bool Node::boolean() const {
  if (!j_->is_boolean()) fail("expected true or false");
  return j_->get<bool>();
}

std::vector<double> Node::numbers() const {
  if (j_->is_number()) return {number()};
  std::vector<double> v;
  for (std::size_t i = 0; i < size(); ++i) v.push_back(at(i).number());
  return v;
}

Point Node::point() const {
  const auto v = numbers();
  if (v.empty() || v.size() > static_cast<std::size_t>(kMaxDim)) fail("expected 1 to 3 coordinates");
  Point p(static_cast<int>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) p[static_cast<int>(k)] = v[k];
  return p;
}

double Node::number_or(const std::string& key, double fallback) const { return has(key) ? at(key).number() : fallback; }

std::int64_t Node::integer_or(const std::string& key, std::int64_t fallback) const {
  return has(key) ? at(key).integer() : fallback;
}

std::string Node::string_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? at(key).string() : fallback;
}

bool Node::boolean_or(const std::string& key, bool fallback) const { return has(key) ? at(key).boolean() : fallback; }

void Node::expect_keys(const std::vector<std::string>& allowed) const {
  if (!j_->is_object()) fail("expected an object");
  for (const auto& [key, value] : j_->items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(child_path(path_, key) + ": unknown field");
    }
  }
}

Domain parse_domain(const Node& n) {
  const std::string type = n.at("type").string();
  if (type == "interval") {
    n.expect_keys({"type", "a", "b"});
    const double a = n.at("a").number(), b = n.at("b").number();
    if (!(b > a)) n.fail("interval needs a < b");
    return Domain::interval(a, b);
  }
  if (type == "ball") {
    n.expect_keys({"type", "center", "radius"});
    return Domain::ball(n.at("center").point(), n.at("radius").positive());
  }
  if (type == "rectangle") {
    n.expect_keys({"type", "lower", "upper"});
    const Point lo = n.at("lower").point(), hi = n.at("upper").point();
    if (lo.dim() != hi.dim()) n.fail("lower and upper must have the same dimension");
    for (int k = 0; k < lo.dim(); ++k) {
      if (!(hi[k] > lo[k])) n.at("upper").fail("upper must exceed lower in every coordinate");
    }
    return Domain::rectangle(lo, hi);
  }
  n.at("type").fail("expected interval, ball or rectangle");
}

OperatorSpec parse_operator(const Node& n) {
  const std::string type = n.at("type").string();
  if (type == "laplacian") {
    n.expect_keys({"type"});
    return OperatorSpec::laplacian();
  }
  if (type == "fractional") {
    n.expect_keys({"type", "alpha"});
    const double a = n.at("alpha").number();
    if (!(a > 0.0 && a < 2.0)) n.at("alpha").fail("alpha must lie in (0,2)");
    return OperatorSpec::fractional(a);
  }
  if (type == "divergence_form") {
    n.expect_keys({"type", "diagonal"});
    const auto diag = n.at("diagonal").numbers();
    if (diag.empty() || diag.size() > static_cast<std::size_t>(kMaxDim)) n.at("diagonal").fail("expected 1 to 3 entries");
    for (double v : diag) {
      if (!(v > 0.0)) n.at("diagonal").fail("entries must be positive");
    }
    Matrix3 a{};
    for (std::size_t k = 0; k < diag.size(); ++k) a[k][k] = diag[k];
    for (std::size_t k = diag.size(); k < static_cast<std::size_t>(kMaxDim); ++k) a[k][k] = 1.0;
    const auto [lo, hi] = std::minmax_element(diag.begin(), diag.end());
    return OperatorSpec::divergence_form([a](const Point&) { return a; }, *lo, *hi);
  }
  n.at("type").fail("expected laplacian, fractional or divergence_form");
}

Density parse_density(const Node& n, const Domain& dom) {
  const std::string type = n.at("type").string();
  if (type == "constant") {
    n.expect_keys({"type", "value"});
    return Density::constant(n.at("value").number());
  }
  if (type == "gaussian") {
    n.expect_keys({"type", "amplitude", "center", "width"});
    const Point c = n.at("center").point();
    if (c.dim() != dom.dim()) n.at("center").fail("dimension does not match the domain");
    return Density::gaussian(n.at("amplitude").number(), c, n.at("width").positive());
  }
  n.at("type").fail("expected constant or gaussian");
}

MeasureData parse_measure(const Node& n, const Domain& dom) {
  n.expect_keys({"atoms", "density"});
  std::vector<Atom> atoms;
  if (n.has("atoms")) {
    const Node a = n.at("atoms");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const Node ai = a.at(i);
      ai.expect_keys({"x", "weight"});
      const Point x = ai.at("x").point();
      if (x.dim() != dom.dim()) ai.at("x").fail("dimension does not match the domain");
      if (!dom.contains(x)) ai.at("x").fail("atom must lie inside the open domain");
      atoms.push_back({x, ai.number_or("weight", 1.0)});
    }
  }
  Density f = n.has("density") ? parse_density(n.at("density"), dom) : Density{};
  return MeasureData(std::move(atoms), std::move(f));
}

Cutoff parse_cutoff(const Node& n, const Domain& dom) {
  const std::string type = n.string_or("type", "smooth");
  if (type == "constant") {
    n.expect_keys({"type", "value"});
    return Cutoff::constant(n.number_or("value", 1.0));
  }
  if (type != "smooth") n.at("type").fail("expected smooth or constant");
  n.expect_keys({"type", "center", "inner", "outer", "scale"});
  const Point c = n.has("center") ? n.at("center").point() : dom.center();
  if (c.dim() != dom.dim()) n.at("center").fail("dimension does not match the domain");
  const double inner = n.at("inner").number(), outer = n.at("outer").number();
  if (!(inner >= 0.0 && outer > inner)) n.fail("need 0 <= inner < outer");
  return Cutoff::smooth(c, inner, outer, n.number_or("scale", 1.0));
}

std::vector<double> parse_steps(const Node& grid) {
  grid.expect_keys({"h"});
  const Node h = grid.at("h");
  auto v = h.numbers();
  if (v.empty()) h.fail("expected at least one step");
  for (double x : v) {
    if (!(x > 0.0)) h.fail("steps must be positive");
  }
  return v;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void CsvTable::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_.size()) throw std::logic_error("CsvTable: row width mismatch");
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  rows_.push_back(std::move(line));
}

void CsvTable::row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  for (double v : values) cells.push_back(format_number(v));
  row(cells);
}

std::string CsvTable::str() const {
  std::string s;
  for (const auto& c : comments_) s += "# " + c + "\n";
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i) s += ',';
    s += columns_[i];
  }
  s += '\n';
  for (const auto& r : rows_) s += r + "\n";
  return s;
}

json parse_config_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": malformed config: " + e.what());
  }
}

json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

std::filesystem::path preset_dir() {
  if (const char* env = std::getenv("POTKIT_PRESETS"); env && *env) return env;
  return POTKIT_PRESET_DIR;
}

std::filesystem::path preset_path(const std::string& name) {
  const auto p = preset_dir() / (name + ".json");
  if (!std::filesystem::exists(p)) throw ConfigError("--preset: no preset named '" + name + "' in " + preset_dir().string());
  return p;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  if (!std::filesystem::is_directory(preset_dir())) return names;
  for (const auto& e : std::filesystem::directory_iterator(preset_dir())) {
    if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

RunOutput run(const std::string& subcommand, const json& config) {
  if (std::find(kSubcommands.begin(), kSubcommands.end(), subcommand) == kSubcommands.end()) {
    throw ConfigError("subcommand: unknown '" + subcommand + "'");
  }
  if (!config.is_object()) throw ConfigError("config: expected an object at the top level");
  const Node root(config, "");
  root.expect_keys(kTopKeys);
  RunOutput out;
  if (subcommand == "solve") out = run_solve(root);
  if (subcommand == "reduite") out = run_reduite(root);
  if (subcommand == "tail") out = run_tail(root);
  if (subcommand == "reconstruct") out = run_reconstruct(root);
  if (subcommand == "mc") out = run_mc(root);
  if (subcommand == "verify") out = run_verify(root);
  if (subcommand == "constants") out = run_constants(root);
  if (root.has("output")) {
    const Node o = root.at("output");
    o.expect_keys({"dir", "stem"});
    out.stem = o.string_or("stem", out.stem);
  }
  json report;
  report["subcommand"] = subcommand;
  report["config"] = config;
  report["verdict_ok"] = out.verdict_ok;
  report["results"] = out.report;
  report["versions"] = {{"potkit", POTKIT_VERSION},
                        {"compiler", __VERSION__},
                        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                      std::to_string(EIGEN_MINOR_VERSION)},
                        {"boost", BOOST_LIB_VERSION}};
  out.report = std::move(report);
  return out;
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error(tmp.string() + ": cannot open for writing");
    f << text;
    f.flush();
    if (!f) throw std::runtime_error(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

void write_outputs(const RunOutput& out, const std::filesystem::path& dir) {
  write_atomic(dir / (out.stem + ".csv"), out.csv);
  write_atomic(dir / (out.stem + ".json"), out.report.dump(2) + "\n");
}

}  // namespace potkit::experiment
