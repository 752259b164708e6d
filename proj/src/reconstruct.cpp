#include "potkit/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>
#include <boost/math/tools/roots.hpp>

namespace potkit {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

// C^inf step: 1 for t <= 0, 0 for t >= 1
double smooth_step(double t) {
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  const double a = std::exp(-1.0 / (1.0 - t));
  const double b = std::exp(-1.0 / t);
  return a / (a + b);
}

template <class F>
double gk(F&& f, double a, double b, double tol = 1e-12) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 10, tol);
}

// Root of f in [a, b] given a sign change.
template <class F>
double bracket_root(F&& f, double a, double b, double fa, double fb) {
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(52),
                                                  iters);
  return 0.5 * (r.first + r.second);
}

// Points in (a, b) where g - level changes sign, given ordered samples.
template <class G>
void crossings(G&& g, const std::vector<double>& xs, const std::vector<double>& gs, double level,
               std::vector<double>& out) {
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
    const double fa = gs[k] - level;
    const double fb = gs[k + 1] - level;
    if (!std::isfinite(fa) || !std::isfinite(fb)) continue;
    if (fa == 0.0) {
      out.push_back(xs[k]);
    } else if ((fa < 0.0) != (fb < 0.0) && fb != 0.0) {
      out.push_back(bracket_root([&](double t) { return g(t) - level; }, xs[k], xs[k + 1], fa, fb));
    }
  }
}

bool in_window(double v, double n) { return v >= n && v <= 2.0 * n; }

// ---------------------------------------------------------------------------
// Graded Gauss-Legendre panels.

struct Rule {
  std::vector<double> x;
  std::vector<double> w;
};

Rule legendre_rule(int order) {
  const auto zeros = boost::math::legendre_p_zeros<double>(order);
  Rule r;
  for (double z : zeros) {
    const double dp = boost::math::legendre_p_prime(order, z);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    r.x.push_back(z);
    r.w.push_back(w);
    if (z != 0.0) {
      r.x.push_back(-z);
      r.w.push_back(w);
    }
  }
  return r;
}

constexpr double kGrading = 0.15;

void add_panel(double a, double b, const Rule& gl, Rule& out) {
  const double m = 0.5 * (a + b), h = 0.5 * (b - a);
  for (std::size_t k = 0; k < gl.x.size(); ++k) {
    out.x.push_back(m + h * gl.x[k]);
    out.w.push_back(h * gl.w[k]);
  }
}

// panels on [p, q] shrinking geometrically toward p (toward_p) or q
void add_graded_half(double p, double q, bool toward_p, int layers, const Rule& gl, Rule& out) {
  const double len = q - p;
  double outer = 1.0;
  for (int k = 0; k < layers; ++k) {
    const double inner = outer * kGrading;
    if (toward_p) {
      add_panel(p + len * inner, p + len * outer, gl, out);
    } else {
      add_panel(q - len * outer, q - len * inner, gl, out);
    }
    outer = inner;
  }
  if (toward_p) {
    add_panel(p, p + len * outer, gl, out);
  } else {
    add_panel(q - len * outer, q, gl, out);
  }
}

// graded toward both ends of [p, q]
void add_graded(double p, double q, int layers, const Rule& gl, Rule& out) {
  if (!(q > p)) return;
  const double m = 0.5 * (p + q);
  add_graded_half(p, m, true, layers, gl, out);
  add_graded_half(m, q, false, layers, gl, out);
}

// ---------------------------------------------------------------------------

struct AtomDisk {
  Point center;
  double radius;
};

std::vector<AtomDisk> atom_disks(const Solution& u) {
  const auto& atoms = u.decomposition().concentrated.atoms();
  std::vector<AtomDisk> out;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    double r = u.domain().distance_to_boundary(atoms[i].x);
    for (std::size_t j = 0; j < atoms.size(); ++j) {
      if (j != i) r = std::min(r, 0.5 * distance(atoms[i].x, atoms[j].x));
    }
    if (r > 0.0) out.push_back({atoms[i].x, r * (1.0 - 1e-12)});
  }
  return out;
}

// Window integral of F along the ray a + r e, r in (0, R], in s = ln r.
template <class U, class F>
double ray_integral(U&& uval, F&& integrand, const Point& a, const Point& e, double R, double n, bool& hit) {
  constexpr double q = 0.85;
  std::vector<double> ss, us;
  int above = 0;
  for (int j = 0; j < 4000; ++j) {
    const double s = std::log(R) + j * std::log(q);
    const double v = uval(a + std::exp(s) * e);
    ss.push_back(s);
    us.push_back(v);
    above = v > 2.0 * n ? above + 1 : 0;
    if ((j >= 10 && above >= 5) || s < std::log(R) - 575.0) break;
  }
  std::reverse(ss.begin(), ss.end());
  std::reverse(us.begin(), us.end());
  auto g = [&](double s) { return uval(a + std::exp(s) * e); };
  std::vector<double> br{ss.front(), ss.back()};
  crossings(g, ss, us, n, br);
  crossings(g, ss, us, 2.0 * n, br);
  std::sort(br.begin(), br.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const double lo = br[k], hi = br[k + 1];
    if (!(hi > lo)) continue;
    if (!in_window(g(0.5 * (lo + hi)), n)) continue;
    hit = true;
    total += gk(
        [&](double s) {
          const double r = std::exp(s);
          return integrand(a + r * e) * r * r;
        },
        lo, hi);
  }
  return total;
}

}  // namespace

double s_n(double z, double n) { return std::max(std::min(z, 2.0 * n), n); }

double theta_n(double x, double y, double n) {
  const double sx = s_n(x, n);
  const double sy = s_n(y, n);
  return 2.0 * (sx - sy) * (2.0 * x - sx - sy);
}

double sigma(const std::function<double(double)>& f, double x, double y, SigmaRule rule,
             const std::vector<double>& jumps) {
  const double d = x - y;
  if (rule == SigmaRule::gauss32) {
    using G = boost::math::quadrature::gauss<double, 32>;
    auto inner = [&](double a) { return a * G::integrate([&](double b) { return f(a * b * d + y); }, 0.0, 1.0); };
    return G::integrate(inner, 0.0, 1.0);
  }
  // the argument a b d + y crosses jump j at b = (j - y) / (a d), and the inner
  // integral has a kink in a at a = (j - y) / d
  auto splits = [&](double scale) {
    std::vector<double> s{0.0, 1.0};
    if (scale != 0.0) {
      for (double j : jumps) {
        const double t = (j - y) / scale;
        if (t > 0.0 && t < 1.0) s.push_back(t);
      }
    }
    std::sort(s.begin(), s.end());
    return s;
  };
  auto piecewise = [&](auto&& g, const std::vector<double>& s) {
    double v = 0.0;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) v += gk(g, s[k], s[k + 1], 1e-12);
    return v;
  };
  auto inner = [&](double a) {
    return a * piecewise([&](double b) { return f(a * b * d + y); }, splits(a * d));
  };
  return piecewise(inner, splits(d));
}

// ---------------------------------------------------------------------------

Cutoff Cutoff::smooth(const Point& center, double inner, double outer, double scale) {
  if (!(inner >= 0.0 && outer > inner)) throw std::invalid_argument("cutoff needs 0 <= inner < outer");
  Cutoff c;
  c.parts_.push_back({center, inner, outer, scale, false});
  return c;
}

Cutoff Cutoff::constant(double value) {
  Cutoff c;
  c.parts_.push_back({Point{}, kInf, kInf, value, true});
  return c;
}

double Cutoff::operator()(const Point& x) const {
  double v = 0.0;
  for (const auto& p : parts_) {
    if (p.everywhere) {
      v += p.scale;
      continue;
    }
    const double r = distance(x, p.center);
    v += p.scale * smooth_step((r - p.inner) / (p.outer - p.inner));
  }
  return v;
}

Cutoff Cutoff::operator+(const Cutoff& o) const {
  Cutoff c = *this;
  c.parts_.insert(c.parts_.end(), o.parts_.begin(), o.parts_.end());
  return c;
}

std::vector<std::pair<Point, std::vector<double>>> Cutoff::breaks() const {
  std::vector<std::pair<Point, std::vector<double>>> out;
  for (const auto& p : parts_) {
    if (!p.everywhere) out.push_back({p.center, {p.inner, p.outer}});
  }
  return out;
}

bool Cutoff::compact() const {
  return std::none_of(parts_.begin(), parts_.end(), [](const Part& p) { return p.everywhere; });
}

// ---------------------------------------------------------------------------

EnergyValue local_energy(const Solution& u, const Cutoff& eta, double n) {
  if (!(n > 0.0)) throw std::invalid_argument("local_energy: level n must be positive");
  if (u.op().kind() != OperatorSpec::Kind::laplacian) {
    throw UnsupportedOperator("local_energy: closed-form path needs the laplacian; use the grid version");
  }
  const Domain& dom = u.domain();
  auto integrand = [&](const Point& x) {
    const Point g = u.gradient(x);
    return eta(x) * dot(g, g);
  };
  EnergyValue out;
  bool hit = false;
  double total = 0.0;

  if (dom.dim() == 1) {
    const double a = dom.lower()[0], b = dom.upper()[0];
    constexpr int M = 4096;
    std::vector<double> xs, us;
    for (int k = 0; k <= M; ++k) {
      const double x = a + (b - a) * k / M;
      xs.push_back(x);
      us.push_back(u(Point{x}));
    }
    auto g = [&](double t) { return u(Point{t}); };
    std::vector<double> br{a, b};
    crossings(g, xs, us, n, br);
    crossings(g, xs, us, 2.0 * n, br);
    for (const auto& at : u.measure().atoms()) br.push_back(at.x[0]);
    for (const auto& [c, radii] : eta.breaks()) {
      for (double r : radii) {
        for (double t : {c[0] - r, c[0] + r}) {
          if (t > a && t < b) br.push_back(t);
        }
      }
    }
    std::sort(br.begin(), br.end());
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
      const double lo = br[k], hi = br[k + 1];
      if (!(hi > lo) || !in_window(g(0.5 * (lo + hi)), n)) continue;
      hit = true;
      total += gk([&](double t) { return integrand(Point{t}); }, lo, hi);
    }
  } else if (dom.dim() == 2) {
    const auto disks = atom_disks(u);
    for (const auto& dk : disks) {
      // trapezoid in the angle, doubled until stable
      auto sweep = [&](int m, int stride, int offset) {
        std::vector<double> vals(static_cast<std::size_t>(m / stride), 0.0);
        std::vector<char> hits(vals.size(), 0);
#pragma omp parallel for schedule(dynamic, 4)
        for (int k = 0; k < m / stride; ++k) {
          const double t = 2.0 * kPi * (k * stride + offset) / m;
          bool h = false;
          vals[static_cast<std::size_t>(k)] =
              ray_integral(u, integrand, dk.center, Point{std::cos(t), std::sin(t)}, dk.radius, n, h);
          hits[static_cast<std::size_t>(k)] = h;
        }
        double s = 0.0;
        for (std::size_t k = 0; k < vals.size(); ++k) {
          s += vals[k];
          hit = hit || hits[k];
        }
        return s;
      };
      int m = 32;
      double sum = sweep(m, 1, 0);
      double prev = sum * 2.0 * kPi / m;
      double est = prev;
      while (m < 4096) {
        sum += sweep(2 * m, 2, 1);
        m *= 2;
        est = sum * 2.0 * kPi / m;
        if (std::abs(est - prev) <= 1e-12 * std::abs(est)) break;
        prev = est;
      }
      total += est;
    }
    // the rest of the domain by a fine midpoint rule
    constexpr int M = 512;
    const Point lo = dom.lower(), hi = dom.upper();
    const double hx = (hi[0] - lo[0]) / M, hy = (hi[1] - lo[1]) / M;
    std::vector<double> rows(M, 0.0);
    std::vector<char> row_hit(M, 0);
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < M; ++i) {
      double s = 0.0;
      for (int j = 0; j < M; ++j) {
        const Point x{lo[0] + (i + 0.5) * hx, lo[1] + (j + 0.5) * hy};
        if (!dom.contains(x)) continue;
        bool near = false;
        for (const auto& dk : disks) near = near || distance(x, dk.center) < dk.radius;
        if (near) continue;
        if (!in_window(u(x), n)) continue;
        row_hit[static_cast<std::size_t>(i)] = 1;
        s += integrand(x);
      }
      rows[static_cast<std::size_t>(i)] = s;
    }
    for (int i = 0; i < M; ++i) {
      total += rows[static_cast<std::size_t>(i)] * hx * hy;
      hit = hit || row_hit[static_cast<std::size_t>(i)];
    }
  } else {
    throw UnsupportedOperator("local_energy: closed-form path implemented for d <= 2");
  }
  out.empty_window = !hit;
  out.value = total / n;
  return out;
}

EnergyValue local_energy(const DiscreteOperator& dop, const GridField& u, const Cutoff& eta, double n) {
  if (!(n > 0.0)) throw std::invalid_argument("local_energy: level n must be positive");
  if (!dop.op().is_local()) throw UnsupportedOperator("local_energy: local operators only");
  const Grid& g = u.grid();
  const double h = g.h();
  auto value_at = [&](std::int64_t lattice) {
    if (lattice < 0) return 0.0;
    const auto i = g.interior_of(lattice);
    return i < 0 ? 0.0 : u[i];
  };
  EnergyValue out;
  bool hit = false;
  double total = 0.0;
  for (std::int64_t i = 0; i < u.size(); ++i) {
    if (!in_window(u[i], n)) continue;
    hit = true;
    const auto l = g.lattice_of(i);
    const Point x = g.coord(l);
    const Matrix3 a = dop.op().coefficient_at(x);
    double e = 0.0;
    for (int k = 0; k < g.dim(); ++k) {
      const double up = value_at(g.neighbor(l, k, 1));
      const double dn = value_at(g.neighbor(l, k, -1));
      double d;
      if (std::isfinite(up) && std::isfinite(dn)) {
        d = (up - dn) / (2.0 * h);
      } else if (std::isfinite(up)) {
        d = (up - u[i]) / h;
      } else {
        d = (u[i] - dn) / h;
      }
      e += a[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)] * d * d;
    }
    total += eta(x) * e;
  }
  out.empty_window = !hit;
  out.value = total * g.cell_volume() / n;
  return out;
}

// ---------------------------------------------------------------------------

EnergyValue nonlocal_energy(const Solution& u, const Cutoff& eta, double n, const NonlocalOptions& opt) {
  if (!(n > 0.0)) throw std::invalid_argument("nonlocal_energy: level n must be positive");
  if (u.op().is_local()) throw UnsupportedOperator("nonlocal_energy: fractional operators only");
  const Domain& dom = u.domain();
  if (dom.kind() != Domain::Kind::interval) {
    throw UnsupportedOperator("nonlocal_energy: quadrature implemented on intervals");
  }
  const double alpha = u.op().alpha();
  const double a = dom.lower()[0], b = dom.upper()[0];
  const double len = b - a;
  auto uval = [&](double t) { return u(Point{t}); };

  // breakpoints of S_n(u): atoms and level crossings of n and 2n
  std::vector<double> xs;
  for (int k = 1; k < 2048; ++k) xs.push_back(a + len * k / 2048);
  for (const auto& at : u.measure().atoms()) {
    for (int j = 1; j <= 160; ++j) {
      const double r = len * std::pow(0.8, j);
      for (double t : {at.x[0] - r, at.x[0] + r}) {
        if (t > a && t < b) xs.push_back(t);
      }
    }
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::vector<double> us(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) us[k] = uval(xs[k]);
  std::vector<double> br{a, b};
  crossings(uval, xs, us, n, br);
  crossings(uval, xs, us, 2.0 * n, br);
  for (const auto& at : u.measure().atoms()) br.push_back(at.x[0]);
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());

  enum Cls { below, window, above };
  auto cls = [&](double v) { return v >= 2.0 * n ? above : (v <= n ? below : window); };
  std::vector<Cls> piece_cls;
  bool any_window = false;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    piece_cls.push_back(cls(uval(0.5 * (br[k] + br[k + 1]))));
    any_window = any_window || piece_cls.back() == window;
  }
  EnergyValue out;
  if (!any_window) {
    out.empty_window = true;
    return out;
  }

  // outer breakpoints: S_n breaks plus the cutoff's radii, restricted to its support
  double olo = a, ohi = b;
  std::vector<double> obr = br;
  if (eta.compact()) {
    olo = b;
    ohi = a;
    for (const auto& [c, radii] : eta.breaks()) {
      olo = std::min(olo, c[0] - radii.back());
      ohi = std::max(ohi, c[0] + radii.back());
    }
    olo = std::max(olo, a);
    ohi = std::min(ohi, b);
  }
  for (const auto& [c, radii] : eta.breaks()) {
    for (double r : radii) {
      obr.push_back(c[0] - r);
      obr.push_back(c[0] + r);
    }
  }
  std::vector<double> outer_br;
  for (double t : obr) {
    if (t >= olo && t <= ohi) outer_br.push_back(t);
  }
  outer_br.push_back(olo);
  outer_br.push_back(ohi);
  std::sort(outer_br.begin(), outer_br.end());
  outer_br.erase(std::unique(outer_br.begin(), outer_br.end()), outer_br.end());

  const double c = fractional_constant(alpha, 1);
  auto jump = [&](double x, double y) { return c * std::pow(std::abs(x - y), -1.0 - alpha); };

  double prev = std::numeric_limits<double>::quiet_NaN();
  out.converged = false;
  for (int level = opt.min_level; level <= opt.max_level; ++level) {
    const int layers = 4 + 4 * level;
    const Rule gl = legendre_rule(4 + 2 * level);

    // fixed inner rules per piece, with cached u values
    struct Piece {
      double lo, hi;
      Cls cls;
      Rule rule;
      std::vector<double> u;
    };
    std::vector<Piece> pieces;
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
      Piece p{br[k], br[k + 1], piece_cls[k], {}, {}};
      add_graded(p.lo, p.hi, layers, gl, p.rule);
      for (double y : p.rule.x) p.u.push_back(uval(y));
      pieces.push_back(std::move(p));
    }

    Rule outer;
    for (std::size_t k = 0; k + 1 < outer_br.size(); ++k) add_graded(outer_br[k], outer_br[k + 1], layers, gl, outer);

    std::vector<double> contrib(outer.x.size(), 0.0);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t i = 0; i < outer.x.size(); ++i) {
      const double x = outer.x[i];
      const double e = eta(Point{x});
      if (e == 0.0) continue;
      const double ux = uval(x);
      const Cls cx = cls(ux);
      double inner = 0.0;
      for (const auto& p : pieces) {
        if (p.cls == cx && cx != window) continue;
        if (x > p.lo && x < p.hi) {
          // the piece containing x is split there and graded toward the diagonal
          Rule r;
          add_graded(p.lo, x, layers, gl, r);
          add_graded(x, p.hi, layers, gl, r);
          for (std::size_t k = 0; k < r.x.size(); ++k) {
            if (r.x[k] != x) inner += r.w[k] * theta_n(ux, uval(r.x[k]), n) * jump(x, r.x[k]);
          }
        } else {
          for (std::size_t k = 0; k < p.rule.x.size(); ++k) {
            if (p.rule.x[k] != x) inner += p.rule.w[k] * theta_n(ux, p.u[k], n) * jump(x, p.rule.x[k]);
          }
        }
      }
      const double kill = theta_n(ux, 0.0, n) * killing_density(alpha, dom, Point{x});
      contrib[i] = outer.w[i] * e * (inner + kill);
    }
    double total = 0.0;
    for (double v : contrib) total += v;
    const double value = total / (2.0 * n);
    out.trace.push_back(value);
    out.value = value;
    if (std::isfinite(prev) && std::abs(value - prev) <= opt.rel_tol * std::abs(value)) {
      out.converged = true;
      break;
    }
    prev = value;
  }
  return out;
}

// ---------------------------------------------------------------------------

double reconstruction_target(const Solution& u, const Cutoff& eta) {
  double t = 0.0;
  for (const auto& a : u.decomposition().concentrated.atoms()) t += std::max(a.weight, 0.0) * eta(a.x);
  return t;
}

ReconstructionReport reconstruct_mu_c(const Solution& u, const Cutoff& eta, const std::vector<double>& levels,
                                      const NonlocalOptions& opt) {
  ReconstructionReport rep;
  const bool local = u.op().is_local();
  rep.functional = local ? "local" : "nonlocal";
  rep.target = reconstruction_target(u, eta);
  rep.prefactor = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (k > 0 && !(levels[k] > levels[k - 1])) throw std::invalid_argument("reconstruct: levels must increase");
    const double n = levels[k];
    EnergyValue v;
    if (!local) {
      v = nonlocal_energy(u, eta, n, opt);
    } else if (u.closed_form()) {
      v = local_energy(u, eta, n);
    } else {
      const auto dop = assemble(u.op(), u.field().grid_ptr());
      v = local_energy(dop, u.field(), eta, n);
    }
    rep.levels.push_back(n);
    rep.values.push_back(v.value);
    rep.traces.push_back(v.trace);
    rep.converged.push_back(v.converged);
    rep.rel_errors.push_back(rep.target > 0.0 ? (v.value - rep.target) / rep.target : v.value);
    if (v.empty_window) {
      std::ostringstream msg;
      msg << "level n=" << n << ": empty window {n <= u <= 2n}";
      rep.warnings.push_back(msg.str());
    } else if (rep.target > 0.0) {
      rep.prefactor = v.value / rep.target;
    }
    if (!v.converged) {
      std::ostringstream msg;
      msg << "level n=" << n << ": quadrature refinement did not reach the requested relative change";
      rep.warnings.push_back(msg.str());
    }
  }
  if (rep.values.empty()) {
    rep.trend = "empty";
  } else if (rep.target > 0.0) {
    const double first = std::abs(rep.rel_errors.front());
    const double last = std::abs(rep.rel_errors.back());
    rep.trend = last <= first ? "approaching target" : "moving away from target";
    if (std::isfinite(rep.prefactor) && std::abs(rep.prefactor - 1.0) > 0.1) {
      std::ostringstream msg;
      msg << "fitted prefactor " << rep.prefactor << " differs from 1 by more than 10%";
      rep.warnings.push_back(msg.str());
    }
  } else {
    rep.trend = rep.values.back() == 0.0 ? "vanishing" : "nonzero without concentrated target";
  }
  return rep;
}

}  // namespace potkit
