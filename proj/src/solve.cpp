#include "potkit/solve.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace potkit {

namespace {

constexpr double kPi = std::numbers::pi;

bool has_closed_green(const OperatorSpec& op, const Domain& dom) {
  return op.kind() != OperatorSpec::Kind::divergence_form && dom.is_ball_like();
}

bool density_has_closed_potential(const OperatorSpec& op, const Domain& dom, const Density& f) {
  if (!has_closed_green(op, dom)) return false;
  if (f.empty() || f.kind() == Density::Kind::constant) return true;
  return dom.dim() <= 2;
}

// int_0^1 g(s) ds with 64-point Gauss-Legendre
template <class F>
double gl64(F&& g) {
  return boost::math::quadrature::gauss<double, 64>::integrate(g, 0.0, 1.0);
}

}  // namespace

double density_potential(const OperatorSpec& op, const Domain& dom, const Density& f, const Point& x) {
  if (f.empty() || !dom.contains(x)) return 0.0;
  if (f.kind() == Density::Kind::constant) return f.amplitude() * expected_exit_time(op, dom, x);
  if (!has_closed_green(op, dom)) {
    throw UnsupportedOperator("density_potential: no closed-form Green function; use a discrete solve");
  }
  const int d = dom.dim();
  auto integrand = [&](const Point& y) {
    const double g = green(op, dom, x, y);
    return std::isfinite(g) ? g * f(y) : 0.0;
  };
  if (d == 1) {
    boost::math::quadrature::tanh_sinh<double> ts;
    auto g = [&](double t) { return integrand(Point{t}); };
    return ts.integrate(g, dom.lower()[0], x[0], 1e-12) + ts.integrate(g, x[0], dom.upper()[0], 1e-12);
  }
  if (d != 2) throw UnsupportedOperator("density_potential: quadrature implemented for d <= 2");
  // polar coordinates around x; rho = rmax s^p flattens the kernel singularity
  const double alpha = op.is_local() ? 2.0 : op.alpha();
  const double p = 2.0 / alpha;
  const Point xc = x - dom.center();
  const double r = dom.radius();
  constexpr int kAngles = 64;
  double total = 0.0;
  for (int k = 0; k < kAngles; ++k) {
    const double t = (k + 0.5) * 2.0 * kPi / kAngles;
    const Point e{std::cos(t), std::sin(t)};
    const double pe = dot(xc, e);
    const double rmax = -pe + std::sqrt(pe * pe + r * r - norm2(xc));
    auto radial = [&](double s) {
      if (s <= 0.0) return 0.0;
      const double rho = rmax * std::pow(s, p);
      const Point y = x + rho * e;
      return integrand(y) * rho * rmax * p * std::pow(s, p - 1.0);
    };
    total += gl64(radial);
  }
  return total * 2.0 * kPi / kAngles;
}

// ---------------------------------------------------------------------------

Solution::Solution(OperatorSpec op, Domain dom, MeasureData mu)
    : op_(std::move(op)), dom_(std::move(dom)), mu_(std::move(mu)) {
  mu_.validate(dom_);
  dec_ = decompose(mu_, op_, dom_);
  closed_available_ = density_has_closed_potential(op_, dom_, mu_.density());
}

const GridField& Solution::field() const {
  if (!field_) throw std::logic_error("Solution::field: closed-form solution has no grid field");
  return *field_;
}

double Solution::operator()(const Point& x) const {
  if (!closed_available_) {
    throw UnsupportedOperator("Solution: pointwise evaluation needs a closed form; use on_grid");
  }
  if (!dom_.contains(x)) return 0.0;
  double u = 0.0;
  for (const auto& a : mu_.atoms()) {
    if (a.weight == 0.0) continue;
    const double g = green(op_, dom_, x, a.x);
    if (std::isinf(g)) return a.weight > 0 ? g : -g;
    u += a.weight * g;
  }
  return u + density_potential(op_, dom_, mu_.density(), x);
}

Point Solution::gradient(const Point& x) const {
  if (op_.kind() != OperatorSpec::Kind::laplacian) {
    throw UnsupportedOperator("Solution::gradient: closed form only for the laplacian");
  }
  const Density& f = mu_.density();
  if (!f.empty() && f.kind() != Density::Kind::constant) {
    throw UnsupportedOperator("Solution::gradient: closed form only for constant densities");
  }
  Point g(dom_.dim());
  if (!dom_.contains(x)) return g;
  for (const auto& a : mu_.atoms()) g += a.weight * green_gradient(op_, dom_, x, a.x);
  if (!f.empty()) g += (-f.amplitude() / dom_.dim()) * (x - dom_.center());
  return g;
}

GridField Solution::on_grid(const GridPtr& grid) const {
  if (field_) {
    if (field_->grid_ptr() != grid) throw std::invalid_argument("Solution::on_grid: grid mismatch");
    GridField out = *field_;
    if (closed_available_ && !dec_.concentrated.atoms().empty()) {
      const double h = grid->h();
      for (std::int64_t i = 0; i < out.size(); ++i) {
        const Point x = grid->interior_coord(i);
        for (const auto& a : dec_.concentrated.atoms()) {
          if (distance(x, a.x) <= h * (1 + 1e-12)) {
            out[i] = (*this)(x);
            break;
          }
        }
      }
    }
    return out;
  }
  GridField out(grid);
  const std::int64_t n = grid->interior_count();
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t i = 0; i < n; ++i) out[i] = (*this)(grid->interior_coord(i));
  return out;
}

Solution integral_solution(const OperatorSpec& op, const Domain& dom, const MeasureData& mu) {
  Solution s(op, dom, mu);
  if (!s.closed_available_) {
    throw UnsupportedOperator("integral_solution: no closed form for this operator/domain; pass a grid");
  }
  return s;
}

Solution integral_solution(const DiscreteOperator& dop, const MeasureData& mu) {
  Solution s(dop.op(), dop.grid().domain(), mu);
  const auto b = deposit(mu, dop.grid());
  s.field_ = GridField(dop.grid_ptr(), dop.solve(b));
  return s;
}

std::vector<double> evaluate(const Solution& u, const std::vector<Point>& xs) {
  std::vector<double> out(xs.size());
  const auto n = static_cast<std::int64_t>(xs.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = u(xs[static_cast<std::size_t>(i)]);
  return out;
}

GridField potential(const OperatorSpec& op, const Domain& dom, const Density& rho, const GridPtr& grid) {
  if (density_has_closed_potential(op, dom, rho)) {
    GridField out(grid);
    const std::int64_t n = grid->interior_count();
#pragma omp parallel for schedule(dynamic, 64)
    for (std::int64_t i = 0; i < n; ++i) out[i] = density_potential(op, dom, rho, grid->interior_coord(i));
    return out;
  }
  return potential(assemble(op, grid), rho);
}

GridField potential(const DiscreteOperator& dop, const Density& rho) {
  const Grid& g = dop.grid();
  std::vector<double> b(static_cast<std::size_t>(g.interior_count()));
  for (std::int64_t i = 0; i < g.interior_count(); ++i) b[static_cast<std::size_t>(i)] = rho(g.interior_coord(i));
  return GridField(dop.grid_ptr(), dop.solve(b));
}

GridField weight_field(const GridPtr& grid, const Density& rho) {
  GridField w = sample(grid, [&](const Point& x) { return rho(x); });
  const double mass = w.integral();
  if (!(mass > 0.0)) throw std::invalid_argument("weight rho must have positive mass on the grid");
  for (auto& v : w.values()) v /= mass;
  return w;
}

}  // namespace potkit
