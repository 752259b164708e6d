#include "potkit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace potkit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

void require_ball_like(const Domain& dom, const char* what) {
  if (!dom.is_ball_like()) {
    throw UnsupportedOperator(std::string(what) +
                              ": no closed form on rectangles; use discrete_green on a grid");
  }
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 2.0)) {
    throw std::invalid_argument("fractional index alpha must lie strictly inside (0, 2)");
  }
}

// I(w) = int_0^w s^{alpha/2 - 1} (1 + s)^{-d/2} ds
double ball_green_integral(double alpha, int d, double w) {
  const double a = 0.5 * alpha;
  const double b = 0.5 * (d - alpha);
  if (b > 0.0) {
    if (w <= 1.0) return boost::math::beta(a, b, w / (1.0 + w));
    return boost::math::betac(b, a, 1.0 / (1.0 + w));
  }
  // alpha >= d (only d = 1): the beta representation has b <= 0.
  if (b == 0.0) return 2.0 * std::asinh(std::sqrt(w));
  // b in (-1/2, 0): integrate by parts once,
  // B_z(a, b) = ((a + b) B_z(a, b + 1) - z^a (1 - z)^b) / b with z = w / (1 + w)
  const double z = w / (1.0 + w);
  return ((a + b) * boost::math::beta(a, b + 1.0, z) - std::pow(z, a) * std::pow(1.0 + w, -b)) / b;
}

// Newtonian/log fundamental solution Phi(r) for -Delta in d >= 2.
double fundamental(int d, double r) {
  if (d == 2) return -std::log(r) / (2.0 * kPi);
  return std::pow(r, 2 - d) / ((d - 2) * unit_sphere_area(d));
}

// d/dr Phi(r)
double fundamental_derivative(int d, double r) {
  return -std::pow(r, 1 - d) / unit_sphere_area(d);
}

}  // namespace

// ---------------------------------------------------------------------------

OperatorSpec OperatorSpec::laplacian() { return OperatorSpec{}; }

OperatorSpec OperatorSpec::divergence_form(CoefficientFn a, double lambda, double Lambda) {
  if (!(lambda > 0.0 && lambda <= Lambda)) {
    throw std::invalid_argument("divergence form requires 0 < lambda <= Lambda");
  }
  if (!a) throw std::invalid_argument("divergence form requires a coefficient field");
  OperatorSpec op;
  op.kind_ = Kind::divergence_form;
  op.coeff_ = std::move(a);
  op.lambda_ = lambda;
  op.Lambda_ = Lambda;
  return op;
}

OperatorSpec OperatorSpec::fractional(double alpha) {
  check_alpha(alpha);
  OperatorSpec op;
  op.kind_ = Kind::fractional;
  op.alpha_ = alpha;
  return op;
}

Matrix3 OperatorSpec::coefficient_at(const Point& x) const {
  if (kind_ == Kind::divergence_form) return coeff_(x);
  Matrix3 id{};
  for (int i = 0; i < kMaxDim; ++i) id[i][i] = 1.0;
  return id;
}

std::string OperatorSpec::name() const {
  switch (kind_) {
    case Kind::laplacian:
      return "laplacian";
    case Kind::divergence_form:
      return "divergence-form";
    case Kind::fractional:
      return "fractional";
  }
  return "?";
}

double fractional_constant(double alpha, int d) {
  check_alpha(alpha);
  return std::pow(2.0, alpha) * std::tgamma(0.5 * (d + alpha)) /
         (std::pow(kPi, 0.5 * d) * std::abs(std::tgamma(-0.5 * alpha)));
}

double fractional_green_constant(double alpha, int d) {
  const double g = std::tgamma(0.5 * alpha);
  return std::tgamma(0.5 * d) / (std::pow(2.0, alpha) * std::pow(kPi, 0.5 * d) * g * g);
}

bool points_are_polar(const OperatorSpec& op, int d) {
  if (op.kind() == OperatorSpec::Kind::fractional) return op.alpha() <= d;
  return d >= 2;
}

double green(const OperatorSpec& op, const Domain& dom, const Point& x, const Point& y) {
  if (op.kind() == OperatorSpec::Kind::divergence_form) {
    throw UnsupportedOperator("green: no closed form for divergence-form operators; use discrete_green");
  }
  require_ball_like(dom, "green");
  if (x.dim() != dom.dim() || y.dim() != dom.dim()) throw DimensionMismatch("green: dimension mismatch");
  if (!dom.contains(x) || !dom.contains(y)) return 0.0;
  const int d = dom.dim();
  const double r = dom.radius();
  const Point xc = x - dom.center();
  const Point yc = y - dom.center();
  const double dxy = distance(x, y);

  if (op.kind() == OperatorSpec::Kind::laplacian) {
    if (d == 1) {
      const double a = dom.lower()[0];
      const double b = dom.upper()[0];
      const double lo = std::min(x[0], y[0]);
      const double hi = std::max(x[0], y[0]);
      return (lo - a) * (b - hi) / (b - a);
    }
    if (dxy == 0.0) return kInf;
    // Kelvin reflection: |y|/r |x - y*| = sqrt(|x|^2 |y|^2 / r^2 - 2 x.y + r^2)
    const double q2 = norm2(xc) * norm2(yc) / (r * r) - 2.0 * dot(xc, yc) + r * r;
    const double q = std::sqrt(std::max(q2, 0.0));
    if (d == 2) return std::log(q / dxy) / (2.0 * kPi);
    return fundamental(d, dxy) - fundamental(d, q);
  }

  // fractional, Blumenthal-Getoor-Ray
  const double alpha = op.alpha();
  const double kappa = fractional_green_constant(alpha, d);
  const double ax = r * r - norm2(xc);
  const double ay = r * r - norm2(yc);
  if (dxy == 0.0) {
    if (alpha <= d) return kInf;
    return kappa * (2.0 / (alpha - d)) * std::pow(ax / r, alpha - d);
  }
  const double w = ax * ay / (r * r * dxy * dxy);
  return kappa * std::pow(dxy, alpha - d) * ball_green_integral(alpha, d, w);
}

Point green_gradient(const OperatorSpec& op, const Domain& dom, const Point& x, const Point& y) {
  if (op.kind() != OperatorSpec::Kind::laplacian) {
    throw UnsupportedOperator("green_gradient: closed form only for the laplacian");
  }
  require_ball_like(dom, "green_gradient");
  const int d = dom.dim();
  Point g(d);
  if (!dom.contains(x) || !dom.contains(y)) return g;
  if (d == 1) {
    const double a = dom.lower()[0];
    const double b = dom.upper()[0];
    g[0] = x[0] < y[0] ? (b - y[0]) / (b - a) : -(y[0] - a) / (b - a);
    return g;
  }
  const double r = dom.radius();
  const Point xc = x - dom.center();
  const Point yc = y - dom.center();
  const Point diff = x - y;
  const double dxy = norm(diff);
  if (dxy == 0.0) {
    for (int k = 0; k < d; ++k) g[k] = std::numeric_limits<double>::quiet_NaN();
    return g;
  }
  const double q2 = norm2(xc) * norm2(yc) / (r * r) - 2.0 * dot(xc, yc) + r * r;
  const double q = std::sqrt(std::max(q2, 0.0));
  // grad_x q = (|y|^2 x / r^2 - y) / q
  const double ny2 = norm2(yc);
  for (int k = 0; k < d; ++k) {
    const double dq = (ny2 * xc[k] / (r * r) - yc[k]) / q;
    g[k] = fundamental_derivative(d, dxy) * diff[k] / dxy - fundamental_derivative(d, q) * dq;
  }
  return g;
}

double poisson_kernel(const OperatorSpec& op, const Domain& dom, const Point& x, const Point& z) {
  require_ball_like(dom, "poisson_kernel");
  if (!dom.contains(x)) throw std::invalid_argument("poisson_kernel: x must be interior");
  const int d = dom.dim();
  const double r = dom.radius();
  const Point xc = x - dom.center();
  const Point zc = z - dom.center();
  const double nz = norm(zc);
  if (op.kind() == OperatorSpec::Kind::fractional) {
    if (!(nz > r)) {
      throw std::invalid_argument("poisson_kernel: fractional exit density lives outside the closed ball");
    }
    const double alpha = op.alpha();
    const double C = std::tgamma(0.5 * d) * std::pow(kPi, -0.5 * d - 1.0) * std::sin(0.5 * kPi * alpha);
    const double ratio = (r * r - norm2(xc)) / (nz * nz - r * r);
    return C * std::pow(ratio, 0.5 * alpha) * std::pow(distance(x, z), -d);
  }
  if (op.kind() == OperatorSpec::Kind::divergence_form) {
    throw UnsupportedOperator("poisson_kernel: no closed form for divergence-form operators");
  }
  if (std::abs(nz - r) > 1e-9 * r) {
    throw std::invalid_argument("poisson_kernel: laplacian exit point must lie on the sphere");
  }
  if (d == 1) {
    const double a = dom.lower()[0];
    const double b = dom.upper()[0];
    return z[0] > dom.center()[0] ? (x[0] - a) / (b - a) : (b - x[0]) / (b - a);
  }
  return (r * r - norm2(xc)) / (unit_sphere_area(d) * r * std::pow(distance(x, z), d));
}

double jump_kernel(double alpha, int d, const Point& x, const Point& y) {
  const double r = distance(x, y);
  if (r == 0.0) throw std::invalid_argument("jump_kernel: x and y coincide");
  return fractional_constant(alpha, d) * std::pow(r, -d - alpha);
}

double killing_density(double alpha, const Domain& dom, const Point& x) {
  require_ball_like(dom, "killing_density");
  if (!dom.contains(x)) throw std::invalid_argument("killing_density: x must be interior");
  const int d = dom.dim();
  const double c = fractional_constant(alpha, d);
  if (d == 1) {
    const double a = dom.lower()[0];
    const double b = dom.upper()[0];
    return (c / alpha) * (std::pow(x[0] - a, -alpha) + std::pow(b - x[0], -alpha));
  }
  // int_{D^c} |x-y|^{-d-alpha} dy = (1/alpha) int_{S^{d-1}} rho(e)^{-alpha} de with
  // rho(e) the distance from x to the sphere along e; by symmetry about the x axis
  // de = |S^{d-2}| sin^{d-2}(phi) dphi.
  const double r = dom.radius();
  const double s = norm(x - dom.center());
  auto integrand = [&](double phi) {
    const double p = s * std::cos(phi);
    const double rho = -p + std::sqrt(p * p + r * r - s * s);
    return std::pow(std::sin(phi), d - 2) * std::pow(rho, -alpha);
  };
  using boost::math::quadrature::gauss_kronrod;
  const double ang = gauss_kronrod<double, 61>::integrate(integrand, 0.0, kPi, 10, 1e-13);
  return (c / alpha) * unit_sphere_area(d - 1) * ang;
}

KillingValue killing_density(const OperatorSpec& op, const Domain& dom, const Point& x) {
  if (op.is_local()) return {0.0, true};
  return {killing_density(op.alpha(), dom, x), false};
}

double expected_exit_time(const OperatorSpec& op, const Domain& dom, const Point& x) {
  require_ball_like(dom, "expected_exit_time");
  if (!dom.contains(x)) return 0.0;
  const int d = dom.dim();
  const double r = dom.radius();
  const double a2 = r * r - norm2(x - dom.center());
  if (op.kind() == OperatorSpec::Kind::laplacian) return a2 / (2.0 * d);
  if (op.kind() == OperatorSpec::Kind::divergence_form) {
    throw UnsupportedOperator("expected_exit_time: no closed form for divergence-form operators");
  }
  const double alpha = op.alpha();
  return std::tgamma(0.5 * d) /
         (std::pow(2.0, alpha) * std::tgamma(1.0 + 0.5 * alpha) * std::tgamma(0.5 * (d + alpha))) *
         std::pow(a2, 0.5 * alpha);
}

// ---------------------------------------------------------------------------

struct DiscreteOperator::Factorization {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  Eigen::LLT<Eigen::MatrixXd> dense;
  bool is_dense = false;
};

DiscreteOperator::DiscreteOperator(GridPtr grid, OperatorSpec op, SparseMatrix A,
                                   std::vector<std::vector<std::int64_t>> colors)
    : grid_(std::move(grid)), op_(std::move(op)), A_(std::move(A)), colors_(std::move(colors)) {
  const std::int64_t n = A_.rows();
  diag_.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<Eigen::Triplet<double, std::int64_t>> trip;
  trip.reserve(static_cast<std::size_t>(A_.nonZeros()));
  for (std::int64_t i = 0; i < n; ++i) {
    for (SparseMatrix::InnerIterator it(A_, i); it; ++it) {
      if (it.col() == i) diag_[static_cast<std::size_t>(i)] = it.value();
    }
    const double di = diag_[static_cast<std::size_t>(i)];
    if (!(di > 0.0)) throw std::invalid_argument("assembled operator has a nonpositive diagonal");
    for (SparseMatrix::InnerIterator it(A_, i); it; ++it) {
      if (it.col() != i) trip.emplace_back(i, it.col(), -it.value() / di);
    }
  }
  P_.resize(n, n);
  P_.setFromTriplets(trip.begin(), trip.end());
  P_.makeCompressed();
}

double DiscreteOperator::apply_P_row(std::int64_t i, const double* v) const {
  const auto* outer = P_.outerIndexPtr();
  const auto* inner = P_.innerIndexPtr();
  const double* val = P_.valuePtr();
  double s = 0.0;
  for (auto k = outer[i]; k < outer[i + 1]; ++k) s += val[k] * v[inner[k]];
  return s;
}

std::vector<double> DiscreteOperator::solve(const std::vector<double>& rhs) const {
  std::call_once(factor_once_, [this] {
    auto f = std::make_shared<Factorization>();
    if (op_.is_local()) {
      Eigen::SparseMatrix<double> colmajor = A_;
      f->ldlt.compute(colmajor);
      if (f->ldlt.info() != Eigen::Success) {
        throw std::runtime_error("sparse Cholesky factorization failed (operator not SPD)");
      }
    } else {
      f->is_dense = true;
      f->dense.compute(Eigen::MatrixXd(A_));
      if (f->dense.info() != Eigen::Success) {
        throw std::runtime_error("dense Cholesky factorization failed (operator not SPD)");
      }
    }
    factor_ = std::move(f);
  });
  Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  Eigen::VectorXd x = factor_->is_dense ? Eigen::VectorXd(factor_->dense.solve(b)) : Eigen::VectorXd(factor_->ldlt.solve(b));
  return {x.data(), x.data() + x.size()};
}

namespace {

std::vector<std::vector<std::int64_t>> parity_colors(const Grid& grid) {
  std::vector<std::vector<std::int64_t>> colors(2);
  for (std::int64_t i = 0; i < grid.interior_count(); ++i) {
    const auto idx = grid.multi_index(grid.lattice_of(i));
    std::int64_t s = 0;
    for (int k = 0; k < grid.dim(); ++k) s += idx[k];
    colors[static_cast<std::size_t>(s & 1)].push_back(i);
  }
  return colors;
}

void check_coefficients(const OperatorSpec& op, const Matrix3& a, int d) {
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i != j && a[i][j] != 0.0) {
        throw UnsupportedOperator(
            "assemble: off-diagonal coefficients are not representable by the nearest-neighbor stencil");
      }
    }
    if (!(a[i][i] >= op.lambda() && a[i][i] <= op.Lambda())) {
      throw std::invalid_argument("assemble: coefficient at node violates the ellipticity bounds (non-SPD)");
    }
  }
}

}  // namespace

DiscreteOperator assemble(const OperatorSpec& op, GridPtr grid) {
  const Grid& g = *grid;
  const int d = g.dim();
  const std::int64_t n = g.interior_count();
  const double h = g.h();
  std::vector<Eigen::Triplet<double, std::int64_t>> trip;

  if (op.is_local()) {
    trip.reserve(static_cast<std::size_t>(n * (2 * d + 1)));
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t l = g.lattice_of(i);
      const Point x = g.coord(l);
      if (op.kind() == OperatorSpec::Kind::divergence_form) check_coefficients(op, op.coefficient_at(x), d);
      double diag = 0.0;
      for (int k = 0; k < d; ++k) {
        for (int s : {-1, 1}) {
          double a = 1.0;
          if (op.kind() == OperatorSpec::Kind::divergence_form) {
            Point mid = x;
            mid[k] += 0.5 * s * h;
            const Matrix3 am = op.coefficient_at(mid);
            check_coefficients(op, am, d);
            a = am[k][k];
          }
          const double w = a / (h * h);
          diag += w;
          const std::int64_t j = g.interior_of(g.neighbor(l, k, s));
          if (j >= 0) trip.emplace_back(i, j, -w);
        }
      }
      trip.emplace_back(i, i, diag);
    }
    SparseMatrix A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    auto colors = parity_colors(g);
    return DiscreteOperator(std::move(grid), op, std::move(A), std::move(colors));
  }

  if (n > kFractionalAssemblyCap) {
    throw std::length_error("assemble: dense fractional stencil limited to 8192 interior nodes");
  }
  const Domain& dom = g.domain();
  require_ball_like(dom, "assemble(fractional)");
  const double alpha = op.alpha();
  const double c = fractional_constant(alpha, d);
  const double hd = g.cell_volume();
  std::vector<Point> xs(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) xs[static_cast<std::size_t>(i)] = g.interior_coord(i);
  trip.reserve(static_cast<std::size_t>(n * n));
  for (std::int64_t i = 0; i < n; ++i) {
    double diag = killing_density(alpha, dom, xs[static_cast<std::size_t>(i)]);
    for (std::int64_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double w =
          c * hd * std::pow(distance(xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(j)]), -d - alpha);
      diag += w;
      trip.emplace_back(i, j, -w);
    }
    trip.emplace_back(i, i, diag);
  }
  SparseMatrix A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  // every pair is coupled: one node per color
  std::vector<std::vector<std::int64_t>> colors(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) colors[static_cast<std::size_t>(i)] = {i};
  return DiscreteOperator(std::move(grid), op, std::move(A), std::move(colors));
}

GridField discrete_green(const DiscreteOperator& dop, std::int64_t y_node) {
  if (y_node < 0 || y_node >= dop.size()) throw std::out_of_range("discrete_green: y is not an interior node");
  std::vector<double> rhs(static_cast<std::size_t>(dop.size()), 0.0);
  rhs[static_cast<std::size_t>(y_node)] = 1.0 / dop.grid().cell_volume();
  return GridField(dop.grid_ptr(), dop.solve(rhs));
}

}  // namespace potkit
