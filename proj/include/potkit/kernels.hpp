#pragma once

#include <array>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "potkit/geometry.hpp"

namespace potkit {

// Operator convention
// -------------------
// Kernels are for -L with L = Delta (the full Laplacian), so the interval
// (0,1) Green function is min(x,y)(1 - max(x,y)). Generators written as
// (1/2)Delta differ by a deterministic time change only; exit distributions,
// reduites and tail functionals are identical under both conventions.
// The fractional operator is (-Delta)^{alpha/2} with Fourier symbol |xi|^alpha.

using Matrix3 = std::array<std::array<double, kMaxDim>, kMaxDim>;
using CoefficientFn = std::function<Matrix3(const Point&)>;

class UnsupportedOperator : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class OperatorSpec {
 public:
  enum class Kind { laplacian, divergence_form, fractional };

  static OperatorSpec laplacian();
  /// a(x) symmetric positive definite with lambda |xi|^2 <= a xi.xi <= Lambda |xi|^2.
  static OperatorSpec divergence_form(CoefficientFn a, double lambda, double Lambda);
  static OperatorSpec fractional(double alpha);

  Kind kind() const { return kind_; }
  bool is_local() const { return kind_ != Kind::fractional; }
  double alpha() const { return alpha_; }
  const CoefficientFn& coefficients() const { return coeff_; }
  double lambda() const { return lambda_; }
  double Lambda() const { return Lambda_; }
  /// a(x); the identity for the Laplacian.
  Matrix3 coefficient_at(const Point& x) const;
  std::string name() const;

 private:
  Kind kind_ = Kind::laplacian;
  double alpha_ = 2.0;
  CoefficientFn coeff_;
  double lambda_ = 1.0;
  double Lambda_ = 1.0;
};

/// c(alpha, d) = 2^alpha Gamma((d+alpha)/2) / (pi^{d/2} |Gamma(-alpha/2)|).
double fractional_constant(double alpha, int d);
/// Riesz/ball Green prefactor Gamma(d/2) / (2^alpha pi^{d/2} Gamma(alpha/2)^2).
double fractional_green_constant(double alpha, int d);

/// True when single points are polar for the operator in dimension d, i.e.
/// the diagonal of the Green function is +infinity.
bool points_are_polar(const OperatorSpec& op, int d);

/// Closed-form Green function G_D(x,y) for laplacian or fractional on an
/// interval or ball. At x == y returns +infinity when points are polar and
/// the finite diagonal value otherwise. Zero if either point is outside D.
double green(const OperatorSpec& op, const Domain& dom, const Point& x, const Point& y);

/// Gradient in x of the closed-form laplacian Green function.
Point green_gradient(const OperatorSpec& op, const Domain& dom, const Point& x, const Point& y);

/// Exit-law density at z for the process started at x in a ball.
/// Laplacian: Poisson kernel on the sphere (for d = 1 the exit mass at the
/// endpoint z). Fractional: the exit density on the complement of the closed ball.
double poisson_kernel(const OperatorSpec& op, const Domain& dom, const Point& x, const Point& z);

/// c(alpha,d) |x-y|^{-d-alpha}.
double jump_kernel(double alpha, int d, const Point& x, const Point& y);

struct KillingValue {
  double value = 0.0;
  /// Set when a local operator was requested; value is then 0.
  bool local_operator = false;
};

/// c(alpha,d) * int_{D^c} |x-y|^{-d-alpha} dy for x in an interval or ball.
KillingValue killing_density(const OperatorSpec& op, const Domain& dom, const Point& x);
double killing_density(double alpha, const Domain& dom, const Point& x);

/// R^D 1(x): expected exit time in the -L convention (closed form on balls).
double expected_exit_time(const OperatorSpec& op, const Domain& dom, const Point& x);

// ---------------------------------------------------------------------------

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t>;

/// Symmetric positive definite approximation A of -L on the interior nodes of
/// a grid, with the associated killed one-step kernel P = I - diag(A)^{-1} A.
class DiscreteOperator {
 public:
  DiscreteOperator(GridPtr grid, OperatorSpec op, SparseMatrix A,
                   std::vector<std::vector<std::int64_t>> colors);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const OperatorSpec& op() const { return op_; }
  std::int64_t size() const { return A_.rows(); }
  const SparseMatrix& A() const { return A_; }
  const SparseMatrix& P() const { return P_; }
  const std::vector<double>& diagonal() const { return diag_; }

  /// Independent sets of nodes (no P-coupling inside a color), in sweep order.
  const std::vector<std::vector<std::int64_t>>& colors() const { return colors_; }

  /// Solves A x = rhs with a cached sparse Cholesky factorization.
  std::vector<double> solve(const std::vector<double>& rhs) const;

  /// (P v)_i.
  double apply_P_row(std::int64_t i, const double* v) const;

 private:
  struct Factorization;
  GridPtr grid_;
  OperatorSpec op_;
  SparseMatrix A_;
  SparseMatrix P_;
  std::vector<double> diag_;
  std::vector<std::vector<std::int64_t>> colors_;
  mutable std::once_flag factor_once_;
  mutable std::shared_ptr<Factorization> factor_;
};

/// Dense fractional assembly is limited to this many interior nodes.
inline constexpr std::int64_t kFractionalAssemblyCap = 8192;

/// 2d+1-point stencil for local operators (diagonal coefficient fields only);
/// full lattice quadrature of the jump kernel for fractional operators, with
/// the mass that leaves D folded into the diagonal as killing.
DiscreteOperator assemble(const OperatorSpec& op, GridPtr grid);

/// Solves A g = e_y / h^d so that g approximates G_D(., y).
GridField discrete_green(const DiscreteOperator& dop, std::int64_t y_node);

}  // namespace potkit
