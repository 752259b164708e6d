#pragma once

#include <optional>
#include <vector>

#include "potkit/geometry.hpp"
#include "potkit/kernels.hpp"
#include "potkit/measures.hpp"

namespace potkit {

/// u = R^D mu, either as a closed-form evaluator or as a field from a discrete solve.
class Solution {
 public:
  const OperatorSpec& op() const { return op_; }
  const Domain& domain() const { return dom_; }
  const MeasureData& measure() const { return mu_; }
  const Decomposition& decomposition() const { return dec_; }

  bool closed_form() const { return !field_.has_value(); }
  /// Grid values of the discrete path.
  const GridField& field() const;

  /// u(x); +-infinity at a concentrated atom, 0 outside the domain.
  double operator()(const Point& x) const;
  /// Gradient of the closed form (laplacian with constant or empty density).
  Point gradient(const Point& x) const;

  /// Values at interior nodes. Closed form: sampled; discrete: the field itself
  /// (grid must match), with nodes within one cell of a concentrated atom
  /// replaced by the closed-form value when one exists.
  GridField on_grid(const GridPtr& grid) const;

 private:
  friend Solution integral_solution(const OperatorSpec&, const Domain&, const MeasureData&);
  friend Solution integral_solution(const DiscreteOperator&, const MeasureData&);
  Solution(OperatorSpec op, Domain dom, MeasureData mu);

  OperatorSpec op_;
  Domain dom_;
  MeasureData mu_;
  Decomposition dec_;
  std::optional<GridField> field_;
  bool closed_available_ = false;
};

/// Closed-form superposition sum_i w_i G(., a_i) + int G(., y) f(y) dy.
Solution integral_solution(const OperatorSpec& op, const Domain& dom, const MeasureData& mu);
/// Discrete path: A u = deposit(mu).
Solution integral_solution(const DiscreteOperator& dop, const MeasureData& mu);

/// Evaluates a solution at many points; parallel, order-preserving.
std::vector<double> evaluate(const Solution& u, const std::vector<Point>& xs);

/// R^D f(x) for a density: closed form for constants, otherwise quadrature
/// (polar around x on disks, 64 radial x 64 angular nodes).
double density_potential(const OperatorSpec& op, const Domain& dom, const Density& f, const Point& x);

/// R^D rho on the interior nodes of a grid. Uses the closed form / quadrature
/// when available and a discrete solve on dop otherwise.
GridField potential(const OperatorSpec& op, const Domain& dom, const Density& rho, const GridPtr& grid);
GridField potential(const DiscreteOperator& dop, const Density& rho);

/// Normalised weight rho on a grid: the given density rescaled so that its
/// discrete integral is one.
GridField weight_field(const GridPtr& grid, const Density& rho);

}  // namespace potkit
