#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "potkit/geometry.hpp"
#include "potkit/kernels.hpp"
#include "potkit/measures.hpp"

namespace potkit {

struct ReduiteOptions {
  double tol = 1e-10;
  std::int64_t max_sweeps = 1'000'000;
  /// Relaxation factor in (0, 2); 0 selects the optimal SOR factor estimated
  /// from the spectral radius of P.
  double omega = 0.0;
  /// Color-parallel sweeps; false gives the serial lexicographic reference.
  bool parallel = true;
  /// Finish with primal-dual active-set steps (exact complementarity up to the
  /// direct solver). Ignored for dense operators.
  bool polish = true;
};

struct ReduiteResult {
  GridField envelope;
  /// Continuation set V* = {envelope > obstacle}.
  std::vector<bool> continuation;
  /// Nodes where |w - P w| <= tol (includes V*).
  std::vector<bool> harmonic;
  std::int64_t iterations = 0;
  std::int64_t polish_steps = 0;
  /// max_i |min(w - g, w - P w)_i|
  double residual = 0.0;
  double omega = 0.0;
  bool converged = false;
};

class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Smallest excessive majorant of g: fixed point of w <- max(g, P w) from w0 = g.
ReduiteResult reduite(const DiscreteOperator& dop, const GridField& g, const ReduiteOptions& opt = {});

/// Optimal SOR factor 2 / (1 + sqrt(1 - mu^2)) for the Jacobi radius mu of P.
double optimal_omega(const DiscreteOperator& dop);

/// max_i |min(w_i - g_i, w_i - (P w)_i)|
double complementarity_residual(const DiscreteOperator& dop, const GridField& w, const GridField& g);

/// Discrete Dirichlet problem: (A w)_i = 0 for i in V, w = g off V.
GridField harmonic_extension(const DiscreteOperator& dop, const std::vector<bool>& V, const GridField& g);

/// R^V f restricted to V (zero elsewhere): solves A_VV x = f_V.
GridField killed_potential(const DiscreteOperator& dop, const std::vector<bool>& V, const GridField& f);

/// Values with +-infinite nodes replaced by the largest finite |value| among
/// their lattice neighbours; also returns that cap (0 when nothing is infinite).
struct CappedField {
  GridField values;
  double cap = 0.0;
  std::vector<std::int64_t> capped_nodes;
};
CappedField cap_infinite(const GridField& u);

/// int e_{|u|} rho dm.
double d1_norm(const DiscreteOperator& dop, const GridField& u, const GridField& rho,
               const ReduiteOptions& opt = {}, ReduiteResult* detail = nullptr);

struct TailCurve {
  std::vector<double> levels;
  std::vector<double> values;
  std::vector<bool> resolvable;
  std::vector<std::int64_t> iterations;
  /// T_n / (1 - n/cap): removes the finite-cap hitting deficit of capped atoms.
  std::vector<double> corrected;
  double cap = 0.0;
  /// Corrected value at the largest resolvable level n <= cap/2 (raw last value
  /// when nothing was capped).
  double limit = 0.0;
  /// int R^D rho d|mu_c|, computed without the tail functional.
  double target = 0.0;
  std::string verdict;
  std::vector<std::string> warnings;
};

/// T_n = d1_norm((|u| - n)^+) per level. u may carry infinite values at atom
/// nodes; they are capped and levels n >= cap are marked unresolvable and skipped.
TailCurve tail_curve(const DiscreteOperator& dop, const GridField& u, const GridField& rho,
                     const std::vector<double>& levels, double target, const ReduiteOptions& opt = {});

struct FvpDiagnostic {
  std::vector<double> caps;
  std::vector<double> values;
  /// values / (phi(k)/k)
  std::vector<double> normalised;
  std::string trend;  // "bounded", "divergent", "inconclusive"
};

/// d1_norm(phi(min(|u|, k))) across caps k.
FvpDiagnostic fvp_diagnostic(const DiscreteOperator& dop, const GridField& u, const GridField& rho,
                             const std::function<double(double)>& phi, const std::vector<double>& caps,
                             const ReduiteOptions& opt = {});

}  // namespace potkit
