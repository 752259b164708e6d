#pragma once

#include <functional>
#include <string>
#include <vector>

#include "potkit/geometry.hpp"
#include "potkit/solve.hpp"

namespace potkit {

/// max(min(z, 2n), n)
double s_n(double z, double n);

/// 2 (S_n(x) - S_n(y)) (2x - S_n(x) - S_n(y))
double theta_n(double x, double y, double n);

enum class SigmaRule { gauss32, adaptive };

/// int_0^1 int_0^1 a f(a b (x - y) + y) da db. The adaptive rule splits both
/// integrals where the argument crosses a listed jump point of f.
double sigma(const std::function<double(double)>& f, double x, double y, SigmaRule rule = SigmaRule::gauss32,
             const std::vector<double>& jumps = {});

/// Radial cutoff: 1 on B(center, inner), 0 outside B(center, outer), with a C^inf
/// transition in between. inner = outer = inf gives the constant 1.
class Cutoff {
 public:
  Cutoff() = default;
  static Cutoff smooth(const Point& center, double inner, double outer, double scale = 1.0);
  static Cutoff constant(double value);

  double operator()(const Point& x) const;
  Cutoff operator+(const Cutoff& o) const;

  /// Radii at which the cutoff can change smoothness, per component.
  std::vector<std::pair<Point, std::vector<double>>> breaks() const;
  /// Support contained in the union of balls; false for constant parts.
  bool compact() const;

 private:
  struct Part {
    Point center;
    double inner = 0.0;
    double outer = 0.0;
    double scale = 0.0;
    bool everywhere = false;
  };
  std::vector<Part> parts_;
};

struct EnergyValue {
  double value = 0.0;
  /// Set when the window {n <= u <= 2n} is empty.
  bool empty_window = false;
  /// Successive refinement values (nonlocal only).
  std::vector<double> trace;
  bool converged = true;
};

/// (1/n) int_{n <= u <= 2n} eta a grad u . grad u dx for a closed-form laplacian
/// solution; adaptive polar quadrature around each concentrated atom.
EnergyValue local_energy(const Solution& u, const Cutoff& eta, double n);

/// Grid version from central-difference gradients of u and the operator's
/// coefficient field.
EnergyValue local_energy(const DiscreteOperator& dop, const GridField& u, const Cutoff& eta, double n);

struct NonlocalOptions {
  int min_level = 1;
  int max_level = 6;
  /// Relative change between successive refinement levels.
  double rel_tol = 0.01;
};

/// (1/2n) [ int int eta(x) theta_n(u(x),u(y)) J(x,y) dx dy + int eta(x) theta_n(u(x),0) kappa_D(x) dx ]
/// for a fractional operator on an interval, by graded Gauss-Legendre panels.
EnergyValue nonlocal_energy(const Solution& u, const Cutoff& eta, double n, const NonlocalOptions& opt = {});

struct ReconstructionReport {
  std::string functional;  // "local" or "nonlocal"
  std::vector<double> levels;
  std::vector<double> values;
  std::vector<double> rel_errors;
  std::vector<std::vector<double>> traces;
  std::vector<bool> converged;
  /// int eta d(mu_c)^+ from the decomposition.
  double target = 0.0;
  /// value / target at the largest level with a nonempty window.
  double prefactor = 0.0;
  std::string trend;
  std::vector<std::string> warnings;
};

/// sum over concentrated atoms of max(weight, 0) eta(atom)
double reconstruction_target(const Solution& u, const Cutoff& eta);

ReconstructionReport reconstruct_mu_c(const Solution& u, const Cutoff& eta, const std::vector<double>& levels,
                                      const NonlocalOptions& opt = {});

}  // namespace potkit
