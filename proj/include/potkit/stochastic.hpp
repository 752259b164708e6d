#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "potkit/geometry.hpp"
#include "potkit/measures.hpp"
#include "potkit/solve.hpp"

namespace potkit {

using Rng = std::mt19937_64;

class StepBudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Independent generator for sample `index` of a run seeded with `seed`.
Rng substream(std::uint64_t seed, std::uint64_t index);

struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::int64_t samples = 0;
};

/// Sample mean and standard error, summed in index order.
Estimate summarize(const std::vector<double>& values);

/// Runs f(i, rng_i) for i < n in parallel with per-index substreams; the
/// result vector is independent of the thread count.
std::vector<double> sample_values(std::int64_t n, std::uint64_t seed,
                                  const std::function<double(std::int64_t, Rng&)>& f);

/// Uniform point on the unit sphere S^{d-1}.
Point random_direction(int d, Rng& rng);

/// Exit point of Brownian motion started at x. Interval and disk: one exact
/// draw from the harmonic measure. Other domains: walk on spheres down to
/// eps_rel * diameter from the boundary, then projection onto it.
Point wos_exit(const Domain& dom, const Point& x, Rng& rng, double eps_rel = 1e-6);

/// Symmetric alpha-stable vector with E exp(i xi.S) = exp(-|xi|^alpha).
Point stable_increment(int d, double alpha, Rng& rng);

/// Positive (alpha/2)-stable variable with E exp(-s A) = exp(-s^{alpha/2}).
double positive_stable(double beta, Rng& rng);

/// Sums dt^{1/alpha} * stable_increment until the path leaves dom; returns the
/// landing point.
Point stable_exit(const Domain& dom, const Point& x, double alpha, double dt, Rng& rng,
                  std::int64_t max_steps = 100'000'000);

struct StartLaw {
  enum class Kind { point, density };
  Kind kind = Kind::point;
  Point x;
  Density rho;

  static StartLaw at(const Point& p) { return {Kind::point, p, {}}; }
  static StartLaw from(const Density& d) { return {Kind::density, {}, d}; }
};

/// Draw from rho * m restricted to dom (rejection from the bounding box).
Point sample_start(const Domain& dom, const Density& rho, Rng& rng);
Point sample_start(const Domain& dom, const StartLaw& law, Rng& rng);

struct StoppingFamily {
  enum class Kind { reducing, region, fixed_time };
  Kind kind = Kind::reducing;
  /// reducing: levels k of w = R^D|mu|; region: radii r of balls B(center, r);
  /// fixed_time: time caps t (generator Delta).
  std::vector<double> params;
  Point center;
  /// Euler step scale for fixed_time members: step std = step_fraction * distance.
  double step_fraction = 0.2;
  double eps_rel = 1e-6;

  std::string kind_name() const;
};

struct StopOutcome {
  Point x;
  /// |u| at the stopped position.
  double value = 0.0;
  /// Stopped strictly before the exit from D.
  bool before_exit = false;
};

/// Brownian path from x stopped at the family member with parameter `param`
/// (or at the exit from D, whichever is first). Requires the laplacian.
/// The reducing kind needs u radial about the domain center (atoms at the
/// center with nonnegative weights, constant nonnegative density).
StopOutcome stop_path(const Solution& u, const StoppingFamily& family, double param, const Point& x, Rng& rng);

/// Radius of the level set {w = k} of the radial w = R^D|mu|; 0 if w <= k.
double reducing_radius(const Solution& u, double k);

struct ReducingResult {
  Estimate value;
  /// Fraction of paths with tau_k < tau_D.
  double early_fraction = 0.0;
};

/// E_nu[(u - n)^+(X_{tau_k})] for tau_k the exit of {w <= k} from D.
ReducingResult reducing_expectation(const Solution& u, double k, double n, const StartLaw& start,
                                    std::int64_t samples, std::uint64_t seed);

struct UIDiagnostic {
  std::vector<double> levels;
  /// Per level, max over family members of the estimate.
  std::vector<Estimate> estimates;
  std::vector<double> argmax_param;
  double target = 0.0;
  double limit = 0.0;
  double limit_stderr = 0.0;
  std::string verdict;  // "class-D" or "not-class-D"
  std::vector<std::string> warnings;
};

/// sup over the family of E_{rho m}[(|u| - n)^+(X_tau)] per level n. target is
/// int R^D rho d|mu_c|, reported next to the plateau.
UIDiagnostic class_d_diagnostic(const Solution& u, const StoppingFamily& family, const std::vector<double>& levels,
                                const Density& rho, std::int64_t samples, std::uint64_t seed, double target);

struct MaximalCheck {
  Estimate lhs;
  double bound = 0.0;
  double margin = 0.0;
  bool pass = false;
};

/// E_{rho m} sup_{t <= tau_D} |u(X_t)|^{1/2} against 2 * d1^{1/2}, where d1 is
/// the d1 norm of u. The supremum is taken over an adaptive Euler path whose
/// steps shrink near the boundary and near concentrated atoms.
MaximalCheck maximal_inequality_check(const Solution& u, const Density& rho, double d1, std::int64_t samples,
                                      std::uint64_t seed, double step_fraction = 0.2, double eps_rel = 1e-6);

}  // namespace potkit
