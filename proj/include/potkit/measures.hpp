#pragma once

#include <optional>
#include <string>
#include <vector>

#include "potkit/geometry.hpp"
#include "potkit/kernels.hpp"

namespace potkit {

struct Atom {
  Point x;
  double weight = 0.0;
};

/// Absolutely continuous part f(x) dx of a measure.
class Density {
 public:
  enum class Kind { none, constant, gaussian, field };
  enum class Part { all, positive, negative };

  Density() = default;
  static Density constant(double c);
  /// amplitude * exp(-|x - center|^2 / (2 width^2))
  static Density gaussian(double amplitude, const Point& center, double width);
  /// Node values on a grid, piecewise constant per cell.
  static Density field(GridField values);

  Kind kind() const { return kind_; }
  bool empty() const { return kind_ == Kind::none; }
  double amplitude() const { return amplitude_; }
  const Point& center() const { return center_; }
  double width() const { return width_; }
  const GridField& nodes() const { return field_; }
  Part part() const { return part_; }

  /// f(x); zero for an empty density.
  double operator()(const Point& x) const;

  /// Positive or negative part (both returned as nonnegative functions).
  Density jordan(Part p) const;

  friend bool operator==(const Density& a, const Density& b);

 private:
  double raw(const Point& x) const;
  Kind kind_ = Kind::none;
  Part part_ = Part::all;
  double amplitude_ = 0.0;
  Point center_;
  double width_ = 1.0;
  GridField field_;
};

/// Finite signed measure on an open domain: weighted atoms plus a density.
class MeasureData {
 public:
  MeasureData() = default;
  MeasureData(std::vector<Atom> atoms, Density density = {});

  static MeasureData dirac(const Point& x, double weight = 1.0) { return MeasureData({{x, weight}}); }
  static MeasureData with_density(Density d) { return MeasureData({}, std::move(d)); }

  const std::vector<Atom>& atoms() const { return atoms_; }
  const Density& density() const { return density_; }
  bool is_zero() const;

  /// Throws if an atom lies outside the open domain.
  void validate(const Domain& dom) const;

  MeasureData operator+(const MeasureData& o) const;

  friend bool operator==(const MeasureData& a, const MeasureData& b);

 private:
  std::vector<Atom> atoms_;
  Density density_;
};

struct Decomposition {
  MeasureData diffuse;
  MeasureData concentrated;
  /// For each input atom, true if it went to the concentrated part.
  std::vector<bool> atom_is_concentrated;
};

/// mu = mu_d + mu_c: atoms at polar points are concentrated, everything else diffuse.
Decomposition decompose(const MeasureData& mu, const OperatorSpec& op, const Domain& dom);

/// Inverse of decompose; restores atom order exactly.
MeasureData recombine(const Decomposition& dec);

/// Sum of |atom weights| plus the integral of |density| over the domain.
double total_variation(const MeasureData& mu, const Domain& dom);

/// Integral of the density over the domain.
double density_integral(const Density& f, const Domain& dom);

/// Positive and negative parts; atoms split by sign, densities by pointwise sign.
MeasureData positive_part(const MeasureData& mu);
MeasureData negative_part(const MeasureData& mu);

/// Right-hand side for A u = b on the grid: atoms spread by multilinear weights
/// renormalised over interior nodes and scaled by h^{-d}; densities sampled at nodes.
std::vector<double> deposit(const MeasureData& mu, const Grid& grid);

}  // namespace potkit
