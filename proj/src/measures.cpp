#include "potkit/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace potkit {

Density Density::constant(double c) {
  Density d;
  d.kind_ = Kind::constant;
  d.amplitude_ = c;
  return d;
}

Density Density::gaussian(double amplitude, const Point& center, double width) {
  if (!(width > 0.0)) throw std::invalid_argument("gaussian density needs a positive width");
  Density d;
  d.kind_ = Kind::gaussian;
  d.amplitude_ = amplitude;
  d.center_ = center;
  d.width_ = width;
  return d;
}

Density Density::field(GridField values) {
  Density d;
  d.kind_ = Kind::field;
  d.field_ = std::move(values);
  return d;
}

double Density::raw(const Point& x) const {
  switch (kind_) {
    case Kind::none:
      return 0.0;
    case Kind::constant:
      return amplitude_;
    case Kind::gaussian:
      return amplitude_ * std::exp(-norm2(x - center_) / (2.0 * width_ * width_));
    case Kind::field: {
      const Grid& g = field_.grid();
      // nearest node
      Point snapped(x.dim());
      const auto st = g.multilinear_stencil(x);
      std::int64_t best = -1;
      double wbest = -1.0;
      for (auto [l, w] : st) {
        if (w > wbest) {
          wbest = w;
          best = l;
        }
      }
      if (best < 0) return 0.0;
      const auto i = g.interior_of(best);
      return i < 0 ? 0.0 : field_[i];
    }
  }
  return 0.0;
}

double Density::operator()(const Point& x) const {
  const double v = raw(x);
  switch (part_) {
    case Part::all:
      return v;
    case Part::positive:
      return std::max(v, 0.0);
    case Part::negative:
      return std::max(-v, 0.0);
  }
  return v;
}

Density Density::jordan(Part p) const {
  if (part_ != Part::all) throw std::logic_error("jordan part of a jordan part");
  Density d = *this;
  d.part_ = p;
  if (kind_ == Kind::constant) {
    d.part_ = Part::all;
    d.amplitude_ = p == Part::positive ? std::max(amplitude_, 0.0) : std::max(-amplitude_, 0.0);
    if (d.amplitude_ == 0.0) d.kind_ = Kind::none;
  }
  return d;
}

bool operator==(const Density& a, const Density& b) {
  if (a.kind_ != b.kind_ || a.part_ != b.part_) return false;
  switch (a.kind_) {
    case Density::Kind::none:
      return true;
    case Density::Kind::constant:
      return a.amplitude_ == b.amplitude_;
    case Density::Kind::gaussian:
      return a.amplitude_ == b.amplitude_ && a.center_ == b.center_ && a.width_ == b.width_;
    case Density::Kind::field:
      return a.field_.grid_ptr() == b.field_.grid_ptr() && a.field_.values() == b.field_.values();
  }
  return false;
}

// ---------------------------------------------------------------------------

MeasureData::MeasureData(std::vector<Atom> atoms, Density density)
    : atoms_(std::move(atoms)), density_(std::move(density)) {
  for (const auto& a : atoms_) {
    if (!std::isfinite(a.weight)) throw std::invalid_argument("atom weights must be finite");
  }
}

bool MeasureData::is_zero() const {
  if (density_.kind() == Density::Kind::constant && density_.amplitude() != 0.0) return false;
  if (density_.kind() == Density::Kind::gaussian && density_.amplitude() != 0.0) return false;
  if (density_.kind() == Density::Kind::field) {
    for (double v : density_.nodes().values()) {
      if (v != 0.0) return false;
    }
  }
  return std::all_of(atoms_.begin(), atoms_.end(), [](const Atom& a) { return a.weight == 0.0; });
}

void MeasureData::validate(const Domain& dom) const {
  for (const auto& a : atoms_) {
    if (!dom.contains(a.x)) throw std::invalid_argument("atom lies outside the open domain");
  }
}

MeasureData MeasureData::operator+(const MeasureData& o) const {
  std::vector<Atom> atoms = atoms_;
  atoms.insert(atoms.end(), o.atoms_.begin(), o.atoms_.end());
  if (!density_.empty() && !o.density_.empty()) {
    if (density_.kind() == Density::Kind::constant && o.density_.kind() == Density::Kind::constant &&
        density_.part() == Density::Part::all && o.density_.part() == Density::Part::all) {
      return MeasureData(std::move(atoms), Density::constant(density_.amplitude() + o.density_.amplitude()));
    }
    throw std::invalid_argument("sum of two non-constant densities is not representable");
  }
  return MeasureData(std::move(atoms), density_.empty() ? o.density_ : density_);
}

bool operator==(const MeasureData& a, const MeasureData& b) {
  if (a.atoms_.size() != b.atoms_.size() || !(a.density_ == b.density_)) return false;
  for (std::size_t i = 0; i < a.atoms_.size(); ++i) {
    if (!(a.atoms_[i].x == b.atoms_[i].x) || a.atoms_[i].weight != b.atoms_[i].weight) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

Decomposition decompose(const MeasureData& mu, const OperatorSpec& op, const Domain& dom) {
  const bool polar = points_are_polar(op, dom.dim());
  std::vector<Atom> diffuse_atoms;
  std::vector<Atom> conc_atoms;
  Decomposition dec;
  for (const auto& a : mu.atoms()) {
    (polar ? conc_atoms : diffuse_atoms).push_back(a);
    dec.atom_is_concentrated.push_back(polar);
  }
  dec.diffuse = MeasureData(std::move(diffuse_atoms), mu.density());
  dec.concentrated = MeasureData(std::move(conc_atoms));
  return dec;
}

MeasureData recombine(const Decomposition& dec) {
  std::vector<Atom> atoms;
  std::size_t id = 0, ic = 0;
  for (bool c : dec.atom_is_concentrated) {
    atoms.push_back(c ? dec.concentrated.atoms()[ic++] : dec.diffuse.atoms()[id++]);
  }
  return MeasureData(std::move(atoms), dec.diffuse.density());
}

double density_integral(const Density& f, const Domain& dom) {
  switch (f.kind()) {
    case Density::Kind::none:
      return 0.0;
    case Density::Kind::constant:
      return f.amplitude() * dom.volume();
    case Density::Kind::field: {
      const GridField& v = f.nodes();
      GridField g(v.grid_ptr(), 0.0);
      for (std::int64_t i = 0; i < v.size(); ++i) g[i] = f(v.grid().interior_coord(i));
      return g.integral();
    }
    case Density::Kind::gaussian:
      break;
  }
  using boost::math::quadrature::gauss_kronrod;
  const int d = dom.dim();
  if (dom.kind() == Domain::Kind::interval) {
    auto g = [&](double t) { return f(Point{t}); };
    return gauss_kronrod<double, 61>::integrate(g, dom.lower()[0], dom.upper()[0], 12, 1e-13);
  }
  if (dom.kind() == Domain::Kind::ball && d == 2) {
    const Point c = dom.center();
    const double r = dom.radius();
    auto ang = [&](double t) {
      auto rad = [&](double s) { return s * f(Point{c[0] + s * std::cos(t), c[1] + s * std::sin(t)}); };
      return gauss_kronrod<double, 31>::integrate(rad, 0.0, r, 8, 1e-12);
    };
    return gauss_kronrod<double, 31>::integrate(ang, 0.0, 2.0 * std::numbers::pi, 8, 1e-12);
  }
  // fall back to a fine midpoint rule over the bounding box
  const double hq = dom.diameter() / 400.0;
  const Grid g = build_grid(dom, hq);
  double s = 0.0;
  for (std::int64_t i = 0; i < g.interior_count(); ++i) s += f(g.interior_coord(i));
  return s * g.cell_volume();
}

double total_variation(const MeasureData& mu, const Domain& dom) {
  double s = 0.0;
  for (const auto& a : mu.atoms()) s += std::abs(a.weight);
  const Density& f = mu.density();
  if (f.empty()) return s;
  if (f.part() != Density::Part::all) return s + density_integral(f, dom);
  return s + density_integral(f.jordan(Density::Part::positive), dom) +
         density_integral(f.jordan(Density::Part::negative), dom);
}

MeasureData positive_part(const MeasureData& mu) {
  std::vector<Atom> atoms;
  for (const auto& a : mu.atoms()) {
    if (a.weight > 0.0) atoms.push_back(a);
  }
  return MeasureData(std::move(atoms), mu.density().empty() ? Density{} : mu.density().jordan(Density::Part::positive));
}

MeasureData negative_part(const MeasureData& mu) {
  std::vector<Atom> atoms;
  for (const auto& a : mu.atoms()) {
    if (a.weight < 0.0) atoms.push_back({a.x, -a.weight});
  }
  return MeasureData(std::move(atoms), mu.density().empty() ? Density{} : mu.density().jordan(Density::Part::negative));
}

std::vector<double> deposit(const MeasureData& mu, const Grid& grid) {
  std::vector<double> b(static_cast<std::size_t>(grid.interior_count()), 0.0);
  const double inv = 1.0 / grid.cell_volume();
  for (const auto& a : mu.atoms()) {
    const auto st = grid.multilinear_stencil(a.x);
    double wsum = 0.0;
    for (auto [l, w] : st) {
      if (grid.interior_of(l) >= 0) wsum += w;
    }
    if (!(wsum > 0.0)) throw std::invalid_argument("atom has no interior node in its cell");
    for (auto [l, w] : st) {
      const auto i = grid.interior_of(l);
      if (i >= 0) b[static_cast<std::size_t>(i)] += a.weight * (w / wsum) * inv;
    }
  }
  if (!mu.density().empty()) {
    for (std::int64_t i = 0; i < grid.interior_count(); ++i) {
      b[static_cast<std::size_t>(i)] += mu.density()(grid.interior_coord(i));
    }
  }
  return b;
}

}  // namespace potkit
