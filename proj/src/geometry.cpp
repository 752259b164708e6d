#include "potkit/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <string>

namespace potkit {

Point::Point(std::initializer_list<double> coords) : dim_(static_cast<int>(coords.size())) {
  check_dim(dim_);
  std::copy(coords.begin(), coords.end(), c_.begin());
}

void Point::check_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw std::invalid_argument("point dimension must be in [1, 3], got " + std::to_string(dim));
  }
}

Point& Point::operator+=(const Point& o) {
  for (int i = 0; i < dim_; ++i) c_[i] += o.c_[i];
  return *this;
}

Point& Point::operator-=(const Point& o) {
  for (int i = 0; i < dim_; ++i) c_[i] -= o.c_[i];
  return *this;
}

Point& Point::operator*=(double s) {
  for (int i = 0; i < dim_; ++i) c_[i] *= s;
  return *this;
}

Point operator+(Point a, const Point& b) { return a += b; }
Point operator-(Point a, const Point& b) { return a -= b; }
Point operator*(double s, Point a) { return a *= s; }

double dot(const Point& a, const Point& b) {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Point& a) { return dot(a, a); }
double norm(const Point& a) { return std::sqrt(norm2(a)); }
double distance(const Point& a, const Point& b) { return norm(a - b); }

double unit_sphere_area(int d) {
  // 2 pi^{d/2} / Gamma(d/2)
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

double unit_ball_volume(int d) { return unit_sphere_area(d) / d; }

// ---------------------------------------------------------------------------

Domain Domain::interval(double a, double b) {
  if (!(a < b)) throw std::invalid_argument("interval requires a < b");
  Domain dom;
  dom.kind_ = Kind::interval;
  dom.dim_ = 1;
  dom.lo_ = Point{a};
  dom.hi_ = Point{b};
  dom.center_ = Point{0.5 * (a + b)};
  dom.radius_ = 0.5 * (b - a);
  return dom;
}

Domain Domain::ball(const Point& center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball requires radius > 0");
  Domain dom;
  dom.kind_ = center.dim() == 1 ? Kind::interval : Kind::ball;
  dom.dim_ = center.dim();
  dom.center_ = center;
  dom.radius_ = radius;
  dom.lo_ = Point(center.dim());
  dom.hi_ = Point(center.dim());
  for (int i = 0; i < center.dim(); ++i) {
    dom.lo_[i] = center[i] - radius;
    dom.hi_[i] = center[i] + radius;
  }
  return dom;
}

Domain Domain::rectangle(const Point& lo, const Point& hi, Mask mask) {
  if (lo.dim() != hi.dim()) throw DimensionMismatch("rectangle corners differ in dimension");
  for (int i = 0; i < lo.dim(); ++i) {
    if (!(lo[i] < hi[i])) throw std::invalid_argument("rectangle requires lo < hi on every axis");
  }
  Domain dom;
  dom.kind_ = Kind::rectangle;
  dom.dim_ = lo.dim();
  dom.lo_ = lo;
  dom.hi_ = hi;
  dom.center_ = 0.5 * (lo + hi);
  dom.radius_ = 0.5 * distance(lo, hi);
  dom.mask_ = std::move(mask);
  return dom;
}

bool Domain::contains(const Point& x) const {
  if (x.dim() != dim_) {
    throw DimensionMismatch("point of dimension " + std::to_string(x.dim()) +
                            " queried against domain of dimension " + std::to_string(dim_));
  }
  switch (kind_) {
    case Kind::interval:
      return x[0] > lo_[0] && x[0] < hi_[0];
    case Kind::ball:
      return distance(x, center_) < radius_;
    case Kind::rectangle:
      for (int i = 0; i < dim_; ++i) {
        if (!(x[i] > lo_[i] && x[i] < hi_[i])) return false;
      }
      return mask_ ? mask_(x) : true;
  }
  return false;
}

double Domain::distance_to_boundary(const Point& x) const {
  switch (kind_) {
    case Kind::interval:
      return std::max(0.0, std::min(x[0] - lo_[0], hi_[0] - x[0]));
    case Kind::ball:
      return std::max(0.0, radius_ - distance(x, center_));
    case Kind::rectangle: {
      double d = std::numeric_limits<double>::infinity();
      for (int i = 0; i < dim_; ++i) d = std::min({d, x[i] - lo_[i], hi_[i] - x[i]});
      return std::max(0.0, d);
    }
  }
  return 0.0;
}

double Domain::diameter() const {
  return kind_ == Kind::rectangle ? distance(lo_, hi_) : 2.0 * radius_;
}

double Domain::volume() const {
  switch (kind_) {
    case Kind::interval:
      return hi_[0] - lo_[0];
    case Kind::ball:
      return unit_ball_volume(dim_) * std::pow(radius_, dim_);
    case Kind::rectangle: {
      double v = 1.0;
      for (int i = 0; i < dim_; ++i) v *= hi_[i] - lo_[i];
      return v;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

std::array<std::int64_t, kMaxDim> Grid::multi_index(std::int64_t lattice) const {
  std::array<std::int64_t, kMaxDim> idx{0, 0, 0};
  for (int k = dim() - 1; k >= 0; --k) {
    idx[k] = lattice / stride_[k];
    lattice -= idx[k] * stride_[k];
  }
  return idx;
}

std::int64_t Grid::lattice_index(const std::array<std::int64_t, kMaxDim>& idx) const {
  std::int64_t l = 0;
  for (int k = 0; k < dim(); ++k) l += idx[k] * stride_[k];
  return l;
}

Point Grid::coord(std::int64_t lattice) const {
  const auto idx = multi_index(lattice);
  Point x(dim());
  for (int k = 0; k < dim(); ++k) x[k] = origin_[k] + static_cast<double>(idx[k]) * h_;
  return x;
}

std::int64_t Grid::neighbor(std::int64_t lattice, int axis, int sign) const {
  const auto idx = multi_index(lattice);
  const std::int64_t j = idx[axis] + sign;
  if (j < 0 || j >= shape_[axis]) return -1;
  return lattice + sign * stride_[axis];
}

std::int64_t Grid::interior_node_at(const Point& x) const {
  std::array<std::int64_t, kMaxDim> idx{0, 0, 0};
  for (int k = 0; k < dim(); ++k) {
    const double t = (x[k] - origin_[k]) / h_;
    const double r = std::round(t);
    if (std::abs(t - r) > 1e-9) return -1;
    if (r < 0 || r >= static_cast<double>(shape_[k])) return -1;
    idx[k] = static_cast<std::int64_t>(r);
  }
  return interior_of(lattice_index(idx));
}

std::vector<std::pair<std::int64_t, double>> Grid::multilinear_stencil(const Point& x) const {
  std::array<std::int64_t, kMaxDim> base{0, 0, 0};
  std::array<double, kMaxDim> frac{0, 0, 0};
  for (int k = 0; k < dim(); ++k) {
    const double t = (x[k] - origin_[k]) / h_;
    double fl = std::floor(t);
    double f = t - fl;
    if (f > 1.0 - 1e-12) {
      fl += 1.0;
      f = 0.0;
    } else if (f < 1e-12) {
      f = 0.0;
    }
    base[k] = static_cast<std::int64_t>(fl);
    frac[k] = f;
  }
  std::vector<std::pair<std::int64_t, double>> out;
  const int corners = 1 << dim();
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    std::array<std::int64_t, kMaxDim> idx = base;
    for (int k = 0; k < dim(); ++k) {
      const bool up = (c >> k) & 1;
      w *= up ? frac[k] : 1.0 - frac[k];
      idx[k] += up ? 1 : 0;
    }
    if (w == 0.0) continue;
    bool inside = true;
    for (int k = 0; k < dim(); ++k) inside = inside && idx[k] >= 0 && idx[k] < shape_[k];
    if (inside) out.emplace_back(lattice_index(idx), w);
  }
  return out;
}

Grid build_grid(const Domain& domain, double h, const GridOptions& options) {
  if (!(h > 0.0)) throw std::invalid_argument("mesh width h must be positive");
  if (h > domain.diameter()) {
    throw std::invalid_argument("mesh width h exceeds the domain diameter");
  }
  Grid g(domain);
  g.h_ = h;
  g.cell_volume_ = std::pow(h, domain.dim());
  const int d = domain.dim();
  g.origin_ = Point(d);
  std::int64_t total = 1;
  for (int k = 0; k < d; ++k) {
    std::int64_t n = 0;
    if (domain.kind() == Domain::Kind::ball) {
      const auto K = static_cast<std::int64_t>(std::ceil(domain.radius() / h)) + 1;
      g.origin_[k] = domain.center()[k] - static_cast<double>(K) * h;
      n = 2 * K + 1;
    } else {
      const double len = domain.upper()[k] - domain.lower()[k];
      const auto M = static_cast<std::int64_t>(std::ceil(len / h - 1e-9));
      g.origin_[k] = domain.lower()[k];
      n = M + 1;
    }
    g.shape_[k] = n;
    if (n > options.node_cap || total > options.node_cap / n) {
      throw std::length_error("grid node count exceeds the configured cap");
    }
    total *= n;
  }
  for (int k = 1; k < d; ++k) g.stride_[k] = g.stride_[k - 1] * g.shape_[k - 1];

  g.kind_.assign(static_cast<std::size_t>(total), NodeKind::exterior);
  g.interior_index_.assign(static_cast<std::size_t>(total), -1);
  for (std::int64_t l = 0; l < total; ++l) {
    if (domain.contains(g.coord(l))) {
      g.kind_[static_cast<std::size_t>(l)] = NodeKind::interior;
      g.interior_index_[static_cast<std::size_t>(l)] = static_cast<std::int64_t>(g.interior_.size());
      g.interior_.push_back(l);
    }
  }
  if (g.interior_.empty()) throw std::invalid_argument("grid has no interior nodes");
  for (const std::int64_t l : g.interior_) {
    for (int k = 0; k < d; ++k) {
      for (int s : {-1, 1}) {
        const std::int64_t nb = g.neighbor(l, k, s);
        if (nb < 0) throw std::logic_error("interior node on lattice edge");
        auto& kind = g.kind_[static_cast<std::size_t>(nb)];
        if (kind == NodeKind::exterior) kind = NodeKind::boundary;
      }
    }
  }
  return g;
}

GridPtr make_grid(const Domain& domain, double h, const GridOptions& options) {
  return std::make_shared<const Grid>(build_grid(domain, h, options));
}

// ---------------------------------------------------------------------------

GridField::GridField(GridPtr grid, double fill)
    : grid_(std::move(grid)), values_(static_cast<std::size_t>(grid_->interior_count()), fill) {}

GridField::GridField(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (static_cast<std::int64_t>(values_.size()) != grid_->interior_count()) {
    throw std::invalid_argument("field size does not match the grid's interior node count");
  }
}

double GridField::integral() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s * grid_->cell_volume();
}

double GridField::weighted_integral(const GridField& weight) const {
  double s = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) s += values_[i] * weight.values_[i];
  return s * grid_->cell_volume();
}

double GridField::max() const { return *std::max_element(values_.begin(), values_.end()); }
double GridField::min() const { return *std::min_element(values_.begin(), values_.end()); }

GridField sample(GridPtr grid, const std::function<double(const Point&)>& f) {
  GridField out(grid);
  for (std::int64_t i = 0; i < grid->interior_count(); ++i) out[i] = f(grid->interior_coord(i));
  return out;
}

}  // namespace potkit
