#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <vector>

namespace potkit {

inline constexpr int kMaxDim = 3;

/// Point in R^d for d <= 3, stored inline.
class Point {
 public:
  Point() = default;
  explicit Point(int dim) : dim_(dim) { check_dim(dim); }
  Point(std::initializer_list<double> coords);

  int dim() const { return dim_; }
  double operator[](int i) const { return c_[static_cast<std::size_t>(i)]; }
  double& operator[](int i) { return c_[static_cast<std::size_t>(i)]; }

  Point& operator+=(const Point& o);
  Point& operator-=(const Point& o);
  Point& operator*=(double s);

  friend bool operator==(const Point& a, const Point& b) = default;

 private:
  static void check_dim(int dim);
  std::array<double, kMaxDim> c_{};
  int dim_ = 0;
};

Point operator+(Point a, const Point& b);
Point operator-(Point a, const Point& b);
Point operator*(double s, Point a);
double dot(const Point& a, const Point& b);
double norm(const Point& a);
double norm2(const Point& a);
double distance(const Point& a, const Point& b);

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Optional restriction of a rectangle to an open subset; true means "inside".
using Mask = std::function<bool(const Point&)>;

/// Open model region: interval, ball, or (optionally masked) rectangle.
class Domain {
 public:
  enum class Kind { interval, ball, rectangle };

  static Domain interval(double a, double b);
  static Domain ball(const Point& center, double radius);
  static Domain rectangle(const Point& lo, const Point& hi, Mask mask = {});

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }

  /// Open-set membership; throws DimensionMismatch.
  bool contains(const Point& x) const;

  /// Distance from an interior point to the complement (exact for interval/ball,
  /// to the bounding box for rectangles; masks are not accounted for).
  double distance_to_boundary(const Point& x) const;
  double diameter() const;
  double volume() const;

  /// Ball view of an interval or ball: center and radius.
  Point center() const { return center_; }
  double radius() const { return radius_; }
  bool is_ball_like() const { return kind_ != Kind::rectangle; }

  Point lower() const { return lo_; }
  Point upper() const { return hi_; }
  bool has_mask() const { return static_cast<bool>(mask_); }

 private:
  Domain() = default;
  Kind kind_ = Kind::interval;
  int dim_ = 1;
  Point lo_, hi_;
  Point center_;
  double radius_ = 0.0;
  Mask mask_;
};

/// Surface area of the unit sphere S^{d-1} in R^d.
double unit_sphere_area(int d);
/// Volume of the unit ball in R^d.
double unit_ball_volume(int d);

enum class NodeKind : std::uint8_t { exterior, boundary, interior };

struct GridOptions {
  std::int64_t node_cap = 10'000'000;
};

/// Uniform lattice over a domain. Interior nodes satisfy Domain::contains;
/// boundary nodes are lattice neighbors of interior nodes that fail it and
/// carry zero Dirichlet data.
class Grid {
 public:
  const Domain& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  double h() const { return h_; }
  /// h^d, the cell volume attached to each node.
  double cell_volume() const { return cell_volume_; }

  std::int64_t lattice_size() const { return static_cast<std::int64_t>(kind_.size()); }
  std::int64_t interior_count() const { return static_cast<std::int64_t>(interior_.size()); }
  const std::array<std::int64_t, kMaxDim>& shape() const { return shape_; }

  NodeKind kind(std::int64_t lattice) const { return kind_[static_cast<std::size_t>(lattice)]; }
  /// Lattice index of interior node i.
  std::int64_t lattice_of(std::int64_t interior) const {
    return interior_[static_cast<std::size_t>(interior)];
  }
  /// Interior index of a lattice node, -1 if the node is not interior.
  std::int64_t interior_of(std::int64_t lattice) const {
    return interior_index_[static_cast<std::size_t>(lattice)];
  }

  std::array<std::int64_t, kMaxDim> multi_index(std::int64_t lattice) const;
  std::int64_t lattice_index(const std::array<std::int64_t, kMaxDim>& idx) const;
  Point coord(std::int64_t lattice) const;
  Point interior_coord(std::int64_t i) const { return coord(lattice_of(i)); }

  /// Lattice neighbor in direction axis, sign (+1/-1); -1 if off-lattice.
  std::int64_t neighbor(std::int64_t lattice, int axis, int sign) const;

  /// Interior node at x (to within 1e-9 h), or -1.
  std::int64_t interior_node_at(const Point& x) const;

  /// Multilinear weights of the 2^d lattice nodes surrounding x.
  std::vector<std::pair<std::int64_t, double>> multilinear_stencil(const Point& x) const;

 private:
  friend Grid build_grid(const Domain& domain, double h, const GridOptions& options);
  Grid(Domain domain) : domain_(std::move(domain)) {}

  Domain domain_;
  double h_ = 0.0;
  double cell_volume_ = 0.0;
  Point origin_;
  std::array<std::int64_t, kMaxDim> shape_{1, 1, 1};
  std::array<std::int64_t, kMaxDim> stride_{1, 1, 1};
  std::vector<NodeKind> kind_;
  std::vector<std::int64_t> interior_index_;
  std::vector<std::int64_t> interior_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Lattice anchored at the ball center, or at the lower corner for
/// intervals/rectangles, so that the h/2 lattice refines the h lattice.
Grid build_grid(const Domain& domain, double h, const GridOptions& options = {});
GridPtr make_grid(const Domain& domain, double h, const GridOptions& options = {});

/// Scalar values on the interior nodes of a grid; boundary values are zero.
class GridField {
 public:
  GridField() = default;
  explicit GridField(GridPtr grid, double fill = 0.0);
  GridField(GridPtr grid, std::vector<double> values);

  const GridPtr& grid_ptr() const { return grid_; }
  const Grid& grid() const { return *grid_; }
  std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }
  double operator[](std::int64_t i) const { return values_[static_cast<std::size_t>(i)]; }
  double& operator[](std::int64_t i) { return values_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Sum of values times cell volume.
  double integral() const;
  /// Sum of values * weight * cell volume.
  double weighted_integral(const GridField& weight) const;
  double max() const;
  double min() const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

GridField sample(GridPtr grid, const std::function<double(const Point&)>& f);

}  // namespace potkit
