#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fracmap {

/// Uniform node-centered grid over a box in R^n carrying d-vector samples.
/// Node (i_1,...,i_n) sits at origin + h*i; the quadrature cell of a node is
/// the h-cube centered on it, so the covered box is [origin - h/2, ...].
struct GridSpec {
  int n = 0;           ///< domain dimension
  int d = 0;           ///< ambient target dimension
  std::vector<double> origin;
  double h = 0.0;
  std::vector<int> counts;

  void validate() const;  ///< throws std::invalid_argument on a bad spec

  std::int64_t total() const {
    std::int64_t t = 1;
    for (int c : counts) t *= c;
    return t;
  }

  /// Row-major linear index (last axis fastest).
  std::int64_t index(std::span<const int> mi) const {
    std::int64_t idx = 0;
    for (int a = 0; a < n; ++a) idx = idx * counts[a] + mi[a];
    return idx;
  }

  void multi_index(std::int64_t idx, std::span<int> mi) const {
    for (int a = n - 1; a >= 0; --a) {
      mi[a] = static_cast<int>(idx % counts[a]);
      idx /= counts[a];
    }
  }

  double coord(int axis, int i) const { return origin[axis] + h * i; }

  void node(std::int64_t idx, std::span<double> x) const {
    for (int a = n - 1; a >= 0; --a) {
      x[a] = coord(a, static_cast<int>(idx % counts[a]));
      idx /= counts[a];
    }
  }

  std::vector<double> node(std::int64_t idx) const {
    std::vector<double> x(n);
    node(idx, x);
    return x;
  }

  /// Box of node positions (not the cell-covered box).
  double lo(int axis) const { return origin[axis]; }
  double hi(int axis) const { return origin[axis] + h * (counts[axis] - 1); }

  bool contains(std::span<const double> x) const {
    for (int a = 0; a < n; ++a)
      if (x[a] < lo(a) || x[a] > hi(a)) return false;
    return true;
  }

  /// Distance from x to the boundary of the node box (negative if outside).
  double boundary_distance(std::span<const double> x) const;

  /// Index of the node nearest to x (clamped to the box).
  std::int64_t nearest_node(std::span<const double> x) const;
};

/// An open ball D_r(c) in R^n (domains, windows, covering balls).
struct Ball {
  std::vector<double> center;
  double radius = 0.0;

  bool contains(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t a = 0; a < center.size(); ++a) {
      const double t = x[a] - center[a];
      s += t * t;
    }
    return s < radius * radius;
  }
};

/// Z-levels over a boundary grid: the discretization of the half-space
/// R^n x (0, zmax]. Levels are strictly increasing and positive; a geometric
/// schedule resolves the r^{1-n} densities over several dyadic scales.
struct HalfGridSpec {
  GridSpec boundary;
  std::vector<double> zlevels;

  void validate() const;

  std::int64_t total() const {
    return boundary.total() * static_cast<std::int64_t>(zlevels.size());
  }

  int levels() const { return static_cast<int>(zlevels.size()); }

  std::int64_t index(std::int64_t bnode, int level) const {
    return bnode * levels() + level;
  }

  /// Vertical extent [zlo, zhi) of the quadrature cell at a level. The
  /// lowest cell reaches down to z = 0.
  void zcell(int level, double& zlo, double& zhi) const;

  /// Geometric schedule z0 * ratio^j up to zmax (z0 included, zmax covered).
  static std::vector<double> geometric_levels(double z0, double zmax,
                                              double ratio = 1.25);
};

}  // namespace fracmap
