#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fracmap/grid.hpp"
#include "fracmap/parallel.hpp"

namespace fracmap {

/// Exterior data descriptor: how a field continues outside its grid box.
/// Quadratures query it analytically, which is what makes unbounded-domain
/// tails computable. An affine pullback (x0, scale) supports rescaled fields:
/// eval(y) = base(x0 + scale*y).
struct Exterior {
  enum class Kind { None, Constant, Vortex, Wave };

  Kind kind = Kind::None;
  std::vector<double> constant;     ///< for Kind::Constant, size d
  std::vector<double> offset;       ///< affine pullback x0 (empty = identity)
  double scale = 1.0;

  static Exterior none() { return {}; }
  static Exterior constant_value(std::vector<double> c);
  static Exterior vortex();  ///< y/|y| on R^2 -> S^1
  static Exterior wave();    ///< y -> (cos y, sin y) on R^1 -> S^1

  bool analytic() const { return kind != Kind::None; }

  /// Evaluate at y (after the affine pullback). Throws for Kind::None.
  void eval(std::span<const double> y, std::span<double> out) const;

  Exterior pulled_back(std::span<const double> x0, double r) const;

  std::string describe() const;
};

/// A gridded map u: box in R^n -> R^d with an exterior descriptor and a set
/// of flagged nodes (placeholders at singular points, excluded from sup-norm
/// scans and diagonal quadrature cells).
struct VectorField {
  GridSpec spec;
  std::vector<double> values;        ///< total()*d, node-major
  Exterior exterior;
  std::vector<std::int64_t> flagged; ///< sorted node indices

  void validate() const;

  std::span<const double> at(std::int64_t node) const {
    return {values.data() + node * spec.d, static_cast<std::size_t>(spec.d)};
  }
  std::span<double> at(std::int64_t node) {
    return {values.data() + node * spec.d, static_cast<std::size_t>(spec.d)};
  }

  bool is_flagged(std::int64_t node) const;

  /// Multilinear interpolation inside the node box.
  void interpolate(std::span<const double> x, std::span<double> out) const;

  /// Field value anywhere: interpolation inside the box, exterior outside.
  /// Throws std::domain_error outside the box when exterior is None.
  void value_at(std::span<const double> x, std::span<double> out) const;

  /// Max |u| deviation from the unit sphere over all nodes (diagnostic).
  double max_sphere_violation() const;

  static VectorField sample(const GridSpec& spec,
                            const std::function<void(std::span<const double>,
                                                     std::span<double>)>& f,
                            Exterior ext = Exterior::none());
};

/// Target sphere S^{d-1} in R^d with its nearest-point projection.
struct SphereTarget {
  int d = 2;

  /// pi_N(v) = v/|v|; throws std::domain_error at v = 0.
  void project(std::span<const double> v, std::span<double> out) const;

  /// Projection of w onto the tangent space at unit vector u.
  void tangent_project(std::span<const double> u, std::span<const double> w,
                       std::span<double> out) const;
};

/// Standalone nearest-point projection onto S^{d-1} (v -> v/|v|).
std::vector<double> project_to_sphere(std::span<const double> v);

/// The vortex u(x) = x/|x| on an n=d=2 grid. The node nearest the origin is
/// set to (1,0) and flagged; the exterior descriptor continues the vortex.
VectorField analytic_vortex(const GridSpec& spec);

/// The S^1-valued wave u(y) = (cos y, sin y) on an n=1, d=2 grid.
VectorField analytic_wave(const GridSpec& spec);

/// u_{x0,r}(y) = u(x0 + r y), resampled on the same grid spec by multilinear
/// interpolation; exterior descriptor is pulled back accordingly.
VectorField rescale_field(const VectorField& u, std::span<const double> x0,
                          double r);

/// Centered finite differences in the interior, one-sided at faces.
/// Layout: per node, n*d entries, axis-major (D[a*d + c] = d u_c / d x_a).
std::vector<double> gradient(const VectorField& u);

/// Frobenius norms |Du| per node from a gradient table.
std::vector<double> gradient_norms(const VectorField& u,
                                   const std::vector<double>& grad);

/// Analytic sup of |Du| over the part of D_r(x) not covered by the node box,
/// deduced from the exterior descriptor. Returns 0 when the ball is covered.
double exterior_gradient_sup(const VectorField& u, std::span<const double> x,
                             double r);

/// Dyadic max-pyramid over a scalar grid (n <= 2) for fast sup queries over
/// balls. Flagged nodes enter as -inf.
class MaxPyramid {
 public:
  MaxPyramid() = default;
  MaxPyramid(const GridSpec& spec, std::vector<double> node_values);

  /// max over nodes with |node - x| < r (node centers, open ball).
  double max_in_ball(std::span<const double> x, double r) const;

 private:
  GridSpec spec_;
  // level 0 = raw nodes; level L blocks cover 2^L nodes per axis
  std::vector<std::vector<double>> levels_;
  std::vector<std::array<int, 2>> dims_;
  double block_max(int level, int bi, int bj) const;
  void collect(std::span<const double> x, double r, int level, int bi, int bj,
               double& best) const;
};

/// Harmonic extension samples on a half-grid, with the boundary trace kept
/// for one-sided z-derivatives at the lowest level.
struct HalfField {
  HalfGridSpec spec;
  std::vector<double> values;   ///< total()*d, (bnode, level)-major
  VectorField boundary;         ///< the boundary data (trace at z = 0)

  int d() const { return spec.boundary.d; }

  std::span<const double> at(std::int64_t bnode, int level) const {
    const std::int64_t i = spec.index(bnode, level) * d();
    return {values.data() + i, static_cast<std::size_t>(d())};
  }
  std::span<double> at(std::int64_t bnode, int level) {
    const std::int64_t i = spec.index(bnode, level) * d();
    return {values.data() + i, static_cast<std::size_t>(d())};
  }

  /// Sample an analytic function ue(x, z) on the half-grid (test helper and
  /// synthetic-field builder). The boundary trace is sampled at z = 0.
  static HalfField sample(
      const HalfGridSpec& spec,
      const std::function<void(std::span<const double>, double,
                               std::span<double>)>& f,
      Exterior ext = Exterior::none());
};

/// Finite-difference gradient of a half-field. Layout per (bnode, level):
/// (n+1)*d entries, axis-major with the z-axis last. Centered differences in
/// x (one-sided at faces); in z a 3-point non-uniform stencil, with the
/// boundary trace closing the stencil at the lowest level.
std::vector<double> halfgrid_gradient(const HalfField& ue,
                                      Exec mode = par::default_mode());

}  // namespace fracmap
