#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "fracmap/extension.hpp"
#include "fracmap/field.hpp"
#include "fracmap/grid.hpp"

namespace fracmap {

/// Piecewise-constant orbit average of u^e over the group generated by
/// dilations about (x,0) and translations along V: a function of the
/// direction on the link of the orthogonal half-space, stored per bin.
/// Binning is hierarchical in the complement order, so dropping a frame
/// column refines the parent binning.
struct OrbitAverage {
  std::vector<double> center;   ///< x (boundary point)
  Eigen::MatrixXd frame;        ///< n x k, orthonormal columns (V)
  Eigen::MatrixXd complement;   ///< n x m complement basis, ordered
  int d = 0;
  int bins1 = 1, bins2 = 1;     ///< bins per hierarchical angle
  std::vector<double> value;    ///< bins1*bins2*d
  std::vector<double> weight;   ///< bins1*bins2

  int bin_count() const { return bins1 * bins2; }
  int bin_of(std::span<const double> y, double z) const;
  /// Evaluate at a half-space point (empty bins fall back to the nearest
  /// populated bin).
  void eval(std::span<const double> y, double z, std::span<double> out) const;
};

struct SymmetryFit {
  int k = 0;
  std::vector<double> center;
  double r = 0.0;
  Eigen::MatrixXd frame;        ///< n x k orthonormal columns
  double defect = 0.0;          ///< mean-square deviation over B_r^+ (raw)
  double defect_normalized = 0.0;  ///< raw / mean-square oscillation
  OrbitAverage h;
};

/// Orbit average against a fixed frame V; the L2-optimal boundary
/// k-symmetric competitor on the bin algebra.
SymmetryFit symmetrize(const HalfField& ue, std::span<const double> x, double r,
                       const Eigen::MatrixXd& frame,
                       const std::vector<double>* grad = nullptr);

/// Best (k, eps)-symmetry defect: optimizes the subspace (directional-energy
/// eigenvector seeds, a coarse angle grid for n <= 3, local rotation
/// descent) and inherits the optimal (k+1)-frame as a competitor, which
/// makes defect_k <= defect_{k+1} exact.
SymmetryFit symmetry_defect(const HalfField& ue, std::span<const double> x,
                            double r, int k,
                            const std::vector<double>* grad = nullptr);

/// All defects k = 0..n in one chained computation (shares the search).
std::vector<SymmetryFit> symmetry_profile(const HalfField& ue,
                                          std::span<const double> x, double r,
                                          int kmin = 0,
                                          const std::vector<double>* grad = nullptr);

struct StratumWitness {
  std::int64_t node = -1;
  std::vector<double> x;
  double scale = 0.0;   ///< the scale of smallest defect among the schedule
  double defect = 0.0;  ///< that defect (still above eps for members)
};

struct Stratum {
  int k = 0;
  double eps = 0.0;
  double r = 0.0;
  std::vector<double> schedule;
  std::vector<StratumWitness> members;

  bool contains(std::int64_t node) const;
};

struct StratumOptions {
  double window_radius = 1.0;  ///< probe window D_w(0)
  int stride = 1;              ///< probe every stride-th node per axis
  Exec mode = par::default_mode();
};

/// Quantitative stratum S^k_{eps,r}: nodes around which the extension fails
/// (k+1, eps)-symmetry at every scale of the dyadic schedule {.., 1/4, 1/2}.
Stratum quantitative_stratum(const HalfField& ue, int k, double eps, double r,
                             const StratumOptions& opts = {});

/// The dyadic schedule anchored at 1/2: {1/2, 1/4, ...} down to >= r,
/// ascending. Anchoring makes schedules nest as r decreases.
std::vector<double> dyadic_schedule(double r);

struct EffectiveSpan {
  int dim = 0;
  std::vector<int> picked;      ///< indices into the input point list
  Eigen::MatrixXd directions;   ///< n x dim orthonormal
  Eigen::VectorXd base;         ///< y0
};

/// Greedy farthest-point frame: accepts a new point while its distance to
/// the current affine span is >= 2 rho.
EffectiveSpan effective_span(const std::vector<std::vector<double>>& points,
                             double rho);

/// Regularity scale r_u(x): bisection of r * sup_{D_r(x)} |Du| <= 1 with the
/// sup over non-flagged nodes plus the analytic exterior sup.
class RegularityScale {
 public:
  explicit RegularityScale(const VectorField& u);
  double at(std::span<const double> x) const;

 private:
  const VectorField* u_;
  MaxPyramid pyramid_;
};

double regularity_scale(const VectorField& u, std::span<const double> x);

/// Volume of the r-tube around a point set S, within a window ball:
/// h^n * #{window nodes with dist(node, S) <= r}.
double tube_volume(const GridSpec& grid,
                   const std::vector<std::vector<double>>& S, double r,
                   const Ball& window);

/// Volume of {|Du| > 1/r} within a window: h^n * count over non-flagged
/// nodes.
double gradient_superlevel_volume(const VectorField& u, double r,
                                  const Ball& window);

/// Epsilon-regularity detector: nodes where Theta(u^e, x, r) exceeds eps1.
std::vector<std::int64_t> singular_candidates(const HalfField& ue, double eps1,
                                              double r,
                                              const StratumOptions& opts = {});

}  // namespace fracmap
