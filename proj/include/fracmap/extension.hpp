#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fracmap/field.hpp"
#include "fracmap/grid.hpp"
#include "fracmap/parallel.hpp"

namespace fracmap {

struct ExtendOptions {
  double shell_ratio = 1.25;   ///< geometric growth of kernel shells (n >= 2)
  int max_angles = 64;         ///< angular resolution cap per shell
  double tail_tol = 1e-7;      ///< stop shells when remaining mass is below
  double far_radius = 1e4;     ///< hard shell cutoff (analytic remainder)
  Exec mode = par::default_mode();

  static ExtendOptions high_quality() {
    ExtendOptions o;
    o.shell_ratio = 1.12;
    o.max_angles = 128;
    o.tail_tol = 1e-9;
    return o;
  }
};

/// Poisson extension u^e(x,z) of u to the half-space, sampled on hspec.
/// Kernel weights per node sum to exactly 1 (renormalized), so constants
/// extend to constants. n = 1 uses exact interval weights against a
/// piecewise-linear reconstruction plus contour tails; n = 2 uses exact
/// radial shell masses with angular sampling plus analytic far remainders.
HalfField poisson_extend(const VectorField& u, const HalfGridSpec& hspec,
                         const ExtendOptions& opts = {});

struct HalfBallOptions {
  double core_factor = 8.0;  ///< singular-core radius in units of h (0 = off)
  Exec mode = par::default_mode();
};

/// Dirichlet energy (1/2) int |grad u^e|^2 over B_r^+(x0,0) by midpoint
/// quadrature with covered-fraction weights on boundary cells. For n >= 2 a
/// small core around the center is replaced by a radial extrapolation from
/// the adjacent annulus, which removes the O(h) error the midpoint rule
/// makes against the 1/s^2 gradient concentration at singular centers (see
/// halfball_energy_cells for the plain rule).
double halfball_energy(const HalfField& ue, std::span<const double> x0,
                       double r, const std::vector<double>* grad = nullptr,
                       const HalfBallOptions& opts = {});

/// Plain cell sum without the core treatment.
double halfball_energy_cells(const HalfField& ue, std::span<const double> x0,
                             double r, const std::vector<double>* grad = nullptr,
                             Exec mode = par::default_mode());

/// Visit the half-grid cells meeting B_r^+(x0): f(bnode, level, cell volume,
/// covered fraction). Serial, deterministic order.
void visit_halfball_cells(
    const HalfGridSpec& hs, std::span<const double> x0, double r,
    const std::function<void(std::int64_t, int, double, double)>& f);

/// Theta(u^e, B_r^+(x0)) = r^{1-n} E(u^e, B_r^+(x0)).
double theta_density(const HalfField& ue, std::span<const double> x0, double r,
                     const std::vector<double>* grad = nullptr,
                     const HalfBallOptions& opts = {});

/// r -> Theta curve plus the extrapolated density at r -> 0.
struct DensityCurve {
  std::vector<double> center;
  std::vector<double> radii;
  std::vector<double> thetas;
  double xi = 0.0;
  double xi_error = 0.0;
};

struct XiEstimate {
  double value = 0.0;
  double error_bar = 0.0;
};

/// Richardson-style extrapolation of Theta over dyadic radii; the error bar
/// is the last Theta increment (heuristic, see the monotonicity identity).
XiEstimate xi_density(const HalfField& ue, std::span<const double> x0,
                      std::span<const double> radii,
                      const std::vector<double>* grad = nullptr,
                      const HalfBallOptions& opts = {});

DensityCurve density_curve(const HalfField& ue, std::span<const double> x0,
                           std::span<const double> radii,
                           const std::vector<double>* grad = nullptr,
                           const HalfBallOptions& opts = {});

/// Audit of the monotonicity identity: Theta(r) - Theta(rho) against the
/// annulus integral of |(x - x0).grad u^e|^2 / |x - x0|^{n+1}.
struct MonotonicityAudit {
  struct Row {
    double rho, r;
    double lhs, rhs;
    double mismatch;  ///< |lhs-rhs| / max(|lhs|, |rhs|, 1e-14)
  };
  std::vector<double> center;
  std::vector<Row> rows;
  double max_mismatch() const;
};

MonotonicityAudit monotonicity_audit(
    const HalfField& ue, std::span<const double> x0,
    std::span<const std::pair<double, double>> pairs,
    const std::vector<double>* grad = nullptr, const HalfBallOptions& opts = {});

/// W_r(x) = W_{r,8r}(x): annulus integral of the squared radial derivative.
double pinching_w(const HalfField& ue, std::span<const double> x, double r,
                  const std::vector<double>* grad = nullptr,
                  Exec mode = par::default_mode());

/// A_ij = int_{B_r^+} <d_i u^e, d_j u^e> over the boundary directions, with
/// its eigen-decomposition: trace(F^T A F) is the directional energy of the
/// subspace spanned by the frame F.
struct DirectionalEnergy {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd eigenvalues;   // ascending (Eigen convention)
  Eigen::MatrixXd eigenvectors;  // columns
  double subspace_energy(const Eigen::MatrixXd& frame) const;
};

DirectionalEnergy directional_energy_matrix(const HalfField& ue,
                                            std::span<const double> x, double r,
                                            const std::vector<double>* grad = nullptr,
                                            Exec mode = par::default_mode());

/// E(u^e, B_r^+(x)) / E(u, D_2r(x)) with the extension built on demand.
struct ComparisonRatio {
  double ratio = 0.0;
  bool flagged_constant = false;  ///< zero boundary energy
  double extension_energy = 0.0;
  double boundary_energy = 0.0;
};

ComparisonRatio extension_energy_comparison(const VectorField& u,
                                            std::span<const double> x, double r,
                                            const ExtendOptions& opts = {});

}  // namespace fracmap
