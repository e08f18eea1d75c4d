#pragma once

#include <cstdint>
#include <vector>

#include "fracmap/field.hpp"
#include "fracmap/grid.hpp"
#include "fracmap/parallel.hpp"

namespace fracmap {

/// gamma_n = pi^{-(n+1)/2} Gamma((n+1)/2), the fractional-kernel constant.
double gamma_n(int n);

/// Breakdown of the nonlocal 1/2-Dirichlet energy E(u, Omega).
struct EnergyReport {
  double value = 0.0;            ///< interior + exterior
  double interior = 0.0;         ///< (gamma/4) over Omega x Omega
  double exterior = 0.0;         ///< (gamma/2) over Omega x Omega^c
  std::int64_t skipped_cells = 0;  ///< flagged singular cells skipped
};

struct EnergyOptions {
  double ring_ratio = 1.15;   ///< geometric growth of exterior tail shells
  double far_radius = 1e4;    ///< switch to the analytic far form beyond this
  Exec mode = par::default_mode();
};

/// E(u, Omega) = (gamma_n/4) of |u(x)-u(y)|^2 / |x-y|^{n+1} over all pairs
/// with at least one point in Omega. Midpoint quadrature over node-pair
/// cells; same-cell pairs use the Lipschitz bound with the kernel integrated
/// in closed form; the beyond-grid tail is integrated against the exterior
/// descriptor (analytic remainder past far_radius).
EnergyReport half_energy(const VectorField& u, const Ball& omega,
                         const EnergyOptions& opts = {});

/// [u]_{H^{1/2}(Omega)}: same quadrature with both variables in Omega.
/// Returns the seminorm (not its square).
double h_half_seminorm(const VectorField& u, const Ball& omega,
                       const EnergyOptions& opts = {});

/// <(-Delta)^{1/2} u, phi>_Omega for phi supported in Omega.
double fractional_pairing(const VectorField& u, const VectorField& phi,
                          const Ball& omega, const EnergyOptions& opts = {});

/// Pointwise Euler-Lagrange residual |(-Delta)^{1/2}u - lambda(x) u(x)| per
/// Omega node, both sides evaluated with the same principal-value quadrature.
struct ResidualField {
  std::vector<std::int64_t> nodes;
  std::vector<double> residual;
  double max() const;
  double median() const;
};
ResidualField sphere_el_residual(const VectorField& u, const Ball& omega,
                                 const EnergyOptions& opts = {});

struct MinimizeOptions {
  double step = 0.25;          ///< initial/maximal step size (<= 1)
  int max_iterations = 500;
  double energy_tol = 1e-10;   ///< relative energy-decrease stop
  double r_ext = 0.0;          ///< exterior truncation radius (0: auto)
  Exec mode = par::default_mode();
};

struct MinimizeResult {
  VectorField field;
  struct LogRow {
    int iteration;
    double energy;
    double step;
    double residual;
  };
  std::vector<LogRow> log;
  bool stagnated = false;   ///< step collapsed below 1e-12
  int accepted_steps = 0;
};

/// Projected gradient descent v <- pi_N(v - tau grad E) on the discrete
/// pair-quadrature energy, values outside Omega fixed, Armijo backtracking.
/// The energy sequence over accepted iterates is nonincreasing.
MinimizeResult minimize(const VectorField& u0, const Ball& omega,
                        const MinimizeOptions& opts = {});

struct WeakHarmonicReport {
  double max_ratio = 0.0;   ///< max |pairing| / ||phi||_{L2} over trials
  double tolerance = 0.0;
  int trials = 0;
  bool pass = false;
};

/// Draws random smooth compactly supported test fields, projects them onto
/// the tangent spaces T_{u(x)}N, and checks the weak equation pairing.
WeakHarmonicReport weak_harmonic_test(const VectorField& u, const Ball& omega,
                                      int trials, double tol,
                                      std::uint64_t seed = 2024,
                                      const EnergyOptions& opts = {});

}  // namespace fracmap
