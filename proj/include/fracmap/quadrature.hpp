#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

namespace fracmap::quad {

/// Surface measure of the unit sphere S^{n-1} (n = 1 gives the two-point
/// measure of {-1, +1}).
double sphere_measure(int n);

/// Mass of the unit-normalized Poisson kernel P_z within radius s of its
/// center: integral over {|w| < s} of gamma_n z / (|w|^2 + z^2)^{(n+1)/2}.
/// Supported for n in {1, 2, 3}.
double poisson_radial_cdf(double s, double z, int n);

/// n = 1 exact interval weights in centered coordinates w = y - x:
/// mass over [A, B] and first moment about w = 0.
double poisson_mass_interval(double A, double B, double z);
double poisson_moment_interval(double A, double B, double z);

/// n = 2 exact rectangle mass in centered coordinates (corner formula).
double poisson_mass_rect(double u1, double u2, double v1, double v2, double z);

/// Radial factor of the Riesz kernel |w|^{-(n+1)}: the integral of
/// s^{n-1} * s^{-(n+1)} over [s1, s2] is 1/s1 - 1/s2 for every n.
inline double riesz_radial(double s1, double s2) { return 1.0 / s1 - 1.0 / s2; }

/// Contour evaluation of oscillatory tails: integral over [Y, inf) of
/// e^{is} g(s) ds = i e^{iY} * integral over [0, inf) of e^{-t} g(Y + it) dt
/// for g analytic and decaying in the upper half plane.
std::complex<double> exp_tail(
    double Y, const std::function<std::complex<double>(std::complex<double>)>& g);

/// Tail of e^{is}/(s^2 + z^2) from Y.
std::complex<double> exp_tail_poisson(double Y, double z);

/// Tail of e^{is}/s^2 from Y.
std::complex<double> exp_tail_invsq(double Y);

/// Diagonal-cell constant K_n: the integral of |x - y|^{1-n} over pairs of
/// points in a unit n-cube. K_1 = 1; K_2 is the mean inverse distance of the
/// unit square (frozen from the square line-picking distribution). Throws for
/// n >= 3: diagonal cells there are skipped and counted instead.
double diag_cell_constant(int n);

/// Geometric shell schedule from s0 outward: radii s0 * ratio^j clipped at
/// smax. Returns the fence posts (>= 2 entries when smax > s0).
std::vector<double> geometric_shells(double s0, double smax, double ratio);

}  // namespace fracmap::quad
