#include "fracmap/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fracmap::quad {

namespace {
constexpr double kPi = std::numbers::pi;

using cplx = std::complex<double>;

// Adaptive Simpson on complex integrands.
cplx simpson(const std::function<cplx(double)>& f, double a, double b, cplx fa,
             cplx fm, cplx fb, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const cplx flm = f(lm), frm = f(rm);
  const cplx whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const cplx left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const cplx right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const cplx delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) < 15.0 * tol)
    return left + right + delta / 15.0;
  return simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1) +
         simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1);
}

cplx integrate(const std::function<cplx(double)>& f, double a, double b,
               double tol) {
  const cplx fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return simpson(f, a, b, fa, fm, fb, tol, 28);
}
}  // namespace

double sphere_measure(int n) {
  switch (n) {
    case 1: return 2.0;
    case 2: return 2.0 * kPi;
    case 3: return 4.0 * kPi;
    default: {
      // sigma_{n-1} = 2 pi^{n/2} / Gamma(n/2)
      return 2.0 * std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n);
    }
  }
}

double poisson_radial_cdf(double s, double z, int n) {
  if (s <= 0.0) return 0.0;
  switch (n) {
    case 1:
      return (2.0 / kPi) * std::atan(s / z);
    case 2:
      return 1.0 - z / std::sqrt(s * s + z * z);
    case 3:
      return (2.0 / kPi) * (std::atan(s / z) - z * s / (s * s + z * z));
    default:
      throw std::invalid_argument("poisson_radial_cdf: n must be 1, 2 or 3");
  }
}

double poisson_mass_interval(double A, double B, double z) {
  return (std::atan(B / z) - std::atan(A / z)) / kPi;
}

double poisson_moment_interval(double A, double B, double z) {
  return 0.5 * z / kPi * std::log((B * B + z * z) / (A * A + z * z));
}

double poisson_mass_rect(double u1, double u2, double v1, double v2,
                         double z) {
  auto corner = [z](double u, double v) {
    return std::atan(u * v / (z * std::sqrt(u * u + v * v + z * z)));
  };
  return (corner(u2, v2) - corner(u1, v2) - corner(u2, v1) + corner(u1, v1)) /
         (2.0 * kPi);
}

cplx exp_tail(double Y,
              const std::function<cplx(cplx)>& g) {
  // integral over [0, inf) of e^{-t} g(Y + it) dt, truncated where e^{-t}
  // is negligible
  auto f = [&](double t) { return std::exp(-t) * g(cplx(Y, t)); };
  const cplx inner = integrate(f, 0.0, 42.0, 1e-13);
  return cplx(0.0, 1.0) * std::exp(cplx(0.0, Y)) * inner;
}

cplx exp_tail_poisson(double Y, double z) {
  return exp_tail(Y, [z](cplx s) { return 1.0 / (s * s + z * z); });
}

cplx exp_tail_invsq(double Y) {
  return exp_tail(Y, [](cplx s) { return 1.0 / (s * s); });
}

double diag_cell_constant(int n) {
  switch (n) {
    case 1:
      return 1.0;
    case 2:
      // mean inverse distance between two uniform points of the unit square
      return 2.9732095982473787;
    default:
      throw std::invalid_argument("diag_cell_constant: available for n <= 2");
  }
}

std::vector<double> geometric_shells(double s0, double smax, double ratio) {
  std::vector<double> s;
  s.push_back(s0);
  double v = s0;
  while (v < smax) {
    v = std::min(v * ratio, smax);
    s.push_back(v);
  }
  return s;
}

}  // namespace fracmap::quad
