#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fracmap/energy.hpp"
#include "fracmap/quadrature.hpp"

using namespace fracmap;

namespace {
constexpr double kPi = std::numbers::pi;

// plain midpoint oracle for 1d integrals
template <class F>
double midpoint(F&& f, double a, double b, int steps) {
  double s = 0.0;
  const double h = (b - a) / steps;
  for (int i = 0; i < steps; ++i) s += f(a + (i + 0.5) * h) * h;
  return s;
}
}  // namespace

TEST_CASE("gamma_n matches the Gamma-function formula") {
  // oracle values: pi^{-(n+1)/2} Gamma((n+1)/2) at high precision
  CHECK(gamma_n(1) == doctest::Approx(0.31830988618379067).epsilon(1e-15));
  CHECK(gamma_n(2) == doctest::Approx(0.15915494309189534).epsilon(1e-15));
  CHECK(gamma_n(3) == doctest::Approx(0.10132118364233777).epsilon(1e-15));
}

TEST_CASE("poisson radial cdf: total mass and midpoint cross-check") {
  for (int n = 1; n <= 3; ++n) {
    CHECK(quad::poisson_radial_cdf(1e9, 0.3, n) == doctest::Approx(1.0).epsilon(1e-8));
  }
  // n = 2 against a direct radial midpoint quadrature
  const double z = 0.37, s = 0.9;
  const double direct = midpoint(
      [&](double t) {
        return 2.0 * kPi * gamma_n(2) * z * t / std::pow(t * t + z * z, 1.5);
      },
      0.0, s, 20000);
  CHECK(quad::poisson_radial_cdf(s, z, 2) == doctest::Approx(direct).epsilon(1e-7));
}

TEST_CASE("interval mass and moment against midpoint quadrature") {
  const double z = 0.21, A = -0.4, B = 0.7;
  const double mass = midpoint(
      [&](double w) { return (1.0 / kPi) * z / (w * w + z * z); }, A, B, 200000);
  const double mom = midpoint(
      [&](double w) { return (1.0 / kPi) * z * w / (w * w + z * z); }, A, B,
      200000);
  CHECK(quad::poisson_mass_interval(A, B, z) == doctest::Approx(mass).epsilon(1e-9));
  CHECK(quad::poisson_moment_interval(A, B, z) == doctest::Approx(mom).epsilon(1e-7));
}

TEST_CASE("rectangle mass against a 2d midpoint quadrature") {
  const double z = 0.17;
  double direct = 0.0;
  const int N = 400;
  const double u1 = -0.3, u2 = 0.4, v1 = 0.2, v2 = 0.9;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const double u = u1 + (i + 0.5) * (u2 - u1) / N;
      const double v = v1 + (j + 0.5) * (v2 - v1) / N;
      direct += z / std::pow(u * u + v * v + z * z, 1.5) *
                ((u2 - u1) / N) * ((v2 - v1) / N);
    }
  direct /= 2.0 * kPi;
  CHECK(quad::poisson_mass_rect(u1, u2, v1, v2, z) ==
        doctest::Approx(direct).epsilon(1e-6));
}

TEST_CASE("oscillatory tails match brute-force partial sums") {
  // int_Y^inf cos(s)/(s^2+z^2) ds via many periods of midpoint quadrature
  const double Y = 3.7, z = 0.31;
  double direct = 0.0;
  {
    const double end = Y + 4000.0 * kPi;  // envelope 1/s^2 is summable
    direct = midpoint(
        [&](double s) { return std::cos(s) / (s * s + z * z); }, Y, end,
        4000000);
  }
  CHECK(quad::exp_tail_poisson(Y, z).real() ==
        doctest::Approx(direct).epsilon(1e-5));

  const double direct2 = midpoint(
      [&](double s) { return std::cos(s) / (s * s); }, 2.2, 2.2 + 4000.0 * kPi,
      4000000);
  CHECK(quad::exp_tail_invsq(2.2).real() == doctest::Approx(direct2).epsilon(1e-5));
}

TEST_CASE("diagonal cell constant: unit-square mean inverse distance") {
  // oracle: the square line-picking density f(r) = 2r(r^2-4r+pi) on [0,1],
  // 2r(4 sqrt(r^2-1) - (r^2+2-pi) - 4 atan(sqrt(r^2-1))) on [1, sqrt(2)];
  // E[1/r] = int f(r)/r dr
  auto f = [](double r) {
    if (r <= 1.0) return 2.0 * r * (r * r - 4.0 * r + kPi);
    const double s = std::sqrt(r * r - 1.0);
    return 2.0 * r * (4.0 * s - (r * r + 2.0 - kPi) - 4.0 * std::atan(s));
  };
  const double norm = midpoint(f, 0.0, std::sqrt(2.0), 400000);
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-9));
  const double mean_inv =
      midpoint([&](double r) { return f(r) / r; }, 1e-9, std::sqrt(2.0), 400000);
  CHECK(quad::diag_cell_constant(2) == doctest::Approx(mean_inv).epsilon(1e-6));
  CHECK(quad::diag_cell_constant(1) == 1.0);
  CHECK_THROWS_AS(quad::diag_cell_constant(3), std::invalid_argument);
}
