#include "fracmap/energy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "fracmap/quadrature.hpp"

namespace fracmap {

namespace {

constexpr double kPi = std::numbers::pi;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double dist2(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int k = 0; k < n; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

/// Riesz pair weight h^{2n} / |xi-xj|^{n+1}.
inline double pair_weight(double d2, int n, double h2n) {
  switch (n) {
    case 1: return h2n / d2;
    case 2: return h2n / (d2 * std::sqrt(d2));
    case 3: return h2n / (d2 * d2);
    default: return h2n / std::pow(d2, 0.5 * (n + 1));
  }
}

/// Flattened geometry of a field's grid box: node coordinates, the Omega
/// mask, flag mask, and the cell-covered box.
struct BoxGeom {
  int n = 0, d = 0;
  std::int64_t total = 0;
  std::vector<double> coords;       // total*n
  std::vector<std::uint8_t> inside; // Omega membership
  std::vector<std::uint8_t> flag;
  std::vector<std::int64_t> omega;  // indices inside Omega
  double cell_lo[4], cell_hi[4];
  double h = 0.0;

  BoxGeom(const VectorField& u, const Ball* omega_ball) {
    const GridSpec& g = u.spec;
    n = g.n;
    d = g.d;
    h = g.h;
    total = g.total();
    coords.resize(static_cast<std::size_t>(total) * n);
    inside.assign(total, 0);
    flag.assign(total, 0);
    for (int a = 0; a < n; ++a) {
      cell_lo[a] = g.lo(a) - 0.5 * g.h;
      cell_hi[a] = g.hi(a) + 0.5 * g.h;
    }
    std::vector<double> x(n);
    for (std::int64_t i = 0; i < total; ++i) {
      g.node(i, {x.data(), static_cast<std::size_t>(n)});
      for (int a = 0; a < n; ++a) coords[i * n + a] = x[a];
      if (omega_ball && omega_ball->contains(x)) {
        inside[i] = 1;
        omega.push_back(i);
      }
    }
    for (std::int64_t f : u.flagged)
      if (f >= 0 && f < total) flag[f] = 1;
  }

  double boundary_gap(const double* x) const {
    double gap = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a) {
      gap = std::min(gap, x[a] - cell_lo[a]);
      gap = std::min(gap, cell_hi[a] - x[a]);
    }
    return gap;
  }

  bool in_cell_box(const double* x) const {
    for (int a = 0; a < n; ++a)
      if (x[a] < cell_lo[a] || x[a] > cell_hi[a]) return false;
    return true;
  }
};

/// Beyond-grid aggregates of the Riesz kernel against the exterior data:
/// W = int K, G = int K u_ext, S = int K |u_ext|^2 over R^n \ cell box,
/// all relative to the source point x.
struct ExtAggregate {
  double W = 0.0;
  double G[4] = {0, 0, 0, 0};
  double S = 0.0;
};

ExtAggregate exterior_aggregate(const BoxGeom& geom, const Exterior& ext,
                                const double* x, const EnergyOptions& opts) {
  ExtAggregate agg;
  const int n = geom.n, d = geom.d;
  if (ext.kind == Exterior::Kind::None) return agg;  // truncated at the box
  if (n == 1) {
    const double Yl = std::max(x[0] - geom.cell_lo[0], 1e-300);
    const double Yr = std::max(geom.cell_hi[0] - x[0], 1e-300);
    agg.W = 1.0 / Yl + 1.0 / Yr;
    switch (ext.kind) {
      case Exterior::Kind::Constant: {
        for (int k = 0; k < d; ++k) agg.G[k] = ext.constant[k] * agg.W;
        agg.S = dot(ext.constant, ext.constant) * agg.W;
        return agg;
      }
      case Exterior::Kind::Wave: {
        // u_ext(y) = (cos y, sin y); tails via the contour form of
        // int e^{is}/s^2. A pulled-back wave (offset + scale*y) keeps the
        // same structure with rescaled frequency; only the identity map is
        // supported here.
        if (!ext.offset.empty() || ext.scale != 1.0)
          throw std::invalid_argument("energy tails: pulled-back wave exterior not supported");
        const std::complex<double> T =
            std::exp(std::complex<double>(0.0, x[0])) *
            (quad::exp_tail_invsq(Yr) + std::conj(quad::exp_tail_invsq(Yl)));
        agg.G[0] = T.real();
        agg.G[1] = T.imag();
        agg.S = agg.W;  // |u_ext| = 1
        return agg;
      }
      default:
        throw std::invalid_argument("energy tails: unsupported exterior for n = 1");
    }
  }

  // n >= 2: geometric shells around x starting at the box gap; wedges that
  // land back inside the cell box are dropped (those cells are covered by the
  // node-pair sums).
  if (n != 2)
    throw std::invalid_argument("energy tails: ring quadrature implemented for n <= 2");
  if (ext.kind == Exterior::Kind::Wave)
    throw std::invalid_argument("energy tails: wave exterior is 1-dimensional");
  const double Y = std::max(geom.boundary_gap(x), 0.5 * geom.h);
  const double R = std::max(opts.far_radius, 4.0 * Y);
  const auto fence = quad::geometric_shells(Y, R, opts.ring_ratio);
  const double sigma = quad::sphere_measure(n);
  std::vector<double> y(n), val(d);
  for (std::size_t j = 0; j + 1 < fence.size(); ++j) {
    const double s1 = fence[j], s2 = fence[j + 1];
    const double radial = quad::riesz_radial(s1, s2);
    const double sc = std::log(s2 / s1) / radial;  // kernel-mass centroid
    const int A = std::clamp(
        static_cast<int>(std::ceil(2.0 * kPi * sc / std::max(geom.h, sc / 10.0))),
        8, 64);
    const double wedge = sigma * radial / A;
    for (int a = 0; a < A; ++a) {
      const double phi = (a + 0.5) * 2.0 * kPi / A;
      y[0] = x[0] + sc * std::cos(phi);
      y[1] = x[1] + sc * std::sin(phi);
      if (geom.in_cell_box(y.data())) continue;
      ext.eval(y, val);
      agg.W += wedge;
      for (int k = 0; k < d; ++k) agg.G[k] += wedge * val[k];
      agg.S += wedge * dot(val, val);
    }
  }
  // analytic remainder beyond R
  const double Wfar = quad::sphere_measure(n) / R;
  switch (ext.kind) {
    case Exterior::Kind::Constant:
      agg.W += Wfar;
      for (int k = 0; k < d; ++k) agg.G[k] += ext.constant[k] * Wfar;
      agg.S += dot(ext.constant, ext.constant) * Wfar;
      break;
    case Exterior::Kind::Vortex: {
      // ring averages of y/|y| approach x/(2s); |u_ext| = 1
      agg.W += Wfar;
      const double gfar = kPi / (2.0 * R * R);
      for (int k = 0; k < std::min(n, d); ++k) agg.G[k] += gfar * x[k];
      agg.S += Wfar;
      break;
    }
    default:
      agg.W += Wfar;
      agg.S += Wfar;  // sphere-valued named exteriors
      break;
  }
  return agg;
}

double lipschitz_table_entry(const std::vector<double>& grad, std::int64_t i,
                             int nd) {
  double s = 0.0;
  const double* D = grad.data() + i * nd;
  for (int k = 0; k < nd; ++k) s += D[k] * D[k];
  return std::sqrt(s);
}

void check_omega(const VectorField& u, const Ball& omega) {
  if (static_cast<int>(omega.center.size()) != u.spec.n)
    throw std::invalid_argument("omega: dimension mismatch");
  if (!(omega.radius > 0.0))
    throw std::invalid_argument("omega: radius must be > 0");
  for (int a = 0; a < u.spec.n; ++a) {
    const double lo = u.spec.lo(a) - 0.5 * u.spec.h;
    const double hi = u.spec.hi(a) + 0.5 * u.spec.h;
    if (omega.center[a] - omega.radius < lo - 1e-12 ||
        omega.center[a] + omega.radius > hi + 1e-12)
      throw std::invalid_argument("omega: ball must lie inside the grid box");
  }
}

}  // namespace

double gamma_n(int n) {
  if (n < 1) throw std::invalid_argument("gamma_n: n must be >= 1");
  return std::pow(kPi, -0.5 * (n + 1)) * std::tgamma(0.5 * (n + 1));
}

EnergyReport half_energy(const VectorField& u, const Ball& omega,
                         const EnergyOptions& opts) {
  u.validate();
  check_omega(u, omega);
  const GridSpec& g = u.spec;
  const int n = g.n, d = g.d;
  const double gamma = gamma_n(n);
  const double h2n = std::pow(g.h, 2 * n);

  BoxGeom geom(u, &omega);
  if (geom.omega.empty()) return {};

  const bool have_ext = u.exterior.analytic();
  if (!have_ext) {
    // exterior tail undefined unless Omega covers the whole grid box
    bool covers = true;
    std::vector<double> corner(n);
    for (int c = 0; c < (1 << n) && covers; ++c) {
      for (int a = 0; a < n; ++a)
        corner[a] = ((c >> a) & 1) ? geom.cell_hi[a] : geom.cell_lo[a];
      double s = 0.0;
      for (int a = 0; a < n; ++a) {
        const double t = corner[a] - omega.center[a];
        s += t * t;
      }
      covers = s < omega.radius * omega.radius;
    }
    if (!covers)
      throw std::domain_error("half_energy: exterior is none and Omega does not cover the grid");
  }

  const auto grad = gradient(u);
  const int nd = n * d;
  const std::int64_t m = static_cast<std::int64_t>(geom.omega.size());
  const double* C = geom.coords.data();
  const double* V = u.values.data();

  // interior-interior: unordered pairs within Omega, doubled
  double interior_pairs = 2.0 * par::reduce_sum(m, opts.mode, [&](std::int64_t a) {
    const std::int64_t i = geom.omega[a];
    if (geom.flag[i]) return 0.0;
    const double* xi = C + i * n;
    const double* vi = V + i * d;
    double acc = 0.0;
    for (std::int64_t b = a + 1; b < m; ++b) {
      const std::int64_t j = geom.omega[b];
      if (geom.flag[j]) continue;
      const double* xj = C + j * n;
      const double* vj = V + j * d;
      double du2 = 0.0;
      for (int k = 0; k < d; ++k) {
        const double t = vi[k] - vj[k];
        du2 += t * t;
      }
      acc += pair_weight(dist2(xi, xj, n), n, h2n) * du2;
    }
    return acc;
  });

  // diagonal cells: |u(x)-u(y)| <= Lip |x-y| and the kernel integrates in
  // closed form over the cell pair
  std::int64_t skipped = 0;
  double diag = 0.0;
  const bool have_diag = (n <= 2);
  for (std::int64_t a = 0; a < m; ++a) {
    const std::int64_t i = geom.omega[a];
    if (geom.flag[i]) {
      ++skipped;
      continue;
    }
    if (!have_diag) {
      ++skipped;
      continue;
    }
    const double lip = lipschitz_table_entry(grad, i, nd);
    diag += lip * lip * quad::diag_cell_constant(n) * std::pow(g.h, n + 1);
  }

  // interior x grid-exterior
  double cross = par::reduce_sum(m, opts.mode, [&](std::int64_t a) {
    const std::int64_t i = geom.omega[a];
    if (geom.flag[i]) return 0.0;
    const double* xi = C + i * n;
    const double* vi = V + i * d;
    double acc = 0.0;
    for (std::int64_t j = 0; j < geom.total; ++j) {
      if (geom.inside[j] || geom.flag[j]) continue;
      const double* xj = C + j * n;
      const double* vj = V + j * d;
      double du2 = 0.0;
      for (int k = 0; k < d; ++k) {
        const double t = vi[k] - vj[k];
        du2 += t * t;
      }
      acc += pair_weight(dist2(xi, xj, n), n, h2n) * du2;
    }
    return acc;
  });

  // interior x beyond-grid tail
  double tail = 0.0;
  if (have_ext) {
    tail = par::reduce_sum(m, opts.mode, [&](std::int64_t a) {
      const std::int64_t i = geom.omega[a];
      if (geom.flag[i]) return 0.0;
      const double* xi = C + i * n;
      const double* vi = V + i * d;
      const ExtAggregate agg =
          exterior_aggregate(geom, u.exterior, xi, opts);
      double ui2 = 0.0, uig = 0.0;
      for (int k = 0; k < d; ++k) {
        ui2 += vi[k] * vi[k];
        uig += vi[k] * agg.G[k];
      }
      return (agg.W * ui2 - 2.0 * uig + agg.S) * std::pow(g.h, n);
    });
  }

  EnergyReport rep;
  rep.interior = 0.25 * gamma * (interior_pairs + diag);
  rep.exterior = 0.5 * gamma * (cross + tail);
  rep.value = rep.interior + rep.exterior;
  rep.skipped_cells = skipped;
  return rep;
}

double h_half_seminorm(const VectorField& u, const Ball& omega,
                       const EnergyOptions& opts) {
  u.validate();
  check_omega(u, omega);
  const GridSpec& g = u.spec;
  const int n = g.n, d = g.d;
  const double h2n = std::pow(g.h, 2 * n);
  BoxGeom geom(u, &omega);
  const std::int64_t m = static_cast<std::int64_t>(geom.omega.size());
  if (m == 0) return 0.0;
  const auto grad = gradient(u);
  const double* C = geom.coords.data();
  const double* V = u.values.data();

  double pairs = 2.0 * par::reduce_sum(m, opts.mode, [&](std::int64_t a) {
    const std::int64_t i = geom.omega[a];
    if (geom.flag[i]) return 0.0;
    const double* xi = C + i * n;
    const double* vi = V + i * d;
    double acc = 0.0;
    for (std::int64_t b = a + 1; b < m; ++b) {
      const std::int64_t j = geom.omega[b];
      if (geom.flag[j]) continue;
      double du2 = 0.0;
      const double* vj = V + j * d;
      for (int k = 0; k < d; ++k) {
        const double t = vi[k] - vj[k];
        du2 += t * t;
      }
      acc += pair_weight(dist2(xi, C + j * n, n), n, h2n) * du2;
    }
    return acc;
  });
  double diag = 0.0;
  if (n <= 2) {
    for (std::int64_t a = 0; a < m; ++a) {
      const std::int64_t i = geom.omega[a];
      if (geom.flag[i]) continue;
      const double lip = lipschitz_table_entry(grad, i, n * d);
      diag += lip * lip * quad::diag_cell_constant(n) * std::pow(g.h, n + 1);
    }
  }
  const double sq = 0.5 * gamma_n(n) * (pairs + diag);
  return std::sqrt(std::max(0.0, sq));
}

double fractional_pairing(const VectorField& u, const VectorField& phi,
                          const Ball& omega, const EnergyOptions& opts) {
  u.validate();
  phi.validate();
  check_omega(u, omega);
  if (phi.spec.total() != u.spec.total() || phi.spec.d != u.spec.d)
    throw std::invalid_argument("fractional_pairing: phi grid mismatch");
  const GridSpec& g = u.spec;
  const int n = g.n, d = g.d;
  const double h2n = std::pow(g.h, 2 * n);
  BoxGeom geom(u, &omega);
  const std::int64_t m = static_cast<std::int64_t>(geom.omega.size());
  const double* C = geom.coords.data();
  const double* V = u.values.data();
  const double* P = phi.values.data();

  // precondition: phi vanishes outside Omega
  for (std::int64_t j = 0; j < geom.total; ++j) {
    if (geom.inside[j]) continue;
    for (int k = 0; k < d; ++k)
      if (std::abs(P[j * d + k]) > 1e-13)
        throw std::invalid_argument("fractional_pairing: phi must vanish outside Omega");
  }

  double sum = par::reduce_sum(m, opts.mode, [&](std::int64_t a) {
    const std::int64_t i = geom.omega[a];
    const double* xi = C + i * n;
    const double* vi = V + i * d;
    const double* pi = P + i * d;
    double acc = 0.0;
    // ordered pairs (i, j in Omega) counted once here with factor 2 below
    for (std::int64_t b = a + 1; b < m; ++b) {
      const std::int64_t j = geom.omega[b];
      const double* vj = V + j * d;
      const double* pj = P + j * d;
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += (vi[k] - vj[k]) * (pi[k] - pj[k]);
      acc += pair_weight(dist2(xi, C + j * n, n), n, h2n) * s;
    }
    // Omega x (box minus Omega), both orders
    for (std::int64_t j = 0; j < geom.total; ++j) {
      if (geom.inside[j]) continue;
      const double* vj = V + j * d;
      const double* pj = P + j * d;
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += (vi[k] - vj[k]) * (pi[k] - pj[k]);
      acc += pair_weight(dist2(xi, C + j * n, n), n, h2n) * s;
    }
    return acc;
  });
  sum *= 2.0;

  // beyond-grid: phi = 0 there, leaving phi(x) . (W u(x) - G)
  double tail = 0.0;
  if (u.exterior.analytic()) {
    tail = 2.0 * par::reduce_sum(m, opts.mode, [&](std::int64_t a) {
      const std::int64_t i = geom.omega[a];
      const ExtAggregate agg =
          exterior_aggregate(geom, u.exterior, C + i * n, opts);
      const double* vi = V + i * d;
      const double* pi = P + i * d;
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += pi[k] * (agg.W * vi[k] - agg.G[k]);
      return s * std::pow(g.h, n);
    });
  }
  return 0.5 * gamma_n(n) * (sum + tail);
}

double ResidualField::max() const {
  double v = 0.0;
  for (double r : residual) v = std::max(v, r);
  return v;
}

double ResidualField::median() const {
  if (residual.empty()) return 0.0;
  std::vector<double> s = residual;
  std::nth_element(s.begin(), s.begin() + s.size() / 2, s.end());
  return s[s.size() / 2];
}

ResidualField sphere_el_residual(const VectorField& u, const Ball& omega,
                                 const EnergyOptions& opts) {
  u.validate();
  check_omega(u, omega);
  const GridSpec& g = u.spec;
  const int n = g.n, d = g.d;
  const double gamma = gamma_n(n);
  const double hn = std::pow(g.h, n);
  BoxGeom geom(u, &omega);
  const std::int64_t m = static_cast<std::int64_t>(geom.omega.size());
  const double* C = geom.coords.data();
  const double* V = u.values.data();

  ResidualField out;
  out.nodes.reserve(m);
  for (std::int64_t a = 0; a < m; ++a)
    if (!geom.flag[geom.omega[a]]) out.nodes.push_back(geom.omega[a]);
  out.residual.assign(out.nodes.size(), 0.0);

  par::for_each(static_cast<std::int64_t>(out.nodes.size()), opts.mode,
                [&](std::int64_t a) {
    const std::int64_t i = out.nodes[a];
    const double* xi = C + i * n;
    const double* vi = V + i * d;
    double L[4] = {0, 0, 0, 0};
    double lam = 0.0;
    for (std::int64_t j = 0; j < geom.total; ++j) {
      if (j == i || geom.flag[j]) continue;
      const double w = pair_weight(dist2(xi, C + j * n, n), n, hn);
      const double* vj = V + j * d;
      double du2 = 0.0;
      for (int k = 0; k < d; ++k) {
        const double t = vi[k] - vj[k];
        L[k] += w * t;
        du2 += t * t;
      }
      lam += w * du2;
    }
    if (u.exterior.analytic()) {
      const ExtAggregate agg = exterior_aggregate(geom, u.exterior, xi, opts);
      double ui2 = 0.0, uig = 0.0;
      for (int k = 0; k < d; ++k) {
        L[k] += agg.W * vi[k] - agg.G[k];
        ui2 += vi[k] * vi[k];
        uig += vi[k] * agg.G[k];
      }
      lam += agg.W * ui2 - 2.0 * uig + agg.S;
    }
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const double t = gamma * L[k] - 0.5 * gamma * lam * vi[k];
      r2 += t * t;
    }
    out.residual[a] = std::sqrt(r2);
  });
  return out;
}

// ---------------------------------------------------------------------------
// minimize

namespace {

struct DescentWork {
  const BoxGeom* geom;
  const GridSpec* g;
  int n, d;
  double gamma, h2n, hn;
  std::vector<double> extW;           // per interior node
  std::vector<double> extG;           // per interior node, d
  std::vector<double> extS;

  double energy(const std::vector<double>& vals, Exec mode) const {
    const std::int64_t m = static_cast<std::int64_t>(geom->omega.size());
    const double* C = geom->coords.data();
    const double* V = vals.data();
    double pairs = 2.0 * par::reduce_sum(m, mode, [&](std::int64_t a) {
      const std::int64_t i = geom->omega[a];
      const double* xi = C + i * n;
      const double* vi = V + i * d;
      double acc = 0.0;
      for (std::int64_t b = a + 1; b < m; ++b) {
        const std::int64_t j = geom->omega[b];
        double du2 = 0.0;
        const double* vj = V + j * d;
        for (int k = 0; k < d; ++k) {
          const double t = vi[k] - vj[k];
          du2 += t * t;
        }
        acc += pair_weight(dist2(xi, C + j * n, n), n, h2n) * du2;
      }
      return acc;
    });
    double cross = par::reduce_sum(m, mode, [&](std::int64_t a) {
      const std::int64_t i = geom->omega[a];
      const double* xi = C + i * n;
      const double* vi = V + i * d;
      double acc = 0.0;
      for (std::int64_t j = 0; j < geom->total; ++j) {
        if (geom->inside[j]) continue;
        double du2 = 0.0;
        const double* vj = V + j * d;
        for (int k = 0; k < d; ++k) {
          const double t = vi[k] - vj[k];
          du2 += t * t;
        }
        acc += pair_weight(dist2(xi, C + j * n, n), n, h2n) * du2;
      }
      double vi2 = 0.0, vig = 0.0;
      for (int k = 0; k < d; ++k) {
        vi2 += vi[k] * vi[k];
        vig += vi[k] * extG[a * d + k];
      }
      acc += (extW[a] * vi2 - 2.0 * vig + extS[a]) * hn;
      return acc;
    });
    return 0.25 * gamma * pairs + 0.5 * gamma * cross;
  }

  /// Euclidean gradient wrt interior values; returns sum of squared
  /// tangential components.
  double grad(const std::vector<double>& vals, std::vector<double>& gout,
              Exec mode) const {
    const std::int64_t m = static_cast<std::int64_t>(geom->omega.size());
    const double* C = geom->coords.data();
    const double* V = vals.data();
    gout.assign(static_cast<std::size_t>(m) * d, 0.0);
    par::for_each(m, mode, [&](std::int64_t a) {
      const std::int64_t i = geom->omega[a];
      const double* xi = C + i * n;
      const double* vi = V + i * d;
      double acc[4] = {0, 0, 0, 0};
      for (std::int64_t j = 0; j < geom->total; ++j) {
        if (j == i) continue;
        const double w = pair_weight(dist2(xi, C + j * n, n), n, h2n);
        const double* vj = V + j * d;
        for (int k = 0; k < d; ++k) acc[k] += w * (vi[k] - vj[k]);
      }
      for (int k = 0; k < d; ++k)
        gout[a * d + k] =
            gamma * (acc[k] + hn * (extW[a] * vi[k] - extG[a * d + k]));
    });
    double t2 = 0.0;
    for (std::int64_t a = 0; a < m; ++a) {
      const std::int64_t i = geom->omega[a];
      const double* vi = V + i * d;
      double dotvg = 0.0, vi2 = 0.0;
      for (int k = 0; k < d; ++k) {
        dotvg += vi[k] * gout[a * d + k];
        vi2 += vi[k] * vi[k];
      }
      for (int k = 0; k < d; ++k) {
        const double tg = gout[a * d + k] - dotvg / std::max(vi2, 1e-30) * vi[k];
        t2 += tg * tg;
      }
    }
    return t2;
  }
};

}  // namespace

MinimizeResult minimize(const VectorField& u0, const Ball& omega,
                        const MinimizeOptions& opts) {
  u0.validate();
  check_omega(u0, omega);
  if (!(opts.step > 0.0) || opts.step > 1.0)
    throw std::invalid_argument("minimize: step size must be in (0, 1]");
  if (opts.r_ext > 0.0 && opts.r_ext < 2.0 * omega.radius)
    throw std::invalid_argument("minimize: R_ext must be >= 2 * domain radius");
  const GridSpec& g = u0.spec;
  const int n = g.n, d = g.d;

  MinimizeResult res;
  res.field = u0;
  BoxGeom geom(u0, &omega);
  const std::int64_t m = static_cast<std::int64_t>(geom.omega.size());
  if (m == 0) return res;

  DescentWork work;
  work.geom = &geom;
  work.g = &g;
  work.n = n;
  work.d = d;
  work.gamma = gamma_n(n);
  work.h2n = std::pow(g.h, 2 * n);
  work.hn = std::pow(g.h, n);
  work.extW.assign(m, 0.0);
  work.extG.assign(static_cast<std::size_t>(m) * d, 0.0);
  work.extS.assign(m, 0.0);
  EnergyOptions eopts;
  eopts.mode = opts.mode;
  if (opts.r_ext > 0.0) eopts.far_radius = opts.r_ext;
  if (u0.exterior.analytic()) {
    par::for_each(m, opts.mode, [&](std::int64_t a) {
      const ExtAggregate agg = exterior_aggregate(
          geom, u0.exterior, geom.coords.data() + geom.omega[a] * n, eopts);
      work.extW[a] = agg.W;
      for (int k = 0; k < d; ++k) work.extG[a * d + k] = agg.G[k];
      work.extS[a] = agg.S;
    });
  }

  SphereTarget target{d};
  std::vector<double>& vals = res.field.values;
  // normalize the free nodes onto the sphere
  for (std::int64_t a = 0; a < m; ++a) {
    const std::int64_t i = geom.omega[a];
    target.project(res.field.at(i), res.field.at(i));
  }

  std::vector<double> gvec;
  std::vector<double> trial = vals;
  double energy = work.energy(vals, opts.mode);
  double tau = opts.step;
  double t2 = work.grad(vals, gvec, opts.mode);
  res.log.push_back({0, energy, tau, std::sqrt(t2)});

  for (int it = 1; it <= opts.max_iterations; ++it) {
    if (t2 <= 1e-28) break;  // stationary
    bool accepted = false;
    while (tau >= 1e-12) {
      trial = vals;
      bool ok = true;
      for (std::int64_t a = 0; a < m && ok; ++a) {
        const std::int64_t i = geom.omega[a];
        double nrm2 = 0.0;
        for (int k = 0; k < d; ++k) {
          const double t = vals[i * d + k] - tau * gvec[a * d + k];
          trial[i * d + k] = t;
          nrm2 += t * t;
        }
        if (nrm2 < 1e-30) {
          ok = false;
          break;
        }
        const double inv = 1.0 / std::sqrt(nrm2);
        for (int k = 0; k < d; ++k) trial[i * d + k] *= inv;
      }
      const double trial_energy =
          ok ? work.energy(trial, opts.mode)
             : std::numeric_limits<double>::infinity();
      if (trial_energy <= energy - 1e-4 * tau * t2) {
        vals.swap(trial);
        energy = trial_energy;
        accepted = true;
        break;
      }
      tau *= 0.5;
    }
    if (!accepted) {
      res.stagnated = true;
      break;
    }
    ++res.accepted_steps;
    t2 = work.grad(vals, gvec, opts.mode);
    res.log.push_back({it, energy, tau, std::sqrt(t2)});
    const double prev = res.log[res.log.size() - 2].energy;
    if (prev - energy <= opts.energy_tol * std::max(1.0, std::abs(energy)))
      break;
    tau = std::min(opts.step, tau * 1.5);
  }
  return res;
}

WeakHarmonicReport weak_harmonic_test(const VectorField& u, const Ball& omega,
                                      int trials, double tol,
                                      std::uint64_t seed,
                                      const EnergyOptions& opts) {
  u.validate();
  check_omega(u, omega);
  const GridSpec& g = u.spec;
  const int n = g.n, d = g.d;
  SphereTarget target{d};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  WeakHarmonicReport rep;
  rep.trials = trials;
  rep.tolerance = tol;
  std::vector<double> x(n);
  for (int t = 0; t < trials; ++t) {
    // random bump: center p in Omega, radius keeping the support inside
    std::vector<double> p(n);
    double pr = 0.0;
    for (int a = 0; a < n; ++a) {
      p[a] = omega.center[a] + (2.0 * unif(rng) - 1.0) * 0.4 * omega.radius;
    }
    pr = (0.2 + 0.3 * unif(rng)) * omega.radius;
    std::vector<double> dir(d);
    double dn = 0.0;
    for (int k = 0; k < d; ++k) {
      dir[k] = gauss(rng);
      dn += dir[k] * dir[k];
    }
    dn = std::sqrt(std::max(dn, 1e-30));
    for (int k = 0; k < d; ++k) dir[k] /= dn;

    VectorField phi;
    phi.spec = g;
    phi.values.assign(static_cast<std::size_t>(g.total()) * d, 0.0);
    double norm2 = 0.0;
    for (std::int64_t i = 0; i < g.total(); ++i) {
      g.node(i, x);
      double s = 0.0;
      for (int a = 0; a < n; ++a) {
        const double tdx = (x[a] - p[a]) / pr;
        s += tdx * tdx;
      }
      if (s >= 1.0) continue;
      const double bump = std::exp(-1.0 / (1.0 - s));
      double w[4];
      for (int k = 0; k < d; ++k) w[k] = bump * dir[k];
      target.tangent_project(u.at(i), {w, static_cast<std::size_t>(d)},
                             phi.at(i));
      for (int k = 0; k < d; ++k) norm2 += phi.at(i)[k] * phi.at(i)[k];
    }
    norm2 *= std::pow(g.h, n);
    if (norm2 < 1e-24) continue;
    const double pairing = fractional_pairing(u, phi, omega, opts);
    rep.max_ratio = std::max(rep.max_ratio, std::abs(pairing) / std::sqrt(norm2));
  }
  rep.pass = rep.max_ratio <= tol;
  return rep;
}

}  // namespace fracmap
