#include "fracmap/extension.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fracmap/energy.hpp"
#include "fracmap/quadrature.hpp"

namespace fracmap {

namespace {

constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Poisson extension, n = 1: exact interval weights against the P1
// reconstruction of the node data, contour tails for the wave exterior.

void extend_point_1d(const VectorField& u, double x, double z,
                     std::span<double> out) {
  const GridSpec& g = u.spec;
  const int d = g.d;
  const int N = g.counts[0];
  const double lo = g.lo(0), hi = g.hi(0);
  double mass = 0.0;
  std::vector<double> val(d, 0.0);

  // interior: per interval [y_j, y_{j+1}], exact zeroth and first kernel
  // moments against the linear interpolant
  for (int j = 0; j + 1 < N; ++j) {
    const double ya = g.coord(0, j);
    const double A = ya - x, B = A + g.h;
    const double m0 = quad::poisson_mass_interval(A, B, z);
    const double m1 = quad::poisson_moment_interval(A, B, z) - A * m0;
    const double* va = u.values.data() + static_cast<std::int64_t>(j) * d;
    const double* vb = va + d;
    const double t = m1 / g.h;  // weight transferred to the right node
    for (int k = 0; k < d; ++k) val[k] += (m0 - t) * va[k] + t * vb[k];
    mass += m0;
  }

  // exterior rays
  const double Yl = x - lo, Yr = hi - x;
  if (Yl < 0 || Yr < 0)
    throw std::invalid_argument("poisson_extend: evaluation point outside boundary grid");
  const double ml = 0.5 - std::atan(Yl / z) / kPi;
  const double mr = 0.5 - std::atan(Yr / z) / kPi;
  switch (u.exterior.kind) {
    case Exterior::Kind::Constant:
      for (int k = 0; k < d; ++k)
        val[k] += (ml + mr) * u.exterior.constant[k];
      break;
    case Exterior::Kind::Wave: {
      if (!u.exterior.offset.empty() || u.exterior.scale != 1.0)
        throw std::invalid_argument("poisson_extend: pulled-back wave exterior not supported");
      const std::complex<double> T =
          (z / kPi) * std::exp(std::complex<double>(0.0, x)) *
          (quad::exp_tail_poisson(Yr, z) +
           std::conj(quad::exp_tail_poisson(Yl, z)));
      val[0] += T.real();
      val[1] += T.imag();
      break;
    }
    case Exterior::Kind::None:
      throw std::domain_error("poisson_extend: exterior descriptor required");
    default:
      throw std::invalid_argument("poisson_extend: unsupported exterior for n = 1");
  }
  mass += ml + mr;

  for (int k = 0; k < d; ++k) out[k] = val[k] / mass;
}

// ---------------------------------------------------------------------------
// Poisson extension, n = 2: kernel-adapted radial shells with exact masses,
// field sampled by interpolation inside the box and by the descriptor
// outside; analytic remainder beyond the far radius.

void extend_point_2d(const VectorField& u, const double* x, double z,
                     const ExtendOptions& opts, std::span<double> out) {
  const GridSpec& g = u.spec;
  const int d = g.d;
  if (u.exterior.kind == Exterior::Kind::None)
    throw std::domain_error("poisson_extend: exterior descriptor required");

  double mass = 0.0;
  double val[4] = {0, 0, 0, 0};

  // innermost disk: value frozen at the center
  const double s1 = std::max(0.5 * g.h, 0.25 * z);
  {
    const double m = quad::poisson_radial_cdf(s1, z, 2);
    double v[4];
    u.value_at({x, 2}, {v, static_cast<std::size_t>(d)});
    for (int k = 0; k < d; ++k) val[k] += m * v[k];
    mass += m;
  }

  // shells
  double y[2], v[4];
  double s_lo = s1;
  double cdf_lo = quad::poisson_radial_cdf(s_lo, z, 2);
  while (s_lo < opts.far_radius && 1.0 - cdf_lo > opts.tail_tol) {
    const double s_hi = std::min(s_lo * opts.shell_ratio, opts.far_radius);
    const double cdf_hi = quad::poisson_radial_cdf(s_hi, z, 2);
    const double m_shell = cdf_hi - cdf_lo;
    if (m_shell > 0.0) {
      // radius at the shell's kernel-mass median
      const double cmid = 0.5 * (cdf_lo + cdf_hi);
      const double sc = (cmid < 1.0)
                            ? std::sqrt(std::max(0.0, z * z / ((1.0 - cmid) * (1.0 - cmid)) - z * z))
                            : std::sqrt(s_lo * s_hi);
      const int A = std::clamp(
          static_cast<int>(std::ceil(2.0 * kPi * sc / std::max(g.h, sc / 12.0))),
          8, opts.max_angles);
      const double wedge = m_shell / A;
      for (int a = 0; a < A; ++a) {
        const double phi = (a + 0.5) * 2.0 * kPi / A;
        y[0] = x[0] + sc * std::cos(phi);
        y[1] = x[1] + sc * std::sin(phi);
        u.value_at({y, 2}, {v, static_cast<std::size_t>(d)});
        for (int k = 0; k < d; ++k) val[k] += wedge * v[k];
      }
      mass += m_shell;
    }
    s_lo = s_hi;
    cdf_lo = cdf_hi;
  }

  // analytic remainder
  const double rem = 1.0 - cdf_lo;
  if (rem > 0.0) {
    switch (u.exterior.kind) {
      case Exterior::Kind::Constant:
        for (int k = 0; k < d; ++k) val[k] += rem * u.exterior.constant[k];
        break;
      case Exterior::Kind::Vortex: {
        // ring averages of y/|y| about x tend to x/(2s)
        const double R = s_lo;
        const double far = 0.5 / z * (1.0 - R / std::sqrt(R * R + z * z));
        val[0] += far * x[0];
        val[1] += far * x[1];
        break;
      }
      default:
        break;  // bounded data, mass below tail_tol
    }
    mass += rem;
  }

  for (int k = 0; k < d; ++k) out[k] = val[k] / mass;
}

}  // namespace

HalfField poisson_extend(const VectorField& u, const HalfGridSpec& hspec,
                         const ExtendOptions& opts) {
  u.validate();
  hspec.validate();
  if (!u.exterior.analytic())
    throw std::domain_error("poisson_extend: exterior descriptor required");
  if (u.spec.n > 2)
    throw std::invalid_argument("poisson_extend: implemented for n <= 2");
  if (hspec.boundary.d != u.spec.d)
    throw std::invalid_argument("poisson_extend: target dimension mismatch");

  HalfField ue;
  ue.spec = hspec;
  const int d = u.spec.d;
  ue.values.resize(hspec.total() * d);
  // trace at z = 0: the boundary data itself, resampled on the half-grid's
  // boundary spec
  ue.boundary = VectorField::sample(
      hspec.boundary,
      [&](std::span<const double> x, std::span<double> out) {
        u.value_at(x, out);
      },
      u.exterior);

  const std::int64_t nb = hspec.boundary.total();
  const int L = hspec.levels();
  par::for_each(nb, opts.mode, [&](std::int64_t b) {
    double x[2];
    hspec.boundary.node(b, {x, static_cast<std::size_t>(u.spec.n)});
    for (int l = 0; l < L; ++l) {
      const double z = hspec.zlevels[l];
      if (u.spec.n == 1)
        extend_point_1d(u, x[0], z, ue.at(b, l));
      else
        extend_point_2d(u, x, z, opts, ue.at(b, l));
    }
  });
  return ue;
}

// ---------------------------------------------------------------------------
// half-ball quadratures

namespace {

/// Window decomposition of the half-grid cells meeting B_r^+(x0).
struct HalfBallWindow {
  const HalfGridSpec* hs;
  int n;
  int lo_i[4], hi_i[4];
  std::int64_t span[4];
  int nlev = 0;
  std::int64_t total = 0;
  double x0[4];
  double r;

  HalfBallWindow(const HalfGridSpec& spec, std::span<const double> center,
                 double radius)
      : hs(&spec), n(spec.boundary.n), r(radius) {
    const GridSpec& g = spec.boundary;
    for (int a = 0; a < n; ++a) x0[a] = center[a];
    std::int64_t cells = 1;
    for (int a = 0; a < n; ++a) {
      lo_i[a] = std::max(
          0, static_cast<int>(std::floor((x0[a] - r - g.origin[a]) / g.h)) - 1);
      hi_i[a] = std::min(
          g.counts[a] - 1,
          static_cast<int>(std::ceil((x0[a] + r - g.origin[a]) / g.h)) + 1);
      if (lo_i[a] > hi_i[a]) return;  // empty window
      cells *= hi_i[a] - lo_i[a] + 1;
    }
    const int L = spec.levels();
    while (nlev < L) {
      double zlo, zhi;
      spec.zcell(nlev, zlo, zhi);
      if (zlo >= r) break;
      ++nlev;
    }
    std::int64_t width[4];
    for (int a = 0; a < n; ++a) width[a] = hi_i[a] - lo_i[a] + 1;
    span[n - 1] = 1;
    for (int a = n - 2; a >= 0; --a) span[a] = span[a + 1] * width[a + 1];
    total = cells * nlev;
  }

  /// Decode a flat window index; returns false for cells entirely outside
  /// the half-ball. Fills bnode, level, cell volume and covered fraction.
  bool decode(std::int64_t c, std::int64_t& bnode, int& level, double& vol,
              double& frac) const {
    const GridSpec& g = hs->boundary;
    level = static_cast<int>(c % nlev);
    std::int64_t rest = c / nlev;
    int idx[4];
    double x[4];
    bnode = 0;
    for (int a = 0; a < n; ++a) {
      idx[a] = lo_i[a] + static_cast<int>(rest / span[a]);
      rest %= span[a];
      x[a] = g.coord(a, idx[a]);
      bnode = bnode * g.counts[a] + idx[a];
    }
    double zlo, zhi;
    hs->zcell(level, zlo, zhi);
    const double zc = hs->zlevels[level];
    double c2 = 0.0;
    for (int a = 0; a < n; ++a) {
      const double t = x[a] - x0[a];
      c2 += t * t;
    }
    const double dz = std::max(zc - zlo, zhi - zc);
    const double halfdiag = std::sqrt(0.25 * n * g.h * g.h + dz * dz);
    const double dist = std::sqrt(c2 + zc * zc);
    if (dist - halfdiag >= r) return false;
    vol = std::pow(g.h, n) * (zhi - zlo);
    frac = 1.0;
    if (dist + halfdiag > r) {
      // covered fraction by 3^(n+1) stratified samples
      const double r2 = r * r;
      int inside = 0, samples = 0;
      static const double q[3] = {-1.0 / 3.0, 0.0, 1.0 / 3.0};
      const int lim = (n == 1) ? 3 : 9;
      double sx[4];
      for (int s = 0; s < lim; ++s) {
        sx[0] = x[0] + q[s % 3] * g.h;
        if (n == 2) sx[1] = x[1] + q[(s / 3) % 3] * g.h;
        double b2 = 0.0;
        for (int a = 0; a < n; ++a) {
          const double t = sx[a] - x0[a];
          b2 += t * t;
        }
        for (int t3 = 0; t3 < 3; ++t3) {
          const double zq = zlo + (t3 + 0.5) * (zhi - zlo) / 3.0;
          ++samples;
          if (b2 + zq * zq < r2) ++inside;
        }
      }
      frac = static_cast<double>(inside) / samples;
      if (frac == 0.0) return false;
    }
    return true;
  }
};

/// Deterministic (chunk-ordered) reduction over half-ball cells.
template <class Term>
double halfball_reduce(const HalfGridSpec& hs, std::span<const double> x0,
                       double r, Exec mode, Term&& term) {
  const HalfBallWindow win(hs, x0, r);
  if (win.total == 0) return 0.0;
  return par::reduce_sum(win.total, mode, [&](std::int64_t c) -> double {
    std::int64_t b;
    int l;
    double vol, frac;
    if (!win.decode(c, b, l, vol, frac)) return 0.0;
    return term(b, l, vol, frac);
  });
}

/// Serial visitor (for matrix accumulations).
template <class Visit>
void halfball_visit(const HalfGridSpec& hs, std::span<const double> x0,
                    double r, Visit&& visit) {
  const HalfBallWindow win(hs, x0, r);
  for (std::int64_t c = 0; c < win.total; ++c) {
    std::int64_t b;
    int l;
    double vol, frac;
    if (win.decode(c, b, l, vol, frac)) visit(b, l, vol, frac);
  }
}

double grad_sq(const HalfField& ue, const std::vector<double>& grad,
               std::int64_t bnode, int level) {
  const int gsz = (ue.spec.boundary.n + 1) * ue.d();
  const double* D = grad.data() + ue.spec.index(bnode, level) * gsz;
  double s = 0.0;
  for (int k = 0; k < gsz; ++k) s += D[k] * D[k];
  return s;
}

struct GradHolder {
  const std::vector<double>* table;
  std::vector<double> own;
  GradHolder(const HalfField& ue, const std::vector<double>* grad) {
    if (grad) {
      table = grad;
    } else {
      own = halfgrid_gradient(ue);
      table = &own;
    }
  }
};

}  // namespace

double halfball_energy_cells(const HalfField& ue, std::span<const double> x0,
                             double r, const std::vector<double>* grad,
                             Exec mode) {
  GradHolder gh(ue, grad);
  return halfball_reduce(ue.spec, x0, r, mode,
                         [&](std::int64_t b, int l, double vol, double frac) {
                           return 0.5 * grad_sq(ue, *gh.table, b, l) * vol * frac;
                         });
}

void visit_halfball_cells(
    const HalfGridSpec& hs, std::span<const double> x0, double r,
    const std::function<void(std::int64_t, int, double, double)>& f) {
  halfball_visit(hs, x0, r, f);
}

double halfball_energy(const HalfField& ue, std::span<const double> x0,
                       double r, const std::vector<double>* grad,
                       const HalfBallOptions& opts) {
  const int n = ue.spec.boundary.n;
  const double h = ue.spec.boundary.h;
  GradHolder gh(ue, grad);
  const double s0 = opts.core_factor * h;
  const bool core = (n >= 2) && opts.core_factor > 0.0 && 2.5 * s0 <= r;
  if (!core) return halfball_energy_cells(ue, x0, r, gh.table, opts.mode);
  const double full = halfball_energy_cells(ue, x0, r, gh.table, opts.mode);
  const double e_s0 = halfball_energy_cells(ue, x0, s0, gh.table, opts.mode);
  const double e_2s0 = halfball_energy_cells(ue, x0, 2.0 * s0, gh.table, opts.mode);
  // replace the core by the radial extrapolation E(s0) ~ annulus / (2^{n-1}-1)
  const double denom = std::pow(2.0, n - 1) - 1.0;
  const double core_est = (e_2s0 - e_s0) / denom;
  return full - e_s0 + core_est;
}

double theta_density(const HalfField& ue, std::span<const double> x0, double r,
                     const std::vector<double>* grad,
                     const HalfBallOptions& opts) {
  const int n = ue.spec.boundary.n;
  return std::pow(r, 1 - n) * halfball_energy(ue, x0, r, grad, opts);
}

XiEstimate xi_density(const HalfField& ue, std::span<const double> x0,
                      std::span<const double> radii,
                      const std::vector<double>* grad,
                      const HalfBallOptions& opts) {
  if (radii.size() < 3)
    throw std::invalid_argument("xi_density: need at least 3 radii");
  std::vector<double> rs(radii.begin(), radii.end());
  std::sort(rs.begin(), rs.end());
  if (rs.front() < 4.0 * ue.spec.zlevels.front())
    throw std::invalid_argument("xi_density: smallest radius under-resolved (< 4 z-spacings)");
  GradHolder gh(ue, grad);
  std::vector<double> th(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i)
    th[i] = theta_density(ue, x0, rs[i], gh.table, opts);

  XiEstimate est;
  const double d0 = th[1] - th[0];
  const double d1 = th[2] - th[1];
  est.error_bar = std::abs(d0);
  if (std::abs(d1) > 1e-15 && d0 * d1 > 0.0) {
    const double q = d0 / d1;  // contraction per radius halving
    if (q > 0.05 && q < 0.95) {
      est.value = th[0] - d0 * q / (1.0 - q);
      return est;
    }
  }
  est.value = th[0];
  return est;
}

DensityCurve density_curve(const HalfField& ue, std::span<const double> x0,
                           std::span<const double> radii,
                           const std::vector<double>* grad,
                           const HalfBallOptions& opts) {
  GradHolder gh(ue, grad);
  DensityCurve c;
  c.center.assign(x0.begin(), x0.end());
  c.radii.assign(radii.begin(), radii.end());
  std::sort(c.radii.begin(), c.radii.end());
  for (double r : c.radii)
    c.thetas.push_back(theta_density(ue, x0, r, gh.table, opts));
  if (c.radii.size() >= 3 &&
      c.radii.front() >= 4.0 * ue.spec.zlevels.front()) {
    const XiEstimate xi = xi_density(ue, x0, c.radii, gh.table, opts);
    c.xi = xi.value;
    c.xi_error = xi.error_bar;
  } else if (!c.thetas.empty()) {
    c.xi = c.thetas.front();
    c.xi_error = c.thetas.size() > 1 ? std::abs(c.thetas[1] - c.thetas[0]) : 0.0;
  }
  return c;
}

namespace {

/// Annulus integral of |(x - x0).grad u^e|^2 / |x - x0|^{n+1} over
/// B_r^+ \ B_rho^+.
double radial_annulus_integral(const HalfField& ue, std::span<const double> x0,
                               double rho, double r,
                               const std::vector<double>& grad, Exec mode) {
  const GridSpec& g = ue.spec.boundary;
  const int n = g.n, d = g.d;
  const int gsz = (n + 1) * d;
  auto term = [&](std::int64_t b, int l, double vol, double frac) -> double {
    double x[4];
    g.node(b, {x, static_cast<std::size_t>(n)});
    const double z = ue.spec.zlevels[l];
    double rel[4];
    double dist2 = z * z;
    for (int a = 0; a < n; ++a) {
      rel[a] = x[a] - x0[a];
      dist2 += rel[a] * rel[a];
    }
    if (dist2 < 1e-30) return 0.0;
    const double* D = grad.data() + ue.spec.index(b, l) * gsz;
    double rad2 = 0.0;
    for (int k = 0; k < d; ++k) {
      double s = 0.0;
      for (int a = 0; a < n; ++a) s += rel[a] * D[a * d + k];
      s += z * D[n * d + k];
      rad2 += s * s;
    }
    return rad2 / std::pow(dist2, 0.5 * (n + 1)) * vol * frac;
  };
  const double outer = halfball_reduce(ue.spec, x0, r, mode, term);
  const double inner = halfball_reduce(ue.spec, x0, rho, mode, term);
  return outer - inner;
}

}  // namespace

double MonotonicityAudit::max_mismatch() const {
  double v = 0.0;
  for (const Row& row : rows) v = std::max(v, row.mismatch);
  return v;
}

MonotonicityAudit monotonicity_audit(
    const HalfField& ue, std::span<const double> x0,
    std::span<const std::pair<double, double>> pairs,
    const std::vector<double>* grad, const HalfBallOptions& opts) {
  GradHolder gh(ue, grad);
  MonotonicityAudit audit;
  audit.center.assign(x0.begin(), x0.end());
  for (const auto& [rho, r] : pairs) {
    if (!(rho < r)) throw std::invalid_argument("monotonicity_audit: need rho < r");
    MonotonicityAudit::Row row;
    row.rho = rho;
    row.r = r;
    row.lhs = theta_density(ue, x0, r, gh.table, opts) -
              theta_density(ue, x0, rho, gh.table, opts);
    row.rhs = radial_annulus_integral(ue, x0, rho, r, *gh.table, opts.mode);
    row.mismatch = std::abs(row.lhs - row.rhs) /
                   std::max({std::abs(row.lhs), std::abs(row.rhs), 1e-14});
    audit.rows.push_back(row);
  }
  return audit;
}

double pinching_w(const HalfField& ue, std::span<const double> x, double r,
                  const std::vector<double>* grad, Exec mode) {
  GradHolder gh(ue, grad);
  return radial_annulus_integral(ue, x, r, 8.0 * r, *gh.table, mode);
}

double DirectionalEnergy::subspace_energy(const Eigen::MatrixXd& frame) const {
  return (frame.transpose() * matrix * frame).trace();
}

DirectionalEnergy directional_energy_matrix(const HalfField& ue,
                                            std::span<const double> x, double r,
                                            const std::vector<double>* grad,
                                            Exec mode) {
  GradHolder gh(ue, grad);
  const GridSpec& g = ue.spec.boundary;
  const int n = g.n, d = g.d;
  const int gsz = (n + 1) * d;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  halfball_visit(ue.spec, x, r,
                 [&](std::int64_t b, int l, double vol, double frac) {
                   const double* D =
                       gh.table->data() + ue.spec.index(b, l) * gsz;
                   for (int i = 0; i < n; ++i)
                     for (int j = i; j < n; ++j) {
                       double s = 0.0;
                       for (int k = 0; k < d; ++k)
                         s += D[i * d + k] * D[j * d + k];
                       A(i, j) += s * vol * frac;
                     }
                 });
  (void)mode;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) A(i, j) = A(j, i);
  DirectionalEnergy de;
  de.matrix = A;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  de.eigenvalues = es.eigenvalues();
  de.eigenvectors = es.eigenvectors();
  return de;
}

ComparisonRatio extension_energy_comparison(const VectorField& u,
                                            std::span<const double> x, double r,
                                            const ExtendOptions& opts) {
  u.validate();
  const GridSpec& g = u.spec;
  const int n = g.n;
  for (int a = 0; a < n; ++a) {
    if (x[a] - 3.0 * r < g.lo(a) - 0.5 * g.h || x[a] + 3.0 * r > g.hi(a) + 0.5 * g.h)
      throw std::invalid_argument("extension_energy_comparison: D_3r(x) must lie inside the grid");
  }
  // local half-grid over D_{r+2h}(x), z-levels geometric up to r
  GridSpec bspec;
  bspec.n = n;
  bspec.d = g.d;
  bspec.h = g.h;
  bspec.origin.resize(n);
  bspec.counts.resize(n);
  for (int a = 0; a < n; ++a) {
    const double lo = x[a] - r - 2.0 * g.h;
    const int i0 = std::max(0, static_cast<int>(std::floor((lo - g.origin[a]) / g.h)));
    bspec.origin[a] = g.coord(a, i0);
    const double hi = x[a] + r + 2.0 * g.h;
    const int i1 = std::min(g.counts[a] - 1,
                            static_cast<int>(std::ceil((hi - g.origin[a]) / g.h)));
    bspec.counts[a] = std::max(2, i1 - i0 + 1);
  }
  HalfGridSpec hspec;
  hspec.boundary = bspec;
  hspec.zlevels = HalfGridSpec::geometric_levels(0.5 * g.h, 1.05 * r);

  const HalfField ue = poisson_extend(u, hspec, opts);
  ComparisonRatio cr;
  cr.extension_energy = halfball_energy(ue, x, r);
  Ball d2r{std::vector<double>(x.begin(), x.end()), 2.0 * r};
  cr.boundary_energy = half_energy(u, d2r).value;
  if (cr.boundary_energy < 1e-14) {
    cr.flagged_constant = true;
    cr.ratio = 0.0;
  } else {
    cr.ratio = cr.extension_energy / cr.boundary_energy;
  }
  return cr;
}

}  // namespace fracmap
