#include "fracmap/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fracmap {

namespace {

constexpr double kPi = std::numbers::pi;

int clampi(double v, int lo, int hi) {
  return std::clamp(static_cast<int>(std::lround(v)), lo, hi);
}

/// Bin counts for the hierarchical link angles. The "last" angle (z against
/// the last complement coordinate) must use the same count at every chain
/// level so that child binnings refine parent binnings exactly.
int bins_last(double r, double h) { return clampi(1.5 * r / h, 8, 96); }
int bins_lead(double r, double h) { return clampi(1.5 * r / h, 8, 64); }

/// Deterministic orthonormal completion of frame columns to R^n.
Eigen::MatrixXd complete_basis(const Eigen::MatrixXd& frame, int n) {
  const int k = static_cast<int>(frame.cols());
  Eigen::MatrixXd W(n, n - k);
  int col = 0;
  for (int a = 0; a < n && col < n - k; ++a) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    v(a) = 1.0;
    for (int j = 0; j < k; ++j) v -= frame.col(j).dot(v) * frame.col(j);
    for (int j = 0; j < col; ++j) v -= W.col(j).dot(v) * W.col(j);
    const double nv = v.norm();
    if (nv > 1e-8) W.col(col++) = v / nv;
  }
  if (col != n - k)
    throw std::invalid_argument("symmetrize: degenerate frame");
  return W;
}

void check_frame(const Eigen::MatrixXd& frame, int n) {
  if (frame.rows() != n)
    throw std::invalid_argument("symmetrize: frame rows must equal n");
  const int k = static_cast<int>(frame.cols());
  if (k > n) throw std::invalid_argument("symmetrize: frame has too many columns");
  if (k == 0) return;
  Eigen::MatrixXd G = frame.transpose() * frame;
  if ((G - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-8)
    throw std::invalid_argument("symmetrize: frame not orthonormal (degenerate?)");
}

}  // namespace

int OrbitAverage::bin_of(std::span<const double> y, double z) const {
  const int n = static_cast<int>(center.size());
  const int m = static_cast<int>(complement.cols());
  if (m == 0) return 0;
  double w[4];
  for (int j = 0; j < m; ++j) {
    double s = 0.0;
    for (int a = 0; a < n; ++a) s += complement(a, j) * (y[a] - center[a]);
    w[j] = s;
  }
  auto bin_index = [](double angle, int bins) {
    int b = static_cast<int>(angle / kPi * bins);
    return std::clamp(b, 0, bins - 1);
  };
  if (m == 1) {
    return bin_index(std::atan2(z, w[0]), bins1);
  }
  // m == 2: leading angle against the remaining link, then the last angle
  const double tail = std::hypot(w[1], z);
  const int b1 = bin_index(std::atan2(tail, w[0]), bins1);
  const int b2 = bin_index(std::atan2(z, w[1]), bins2);
  return b1 * bins2 + b2;
}

void OrbitAverage::eval(std::span<const double> y, double z,
                        std::span<double> out) const {
  int b = bin_of(y, z);
  if (weight[b] <= 0.0) {
    // nearest populated bin in index space
    const int nb = bin_count();
    int best = -1;
    double bestd = 1e300;
    const int b1 = b / bins2, b2 = b % bins2;
    for (int i = 0; i < nb; ++i) {
      if (weight[i] <= 0.0) continue;
      const int i1 = i / bins2, i2 = i % bins2;
      const double dist = std::abs(i1 - b1) + std::abs(i2 - b2);
      if (dist < bestd) {
        bestd = dist;
        best = i;
      }
    }
    if (best < 0) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    b = best;
  }
  for (int k = 0; k < d; ++k) out[k] = value[b * d + k] / weight[b];
}

namespace {

/// Core of symmetrize with an explicit complement ordering (the hierarchy
/// hook used by symmetry_profile).
SymmetryFit symmetrize_impl(const HalfField& ue, std::span<const double> x,
                            double r, const Eigen::MatrixXd& frame,
                            const Eigen::MatrixXd& complement,
                            const std::vector<double>*) {
  const GridSpec& g = ue.spec.boundary;
  const int n = g.n, d = g.d;
  const int m = static_cast<int>(complement.cols());
  if (m > 2)
    throw std::invalid_argument("symmetrize: links of dimension > 2 not supported");

  SymmetryFit fit;
  fit.k = static_cast<int>(frame.cols());
  fit.center.assign(x.begin(), x.end());
  fit.r = r;
  fit.frame = frame;

  OrbitAverage& h = fit.h;
  h.center = fit.center;
  h.frame = frame;
  h.complement = complement;
  h.d = d;
  if (m == 0) {
    h.bins1 = h.bins2 = 1;
  } else if (m == 1) {
    h.bins1 = bins_last(r, g.h);
    h.bins2 = 1;
  } else {
    h.bins1 = bins_lead(r, g.h);
    h.bins2 = bins_last(r, g.h);
  }
  h.value.assign(static_cast<std::size_t>(h.bin_count()) * d, 0.0);
  h.weight.assign(h.bin_count(), 0.0);

  // pass 1: bin averages and the global mean
  double wtot = 0.0;
  std::vector<double> mean(d, 0.0);
  visit_halfball_cells(
      ue.spec, x, r, [&](std::int64_t bnode, int level, double vol, double frac) {
        double xb[4];
        g.node(bnode, {xb, static_cast<std::size_t>(n)});
        const double w = vol * frac;
        const int b =
            h.bin_of({xb, static_cast<std::size_t>(n)}, ue.spec.zlevels[level]);
        const double* v = ue.at(bnode, level).data();
        h.weight[b] += w;
        wtot += w;
        for (int k = 0; k < d; ++k) {
          h.value[b * d + k] += w * v[k];
          mean[k] += w * v[k];
        }
      });
  if (wtot <= 0.0) {
    fit.defect = 0.0;
    fit.defect_normalized = 0.0;
    return fit;
  }
  for (int k = 0; k < d; ++k) mean[k] /= wtot;

  // pass 2: deviations
  double dev = 0.0, osc = 0.0;
  visit_halfball_cells(
      ue.spec, x, r, [&](std::int64_t bnode, int level, double vol, double frac) {
        double xb[4];
        g.node(bnode, {xb, static_cast<std::size_t>(n)});
        const double w = vol * frac;
        const int b =
            h.bin_of({xb, static_cast<std::size_t>(n)}, ue.spec.zlevels[level]);
        const double* v = ue.at(bnode, level).data();
        const double invw = 1.0 / h.weight[b];
        for (int k = 0; k < d; ++k) {
          const double hb = h.value[b * d + k] * invw;
          const double t = v[k] - hb;
          dev += w * t * t;
          const double o = v[k] - mean[k];
          osc += w * o * o;
        }
      });
  fit.defect = dev / wtot;
  fit.defect_normalized = fit.defect / std::max(osc / wtot, 1e-14);
  return fit;
}

}  // namespace

SymmetryFit symmetrize(const HalfField& ue, std::span<const double> x, double r,
                       const Eigen::MatrixXd& frame,
                       const std::vector<double>* grad) {
  const int n = ue.spec.boundary.n;
  check_frame(frame, n);
  return symmetrize_impl(ue, x, r, frame, complete_basis(frame, n), grad);
}

std::vector<SymmetryFit> symmetry_profile(const HalfField& ue,
                                          std::span<const double> x, double r,
                                          int kmin,
                                          const std::vector<double>* grad) {
  const GridSpec& g = ue.spec.boundary;
  const int n = g.n;
  kmin = std::clamp(kmin, 0, n);
  std::vector<SymmetryFit> out(n + 1);

  // k = n: full translation invariance, h is the global mean
  {
    Eigen::MatrixXd full = Eigen::MatrixXd::Identity(n, n);
    out[n] = symmetrize_impl(ue, x, r, full, Eigen::MatrixXd(n, 0), grad);
  }

  std::optional<DirectionalEnergy> dem;
  for (int k = n - 1; k >= kmin; --k) {
    const SymmetryFit& parent = out[k + 1];
    SymmetryFit best;
    bool have = false;
    auto consider = [&](const Eigen::MatrixXd& frame,
                        const Eigen::MatrixXd& complement) {
      SymmetryFit fit = symmetrize_impl(ue, x, r, frame, complement, grad);
      if (!have || fit.defect < best.defect) {
        best = std::move(fit);
        have = true;
      }
    };

    // inherited candidates: drop one parent column, complement ordered with
    // the dropped direction first so the binning refines the parent's
    for (int jdrop = 0; jdrop < parent.frame.cols(); ++jdrop) {
      Eigen::MatrixXd frame(n, k);
      int c = 0;
      for (int j = 0; j < parent.frame.cols(); ++j)
        if (j != jdrop) frame.col(c++) = parent.frame.col(j);
      Eigen::MatrixXd comp(n, n - k);
      comp.col(0) = parent.frame.col(jdrop);
      for (int j = 0; j < parent.h.complement.cols(); ++j)
        comp.col(1 + j) = parent.h.complement.col(j);
      consider(frame, comp);
    }

    if (k >= 1) {
      // eigenvector seed from the directional energy matrix
      if (!dem) dem = directional_energy_matrix(ue, x, r, grad);
      Eigen::MatrixXd seed = dem->eigenvectors.leftCols(k);
      consider(seed, complete_basis(seed, n));

      // coarse global grid plus golden-section refinement for planar lines
      if (n == 2 && k == 1) {
        auto line_defect = [&](double theta) {
          Eigen::MatrixXd f(2, 1);
          f << std::cos(theta), std::sin(theta);
          Eigen::MatrixXd c(2, 1);
          c << -std::sin(theta), std::cos(theta);
          return symmetrize_impl(ue, x, r, f, c, grad);
        };
        const int grid = 16;
        double besttheta = 0.0;
        double bestval = 1e300;
        for (int j = 0; j < grid; ++j) {
          const double theta = j * kPi / grid;
          SymmetryFit fit = line_defect(theta);
          if (fit.defect < bestval) {
            bestval = fit.defect;
            besttheta = theta;
          }
          if (!have || fit.defect < best.defect) {
            best = std::move(fit);
            have = true;
          }
        }
        // golden-section refinement around the grid minimum
        double a = besttheta - kPi / grid, b = besttheta + kPi / grid;
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
        SymmetryFit f1 = line_defect(c1), f2 = line_defect(c2);
        for (int step = 0; step < 24; ++step) {
          if (f1.defect < f2.defect) {
            b = c2;
            c2 = c1;
            f2 = std::move(f1);
            c1 = b - gr * (b - a);
            f1 = line_defect(c1);
          } else {
            a = c1;
            c1 = c2;
            f1 = std::move(f2);
            c2 = a + gr * (b - a);
            f2 = line_defect(c2);
          }
        }
        if (f1.defect < best.defect) best = std::move(f1);
        if (f2.defect < best.defect) best = std::move(f2);
      }
    } else {
      // k = 0: pure homogenization about the center, complement ordered as
      // the parent's dropped direction first (handled by inheritance); also
      // the canonical axis ordering
      Eigen::MatrixXd empty(n, 0);
      consider(empty, complete_basis(empty, n));
    }

    // the parent average is itself a boundary k-symmetric competitor: its
    // defect carries over verbatim, which pins defect_k <= defect_{k+1}
    if (parent.defect < best.defect) {
      best.defect = parent.defect;
      best.defect_normalized = parent.defect_normalized;
      best.h = parent.h;
      if (parent.frame.cols() > k)
        best.frame = parent.frame.leftCols(k);
    }
    best.k = k;
    out[k] = std::move(best);
  }
  return out;
}

SymmetryFit symmetry_defect(const HalfField& ue, std::span<const double> x,
                            double r, int k,
                            const std::vector<double>* grad) {
  const int n = ue.spec.boundary.n;
  if (k < 0 || k > n)
    throw std::invalid_argument("symmetry_defect: k must be in [0, n]");
  auto profile = symmetry_profile(ue, x, r, k, grad);
  return profile[k];
}

// ---------------------------------------------------------------------------
// strata

std::vector<double> dyadic_schedule(double r) {
  std::vector<double> s;
  double v = 0.5;
  while (v >= r * (1.0 - 1e-12)) {
    s.push_back(v);
    v *= 0.5;
  }
  std::sort(s.begin(), s.end());
  if (s.empty()) s.push_back(r);
  return s;
}

bool Stratum::contains(std::int64_t node) const {
  for (const auto& w : members)
    if (w.node == node) return true;
  return false;
}

Stratum quantitative_stratum(const HalfField& ue, int k, double eps, double r,
                             const StratumOptions& opts) {
  const GridSpec& g = ue.spec.boundary;
  const int n = g.n;
  if (k < 0 || k >= n)
    throw std::invalid_argument("quantitative_stratum: k must be in [0, n)");
  Stratum st;
  st.k = k;
  st.eps = eps;
  st.r = r;
  st.schedule = dyadic_schedule(r);
  const double smax = st.schedule.back();
  if (smax > ue.spec.zlevels.back() + 1e-12)
    throw std::invalid_argument("quantitative_stratum: half-grid too shallow for the schedule");

  // probes: strided nodes in the window whose largest ball stays inside
  std::vector<std::int64_t> probes;
  std::vector<double> x(n);
  std::vector<int> mi(n);
  for (std::int64_t i = 0; i < g.total(); ++i) {
    g.multi_index(i, mi);
    bool strided = true;
    for (int a = 0; a < n; ++a) strided = strided && (mi[a] % opts.stride == 0);
    if (!strided) continue;
    g.node(i, x);
    double nr2 = 0.0;
    for (int a = 0; a < n; ++a) nr2 += x[a] * x[a];
    if (nr2 >= opts.window_radius * opts.window_radius) continue;
    bool fits = true;
    for (int a = 0; a < n; ++a)
      fits = fits && (x[a] - smax >= g.lo(a) - 1e-12) &&
             (x[a] + smax <= g.hi(a) + 1e-12);
    if (fits) probes.push_back(i);
  }
  if (probes.empty())
    throw std::invalid_argument("quantitative_stratum: no feasible probe nodes (window vs schedule)");

  const auto grad = halfgrid_gradient(ue, opts.mode);
  std::vector<std::uint8_t> member(probes.size(), 0);
  std::vector<double> wit_scale(probes.size(), 0.0);
  std::vector<double> wit_defect(probes.size(), 0.0);

  par::for_each(static_cast<std::int64_t>(probes.size()), opts.mode,
                [&](std::int64_t pi) {
    double px[4];
    g.node(probes[pi], {px, static_cast<std::size_t>(n)});
    bool all_fail = true;
    double best_scale = 0.0, best_defect = 1e300;
    for (double s : st.schedule) {
      const SymmetryFit fit =
          symmetry_profile(ue, {px, static_cast<std::size_t>(n)}, s, k + 1,
                           &grad)[k + 1];
      if (fit.defect < best_defect) {
        best_defect = fit.defect;
        best_scale = s;
      }
      if (fit.defect <= eps) {
        all_fail = false;
        break;  // (k+1, eps)-symmetric at this scale: not in the stratum
      }
    }
    if (all_fail) {
      member[pi] = 1;
      wit_scale[pi] = best_scale;
      wit_defect[pi] = best_defect;
    }
  });

  for (std::size_t pi = 0; pi < probes.size(); ++pi) {
    if (!member[pi]) continue;
    StratumWitness w;
    w.node = probes[pi];
    w.x = g.node(probes[pi]);
    w.scale = wit_scale[pi];
    w.defect = wit_defect[pi];
    st.members.push_back(std::move(w));
  }
  return st;
}

// ---------------------------------------------------------------------------
// effective span

EffectiveSpan effective_span(const std::vector<std::vector<double>>& points,
                             double rho) {
  if (points.empty())
    throw std::invalid_argument("effective_span: empty point set");
  if (!(rho > 0.0)) throw std::invalid_argument("effective_span: rho must be > 0");
  const int n = static_cast<int>(points.front().size());
  // deterministic start: lexicographically smallest point
  int start = 0;
  for (int i = 1; i < static_cast<int>(points.size()); ++i)
    if (std::lexicographical_compare(points[i].begin(), points[i].end(),
                                     points[start].begin(), points[start].end()))
      start = i;

  EffectiveSpan es;
  es.picked.push_back(start);
  es.base = Eigen::Map<const Eigen::VectorXd>(points[start].data(), n);
  es.directions = Eigen::MatrixXd(n, 0);

  while (true) {
    // farthest point from the current affine span
    int bestidx = -1;
    double bestdist = -1.0;
    Eigen::VectorXd bestres;
    for (int i = 0; i < static_cast<int>(points.size()); ++i) {
      Eigen::VectorXd v =
          Eigen::Map<const Eigen::VectorXd>(points[i].data(), n) - es.base;
      Eigen::VectorXd res = v - es.directions * (es.directions.transpose() * v);
      const double dist = res.norm();
      if (dist > bestdist + 1e-15) {
        bestdist = dist;
        bestidx = i;
        bestres = res;
      }
    }
    if (bestidx < 0 || bestdist < 2.0 * rho) break;
    es.picked.push_back(bestidx);
    es.directions.conservativeResize(n, es.directions.cols() + 1);
    es.directions.col(es.directions.cols() - 1) = bestres / bestdist;
    if (es.directions.cols() == n) break;
  }
  es.dim = static_cast<int>(es.directions.cols());
  return es;
}

// ---------------------------------------------------------------------------
// regularity scale and volumes

RegularityScale::RegularityScale(const VectorField& u) : u_(&u) {
  const auto grad = gradient(u);
  auto norms = gradient_norms(u, grad);
  for (std::int64_t f : u.flagged)
    norms[f] = -std::numeric_limits<double>::infinity();
  pyramid_ = MaxPyramid(u.spec, std::move(norms));
}

double RegularityScale::at(std::span<const double> x) const {
  auto predicate = [&](double r) {
    const double sup_grid = std::max(0.0, pyramid_.max_in_ball(x, r));
    const double sup_ext = exterior_gradient_sup(*u_, x, r);
    return r * std::max(sup_grid, sup_ext) <= 1.0;
  };
  if (predicate(1.0)) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (predicate(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

double regularity_scale(const VectorField& u, std::span<const double> x) {
  return RegularityScale(u).at(x);
}

double tube_volume(const GridSpec& grid,
                   const std::vector<std::vector<double>>& S, double r,
                   const Ball& window) {
  grid.validate();
  if (S.empty()) return 0.0;
  const int n = grid.n;
  const double r2 = r * r;
  std::int64_t count = 0;
  std::vector<double> x(n);
  for (std::int64_t i = 0; i < grid.total(); ++i) {
    grid.node(i, x);
    if (!window.contains(x)) continue;
    for (const auto& p : S) {
      double s = 0.0;
      for (int a = 0; a < n; ++a) {
        const double t = x[a] - p[a];
        s += t * t;
      }
      if (s <= r2) {
        ++count;
        break;
      }
    }
  }
  return std::pow(grid.h, n) * static_cast<double>(count);
}

double gradient_superlevel_volume(const VectorField& u, double r,
                                  const Ball& window) {
  const auto grad = gradient(u);
  const auto norms = gradient_norms(u, grad);
  const double level = 1.0 / r;
  std::int64_t count = 0;
  std::vector<double> x(u.spec.n);
  for (std::int64_t i = 0; i < u.spec.total(); ++i) {
    if (u.is_flagged(i)) continue;
    u.spec.node(i, x);
    if (!window.contains(x)) continue;
    if (norms[i] > level) ++count;
  }
  return std::pow(u.spec.h, u.spec.n) * static_cast<double>(count);
}

std::vector<std::int64_t> singular_candidates(const HalfField& ue, double eps1,
                                              double r,
                                              const StratumOptions& opts) {
  if (!(eps1 > 0.0))
    throw std::invalid_argument("singular_candidates: eps1 must be > 0");
  const GridSpec& g = ue.spec.boundary;
  const int n = g.n;
  const auto grad = halfgrid_gradient(ue, opts.mode);
  std::vector<std::int64_t> probes;
  std::vector<double> x(n);
  std::vector<int> mi(n);
  for (std::int64_t i = 0; i < g.total(); ++i) {
    g.multi_index(i, mi);
    bool strided = true;
    for (int a = 0; a < n; ++a) strided = strided && (mi[a] % opts.stride == 0);
    if (!strided) continue;
    g.node(i, x);
    double nr2 = 0.0;
    for (int a = 0; a < n; ++a) nr2 += x[a] * x[a];
    if (nr2 >= opts.window_radius * opts.window_radius) continue;
    bool fits = true;
    for (int a = 0; a < n; ++a)
      fits = fits && (x[a] - r >= g.lo(a) - 1e-12) &&
             (x[a] + r <= g.hi(a) + 1e-12);
    if (fits) probes.push_back(i);
  }
  std::vector<std::uint8_t> hit(probes.size(), 0);
  par::for_each(static_cast<std::int64_t>(probes.size()), opts.mode,
                [&](std::int64_t pi) {
    double px[4];
    g.node(probes[pi], {px, static_cast<std::size_t>(n)});
    const double th =
        theta_density(ue, {px, static_cast<std::size_t>(n)}, r, &grad);
    if (th > eps1) hit[pi] = 1;
  });
  std::vector<std::int64_t> out;
  for (std::size_t pi = 0; pi < probes.size(); ++pi)
    if (hit[pi]) out.push_back(probes[pi]);
  return out;
}

}  // namespace fracmap
