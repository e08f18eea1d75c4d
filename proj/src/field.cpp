#include "fracmap/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fracmap {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}
}  // namespace

// ---------------------------------------------------------------------------
// Exterior

Exterior Exterior::constant_value(std::vector<double> c) {
  Exterior e;
  e.kind = Kind::Constant;
  e.constant = std::move(c);
  return e;
}

Exterior Exterior::vortex() {
  Exterior e;
  e.kind = Kind::Vortex;
  return e;
}

Exterior Exterior::wave() {
  Exterior e;
  e.kind = Kind::Wave;
  return e;
}

void Exterior::eval(std::span<const double> y, std::span<double> out) const {
  double buf[4];
  std::span<const double> p = y;
  if (!offset.empty()) {
    for (std::size_t a = 0; a < y.size(); ++a)
      buf[a] = offset[a] + scale * y[a];
    p = {buf, y.size()};
  }
  switch (kind) {
    case Kind::Constant:
      std::copy(constant.begin(), constant.end(), out.begin());
      return;
    case Kind::Vortex: {
      const double r = std::hypot(p[0], p[1]);
      if (r == 0.0) {
        out[0] = 1.0;
        out[1] = 0.0;
      } else {
        out[0] = p[0] / r;
        out[1] = p[1] / r;
      }
      return;
    }
    case Kind::Wave:
      out[0] = std::cos(p[0]);
      out[1] = std::sin(p[0]);
      return;
    case Kind::None:
      throw std::domain_error("Exterior::eval: no exterior descriptor");
  }
}

Exterior Exterior::pulled_back(std::span<const double> x0, double r) const {
  Exterior e = *this;
  if (kind == Kind::None || kind == Kind::Constant) return e;
  if (offset.empty()) {
    e.offset.assign(x0.begin(), x0.end());
    e.scale = r;
  } else {
    // base(offset + scale*(x0 + r y)) = base(offset' + scale' y)
    for (std::size_t a = 0; a < e.offset.size(); ++a)
      e.offset[a] += scale * x0[a];
    e.scale = scale * r;
  }
  return e;
}

std::string Exterior::describe() const {
  switch (kind) {
    case Kind::None: return "none";
    case Kind::Constant: {
      std::string s = "constant";
      for (double c : constant) s += " " + std::to_string(c);
      return s;
    }
    case Kind::Vortex: return "vortex";
    case Kind::Wave: return "wave";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// VectorField

void VectorField::validate() const {
  spec.validate();
  if (static_cast<std::int64_t>(values.size()) != spec.total() * spec.d)
    throw std::invalid_argument("VectorField: values size mismatch");
  if (exterior.kind == Exterior::Kind::Constant &&
      static_cast<int>(exterior.constant.size()) != spec.d)
    throw std::invalid_argument("VectorField: constant exterior dimension mismatch");
}

bool VectorField::is_flagged(std::int64_t node) const {
  return std::binary_search(flagged.begin(), flagged.end(), node);
}

void VectorField::interpolate(std::span<const double> x,
                              std::span<double> out) const {
  const int n = spec.n, d = spec.d;
  int base[4];
  double frac[4];
  for (int a = 0; a < n; ++a) {
    double t = (x[a] - spec.origin[a]) / spec.h;
    t = std::clamp(t, 0.0, static_cast<double>(spec.counts[a] - 1));
    int i = static_cast<int>(t);
    i = std::min(i, spec.counts[a] - 2);
    base[a] = i;
    frac[a] = t - i;
  }
  std::fill(out.begin(), out.end(), 0.0);
  const int corners = 1 << n;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    std::int64_t idx = 0;
    for (int a = 0; a < n; ++a) {
      const int bit = (c >> a) & 1;
      w *= bit ? frac[a] : (1.0 - frac[a]);
      idx = idx * spec.counts[a] + (base[a] + bit);
    }
    if (w == 0.0) continue;
    const double* v = values.data() + idx * d;
    for (int k = 0; k < d; ++k) out[k] += w * v[k];
  }
}

void VectorField::value_at(std::span<const double> x,
                           std::span<double> out) const {
  if (spec.contains(x)) {
    interpolate(x, out);
    return;
  }
  if (!exterior.analytic())
    throw std::domain_error("VectorField::value_at: point outside grid and exterior is none");
  exterior.eval(x, out);
}

double VectorField::max_sphere_violation() const {
  double worst = 0.0;
  for (std::int64_t i = 0; i < spec.total(); ++i) {
    if (is_flagged(i)) continue;
    worst = std::max(worst, std::abs(norm(at(i)) - 1.0));
  }
  return worst;
}

VectorField VectorField::sample(
    const GridSpec& spec,
    const std::function<void(std::span<const double>, std::span<double>)>& f,
    Exterior ext) {
  spec.validate();
  VectorField u;
  u.spec = spec;
  u.exterior = std::move(ext);
  u.values.resize(spec.total() * spec.d);
  std::vector<double> x(spec.n);
  for (std::int64_t i = 0; i < spec.total(); ++i) {
    spec.node(i, x);
    f(x, u.at(i));
  }
  return u;
}

// ---------------------------------------------------------------------------
// Sphere target and projections

void SphereTarget::project(std::span<const double> v,
                           std::span<double> out) const {
  const double r = norm(v);
  if (r == 0.0)
    throw std::domain_error("project_to_sphere: undefined at the zero vector");
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k] / r;
}

void SphereTarget::tangent_project(std::span<const double> u,
                                   std::span<const double> w,
                                   std::span<double> out) const {
  double dot = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) dot += u[k] * w[k];
  for (std::size_t k = 0; k < u.size(); ++k) out[k] = w[k] - dot * u[k];
}

std::vector<double> project_to_sphere(std::span<const double> v) {
  std::vector<double> out(v.size());
  SphereTarget{static_cast<int>(v.size())}.project(v, out);
  return out;
}

// ---------------------------------------------------------------------------
// Generators

VectorField analytic_vortex(const GridSpec& spec) {
  if (spec.n != 2 || spec.d != 2)
    throw std::invalid_argument("analytic_vortex: requires n = d = 2");
  VectorField u = VectorField::sample(
      spec,
      [](std::span<const double> x, std::span<double> out) {
        const double r = std::hypot(x[0], x[1]);
        if (r == 0.0) {
          out[0] = 1.0;
          out[1] = 0.0;
        } else {
          out[0] = x[0] / r;
          out[1] = x[1] / r;
        }
      },
      Exterior::vortex());
  const double zero[2] = {0.0, 0.0};
  const std::int64_t sing = spec.nearest_node(zero);
  u.at(sing)[0] = 1.0;
  u.at(sing)[1] = 0.0;
  u.flagged = {sing};
  return u;
}

VectorField analytic_wave(const GridSpec& spec) {
  if (spec.n != 1 || spec.d != 2)
    throw std::invalid_argument("analytic_wave: requires n = 1, d = 2");
  return VectorField::sample(
      spec,
      [](std::span<const double> x, std::span<double> out) {
        out[0] = std::cos(x[0]);
        out[1] = std::sin(x[0]);
      },
      Exterior::wave());
}

VectorField rescale_field(const VectorField& u, std::span<const double> x0,
                          double r) {
  if (!(r > 0.0)) throw std::invalid_argument("rescale_field: r must be > 0");
  VectorField out;
  out.spec = u.spec;
  out.exterior = u.exterior.pulled_back(x0, r);
  out.values.resize(u.values.size());
  const int n = u.spec.n;
  std::vector<double> y(n), p(n);
  for (std::int64_t i = 0; i < u.spec.total(); ++i) {
    u.spec.node(i, y);
    for (int a = 0; a < n; ++a) p[a] = x0[a] + r * y[a];
    u.value_at(p, out.at(i));  // throws out-of-domain when exterior is none
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradients

std::vector<double> gradient(const VectorField& u) {
  const GridSpec& g = u.spec;
  const int n = g.n, d = g.d;
  std::vector<double> out(static_cast<std::size_t>(g.total()) * n * d);
  std::vector<int> mi(n);
  std::int64_t stride[4];
  {
    std::int64_t s = 1;
    for (int a = n - 1; a >= 0; --a) {
      stride[a] = s;
      s *= g.counts[a];
    }
  }
  for (std::int64_t i = 0; i < g.total(); ++i) {
    g.multi_index(i, mi);
    double* D = out.data() + i * n * d;
    for (int a = 0; a < n; ++a) {
      const int c = mi[a];
      std::int64_t ip = i, im = i;
      double denom;
      if (c == 0) {
        ip = i + stride[a];
        denom = g.h;
      } else if (c == g.counts[a] - 1) {
        im = i - stride[a];
        denom = g.h;
      } else {
        ip = i + stride[a];
        im = i - stride[a];
        denom = 2.0 * g.h;
      }
      const double* vp = u.values.data() + ip * d;
      const double* vm = u.values.data() + im * d;
      for (int k = 0; k < d; ++k) D[a * d + k] = (vp[k] - vm[k]) / denom;
    }
  }
  return out;
}

std::vector<double> gradient_norms(const VectorField& u,
                                   const std::vector<double>& grad) {
  const int nd = u.spec.n * u.spec.d;
  std::vector<double> out(u.spec.total());
  for (std::int64_t i = 0; i < u.spec.total(); ++i) {
    double s = 0.0;
    const double* D = grad.data() + i * nd;
    for (int k = 0; k < nd; ++k) s += D[k] * D[k];
    out[i] = std::sqrt(s);
  }
  return out;
}

double exterior_gradient_sup(const VectorField& u, std::span<const double> x,
                             double r) {
  const GridSpec& g = u.spec;
  // Is D_r(x) contained in the node box?
  bool inside = true;
  for (int a = 0; a < g.n; ++a)
    inside = inside && (x[a] - r >= g.lo(a)) && (x[a] + r <= g.hi(a));
  if (inside) return 0.0;
  switch (u.exterior.kind) {
    case Exterior::Kind::None:
      throw std::domain_error("regularity scale: ball leaves the grid and exterior is none");
    case Exterior::Kind::Constant:
      return 0.0;
    case Exterior::Kind::Wave:
      return 1.0;  // |d/dy (cos y, sin y)| = 1
    case Exterior::Kind::Vortex: {
      // |Du| = 1/|y| for the vortex. Outside the box, |y| is at least the
      // distance from the origin to the box boundary, and within D_r(x) it
      // is at least |x| - r.
      double inrad = kInf;
      for (int a = 0; a < g.n; ++a) {
        inrad = std::min(inrad, -g.lo(a));
        inrad = std::min(inrad, g.hi(a));
      }
      double dmin = std::max(inrad, norm(x) - r);
      if (u.exterior.scale != 1.0 || !u.exterior.offset.empty()) {
        // pulled-back vortex: |D[v(x0 + s y)]| = s/|x0 + s y|; be conservative
        dmin = std::max(1e-12, dmin);
        return u.exterior.scale / dmin;
      }
      if (dmin <= 0.0) return kInf;
      return 1.0 / dmin;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// MaxPyramid

MaxPyramid::MaxPyramid(const GridSpec& spec, std::vector<double> node_values)
    : spec_(spec) {
  if (spec.n > 2)
    throw std::invalid_argument("MaxPyramid: implemented for n <= 2");
  const int nx = spec.counts[0];
  const int ny = (spec.n == 2) ? spec.counts[1] : 1;
  levels_.push_back(std::move(node_values));
  dims_.push_back({nx, ny});
  while (dims_.back()[0] > 1 || dims_.back()[1] > 1) {
    const auto [px, py] = dims_.back();
    const int cx = (px + 1) / 2, cy = (py + 1) / 2;
    const auto& prev = levels_.back();
    std::vector<double> cur(static_cast<std::size_t>(cx) * cy, -kInf);
    for (int i = 0; i < px; ++i)
      for (int j = 0; j < py; ++j) {
        double& slot = cur[static_cast<std::size_t>(i / 2) * cy + j / 2];
        slot = std::max(slot, prev[static_cast<std::size_t>(i) * py + j]);
      }
    levels_.push_back(std::move(cur));
    dims_.push_back({cx, cy});
  }
}

double MaxPyramid::block_max(int level, int bi, int bj) const {
  return levels_[level][static_cast<std::size_t>(bi) * dims_[level][1] + bj];
}

void MaxPyramid::collect(std::span<const double> x, double r, int level,
                         int bi, int bj, double& best) const {
  const int span = 1 << level;
  const int i0 = bi * span, j0 = bj * span;
  const int i1 = std::min(i0 + span, spec_.counts[0]) - 1;
  const int j1 = (spec_.n == 2) ? std::min(j0 + span, spec_.counts[1]) - 1 : 0;
  if (i0 > i1 || j0 > j1) return;
  const double m = block_max(level, bi, bj);
  if (m <= best) return;  // cannot improve
  // block bounding box in coordinates
  const double ax = spec_.coord(0, i0), bx = spec_.coord(0, i1);
  double ay = 0.0, by = 0.0;
  if (spec_.n == 2) {
    ay = spec_.coord(1, j0);
    by = spec_.coord(1, j1);
  }
  // nearest / farthest distance from x to the block (node centers)
  auto axdist = [](double v, double a, double b, double& lo, double& hi) {
    const double c = std::clamp(v, a, b);
    lo = std::abs(v - c);
    hi = std::max(std::abs(v - a), std::abs(v - b));
  };
  double lx, hx, ly = 0.0, hy = 0.0;
  axdist(x[0], ax, bx, lx, hx);
  if (spec_.n == 2) axdist(x[1], ay, by, ly, hy);
  const double dlo = std::hypot(lx, ly), dhi = std::hypot(hx, hy);
  if (dlo >= r) return;                    // block entirely outside the ball
  if (dhi < r || level == 0) {             // entirely inside, or single node
    if (level == 0 && !(dlo < r)) return;
    best = std::max(best, m);
    return;
  }
  for (int ci = 0; ci < 2; ++ci)
    for (int cj = 0; cj < (spec_.n == 2 ? 2 : 1); ++cj) {
      const int ni = bi * 2 + ci, nj = bj * 2 + cj;
      if (ni >= dims_[level - 1][0] || nj >= dims_[level - 1][1]) continue;
      collect(x, r, level - 1, ni, nj, best);
    }
}

double MaxPyramid::max_in_ball(std::span<const double> x, double r) const {
  double best = -kInf;
  const int top = static_cast<int>(levels_.size()) - 1;
  collect(x, r, top, 0, 0, best);
  return best;
}

// ---------------------------------------------------------------------------
// HalfField

HalfField HalfField::sample(
    const HalfGridSpec& spec,
    const std::function<void(std::span<const double>, double,
                             std::span<double>)>& f,
    Exterior ext) {
  spec.validate();
  HalfField ue;
  ue.spec = spec;
  const int d = spec.boundary.d;
  ue.values.resize(spec.total() * d);
  ue.boundary = VectorField::sample(
      spec.boundary,
      [&](std::span<const double> x, std::span<double> out) { f(x, 0.0, out); },
      std::move(ext));
  std::vector<double> x(spec.boundary.n);
  for (std::int64_t b = 0; b < spec.boundary.total(); ++b) {
    spec.boundary.node(b, x);
    for (int l = 0; l < spec.levels(); ++l) f(x, spec.zlevels[l], ue.at(b, l));
  }
  return ue;
}

std::vector<double> halfgrid_gradient(const HalfField& ue, Exec mode) {
  const HalfGridSpec& hs = ue.spec;
  const GridSpec& g = hs.boundary;
  const int n = g.n, d = g.d, L = hs.levels();
  const int gsz = (n + 1) * d;
  std::vector<double> out(static_cast<std::size_t>(hs.total()) * gsz);

  std::int64_t stride[4];
  {
    std::int64_t s = 1;
    for (int a = n - 1; a >= 0; --a) {
      stride[a] = s;
      s *= g.counts[a];
    }
  }

  par::for_each(g.total(), mode, [&](std::int64_t b) {
    int mi[4];
    hs.boundary.multi_index(b, {mi, static_cast<std::size_t>(n)});
    for (int l = 0; l < L; ++l) {
      double* D = out.data() + hs.index(b, l) * gsz;
      // x-derivatives at fixed level
      for (int a = 0; a < n; ++a) {
        const int c = mi[a];
        std::int64_t bp = b, bm = b;
        double denom;
        if (c == 0) {
          bp = b + stride[a];
          denom = g.h;
        } else if (c == g.counts[a] - 1) {
          bm = b - stride[a];
          denom = g.h;
        } else {
          bp = b + stride[a];
          bm = b - stride[a];
          denom = 2.0 * g.h;
        }
        const double* vp = ue.values.data() + hs.index(bp, l) * d;
        const double* vm = ue.values.data() + hs.index(bm, l) * d;
        for (int k = 0; k < d; ++k) D[a * d + k] = (vp[k] - vm[k]) / denom;
      }
      // z-derivative: non-uniform 3-point stencil. Level 0 closes with the
      // boundary trace at z = 0 (the extension is smooth for z > 0 and the
      // trace is known).
      const double z0 = hs.zlevels[l];
      const double* v0 = ue.values.data() + hs.index(b, l) * d;
      double zm, zp;
      const double* vm;
      const double* vp;
      if (l == 0) {
        zm = 0.0;
        vm = ue.boundary.values.data() + b * d;
      } else {
        zm = hs.zlevels[l - 1];
        vm = ue.values.data() + hs.index(b, l - 1) * d;
      }
      if (l == L - 1) {
        // one-sided toward the interior
        const double hm = z0 - zm;
        for (int k = 0; k < d; ++k) D[n * d + k] = (v0[k] - vm[k]) / hm;
      } else {
        zp = hs.zlevels[l + 1];
        vp = ue.values.data() + hs.index(b, l + 1) * d;
        const double hm = z0 - zm, hp = zp - z0;
        // f'(z0) for non-uniform spacing
        const double wl = -hp / (hm * (hm + hp));
        const double wc = (hp - hm) / (hm * hp);
        const double wr = hm / (hp * (hm + hp));
        for (int k = 0; k < d; ++k)
          D[n * d + k] = wl * vm[k] + wc * v0[k] + wr * vp[k];
      }
    }
  });
  return out;
}

}  // namespace fracmap
