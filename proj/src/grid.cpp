#include "fracmap/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fracmap {

void GridSpec::validate() const {
  if (n < 1) throw std::invalid_argument("GridSpec: n must be >= 1");
  if (d < 1) throw std::invalid_argument("GridSpec: d must be >= 1");
  if (!(h > 0.0)) throw std::invalid_argument("GridSpec: h must be > 0");
  if (static_cast<int>(origin.size()) != n)
    throw std::invalid_argument("GridSpec: origin size mismatch");
  if (static_cast<int>(counts.size()) != n)
    throw std::invalid_argument("GridSpec: counts size mismatch");
  for (int c : counts)
    if (c < 2) throw std::invalid_argument("GridSpec: counts must be >= 2");
}

double GridSpec::boundary_distance(std::span<const double> x) const {
  double dist = std::numeric_limits<double>::infinity();
  for (int a = 0; a < n; ++a) {
    dist = std::min(dist, x[a] - lo(a));
    dist = std::min(dist, hi(a) - x[a]);
  }
  return dist;
}

std::int64_t GridSpec::nearest_node(std::span<const double> x) const {
  std::int64_t idx = 0;
  for (int a = 0; a < n; ++a) {
    int i = static_cast<int>(std::lround((x[a] - origin[a]) / h));
    i = std::clamp(i, 0, counts[a] - 1);
    idx = idx * counts[a] + i;
  }
  return idx;
}

void HalfGridSpec::validate() const {
  boundary.validate();
  if (zlevels.empty())
    throw std::invalid_argument("HalfGridSpec: no z-levels");
  double prev = 0.0;
  for (double z : zlevels) {
    if (!(z > prev))
      throw std::invalid_argument("HalfGridSpec: z-levels must be positive and strictly increasing");
    prev = z;
  }
  if (zlevels.front() > boundary.h + 1e-15)
    throw std::invalid_argument("HalfGridSpec: smallest z-level must be <= boundary spacing");
}

void HalfGridSpec::zcell(int level, double& zlo, double& zhi) const {
  const int L = levels();
  zlo = (level == 0) ? 0.0 : 0.5 * (zlevels[level - 1] + zlevels[level]);
  if (level == L - 1) {
    const double dz = (L >= 2) ? (zlevels[L - 1] - zlevels[L - 2]) : zlevels[0];
    zhi = zlevels[L - 1] + 0.5 * dz;
  } else {
    zhi = 0.5 * (zlevels[level] + zlevels[level + 1]);
  }
}

std::vector<double> HalfGridSpec::geometric_levels(double z0, double zmax,
                                                   double ratio) {
  if (!(z0 > 0.0) || !(zmax >= z0) || !(ratio > 1.0))
    throw std::invalid_argument("geometric_levels: need 0 < z0 <= zmax, ratio > 1");
  std::vector<double> z;
  double v = z0;
  while (v < zmax * (1.0 + 1e-12)) {
    z.push_back(v);
    v *= ratio;
  }
  if (z.empty() || z.back() < zmax * (1.0 - 1e-12)) z.push_back(zmax);
  return z;
}

}  // namespace fracmap
