// Benchmark of the parallel kernels against their serial reference paths.
// The two paths share one chunk decomposition, so the outputs agree bitwise
// and the comparison isolates the threading speedup.

#include <chrono>
#include <cstdio>

#include "fracmap/energy.hpp"
#include "fracmap/extension.hpp"
#include "fracmap/field.hpp"
#include "fracmap/parallel.hpp"

using namespace fracmap;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

template <class F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const double t0 = now_ms();
    f();
    best = std::min(best, now_ms() - t0);
  }
  return best;
}

GridSpec grid(int res, double halfwidth) {
  GridSpec g;
  g.n = 2;
  g.d = 2;
  g.h = 1.0 / res;
  const int half = static_cast<int>(halfwidth * res);
  g.origin = {-half * g.h, -half * g.h};
  g.counts = {2 * half + 1, 2 * half + 1};
  return g;
}

void row(const char* name, double serial_ms, double parallel_ms,
         double check_serial, double check_parallel) {
  std::printf("%-24s %10.1f ms %10.1f ms %8.2fx   %s\n", name, serial_ms,
              parallel_ms, serial_ms / parallel_ms,
              check_serial == check_parallel ? "bitwise equal" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", par::max_threads());
  std::printf("%-24s %13s %13s %9s\n", "kernel", "serial", "parallel",
              "speedup");

  // nonlocal pair energy
  {
    const VectorField u = analytic_vortex(grid(96, 1.5));
    const Ball omega{{0.0, 0.0}, 0.75};
    EnergyOptions so, po;
    so.mode = Exec::Serial;
    po.mode = Exec::Parallel;
    double es = 0, ep = 0;
    const double ts = time_best_of(2, [&] { es = half_energy(u, omega, so).value; });
    const double tp = time_best_of(2, [&] { ep = half_energy(u, omega, po).value; });
    row("half_energy", ts, tp, es, ep);
  }

  // Poisson extension
  {
    const VectorField u = analytic_vortex(grid(96, 1.0));
    HalfGridSpec hs;
    hs.boundary = grid(96, 0.5);
    hs.zlevels = HalfGridSpec::geometric_levels(0.5 / 96, 0.5);
    ExtendOptions so, po;
    so.mode = Exec::Serial;
    po.mode = Exec::Parallel;
    HalfField us, up;
    const double ts = time_best_of(2, [&] { us = poisson_extend(u, hs, so); });
    const double tp = time_best_of(2, [&] { up = poisson_extend(u, hs, po); });
    double cs = 0, cp = 0;
    for (double v : us.values) cs += v;
    for (double v : up.values) cp += v;
    row("poisson_extend", ts, tp, cs, cp);

    // half-ball energy reduction on the extension
    const auto grad = halfgrid_gradient(up);
    const double x0[2] = {0.0, 0.0};
    double hs_val = 0, hp_val = 0;
    const double ts2 = time_best_of(3, [&] {
      hs_val = halfball_energy_cells(up, {x0, 2}, 0.45, &grad, Exec::Serial);
    });
    const double tp2 = time_best_of(3, [&] {
      hp_val = halfball_energy_cells(up, {x0, 2}, 0.45, &grad, Exec::Parallel);
    });
    row("halfball_energy", ts2, tp2, hs_val, hp_val);
  }
  return 0;
}
