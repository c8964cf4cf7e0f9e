// Independent reference computations for the tests: brute-force ray tracing
// of the slab semigroup, one-dimensional quadrature, and the bump moments.
// Nothing here goes through the characteristic-grid code paths.
#pragma once

#include <cmath>
#include <functional>

namespace oracles {

// Simpson quadrature on [a, b].
inline double simpson(double a, double b, int n, const std::function<double(double)>& f) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// The mollifier bump rho_1 on [0, 1]: 30 u^2 (1-u)^2.
inline double unit_bump(double u) {
  return (u <= 0.0 || u >= 1.0) ? 0.0 : 30.0 * u * u * (1.0 - u) * (1.0 - u);
}

inline double unit_bump_mass() {
  return simpson(0.0, 1.0, 2000, [](double u) { return unit_bump(u); });
}

inline double unit_bump_first_moment() {
  return simpson(0.0, 1.0, 2000, [](double u) { return u * unit_bump(u); });
}

// Brute-force ray tracing for the unit slab with gain alpha at re-entry:
// walk the backward characteristic through x - t, re-entering at 1 each time
// it leaves through 0, multiplying by alpha per crossing.
inline double slab_ray_trace(double x, double t, double alpha,
                             const std::function<double(double)>& f0) {
  double pos = x - t;
  double gain = 1.0;
  int guard = 0;
  while (pos < 0.0 && guard++ < 100000) {
    pos += 1.0;
    gain *= alpha;
  }
  return gain * f0(pos);
}

// Crossing count of the same ray.
inline int slab_crossings(double x, double t) {
  double pos = x - t;
  int k = 0;
  while (pos < 0.0) {
    pos += 1.0;
    ++k;
  }
  return k;
}

}  // namespace oracles
