#include "charflow/flow_engine.hpp"

#include <algorithm>
#include <cmath>

namespace charflow {

namespace {
std::atomic<int> g_workers{1};
}

int worker_count() { return g_workers.load(); }

void set_worker_count(int n) { g_workers.store(std::max(1, n)); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& chunk_fn) {
  const int workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1 || n == 0) {
    chunk_fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(chunk_fn, lo, hi);
  }
  for (auto& t : pool) t.join();
}

namespace {

Point rk4_step(const Point& x, double h, const VectorFieldSpec& field, double t_so_far) {
  const auto f = [&](const Point& p) {
    Point v = field.eval(p);
    if (!finite(v)) throw FlowError("nonfinite field value during flow integration", p, t_so_far);
    return v;
  };
  const Point k1 = f(x);
  const Point k2 = f(x + (h / 2) * k1);
  const Point k3 = f(x + (h / 2) * k2);
  const Point k4 = f(x + h * k3);
  return x + (h / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

Point integrate_flow(const Point& x, double t, const VectorFieldSpec& field, const FlowParams& prm) {
  if (!std::isfinite(field.lipschitz_bound))
    throw ArgumentError("flow integration requires a finite Lipschitz bound");
  if (std::abs(t) > prm.horizon * (1.0 + 1e-12))
    throw ArgumentError("flow integration time exceeds the configured horizon");
  if (field.closed_form_flow) return field.closed_form_flow(x, t);
  if (t == 0.0) return x;

  const int n_steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) / prm.step - 1e-12)));
  const double h = t / n_steps;
  Point state = x;
  for (int i = 0; i < n_steps; ++i) state = rk4_step(state, h, field, i * h);
  return state;
}

ExitTime exit_time(const Point& x, Direction dir, const DomainSpec& domain,
                   const VectorFieldSpec& field, const FlowParams& prm) {
  if (!domain.membership(x)) throw DomainError("exit_time called outside the domain");
  const double sgn = dir == Direction::forward ? 1.0 : -1.0;
  const double tol = prm.bisect_tol_rel * std::max(domain.bounding_box.diameter(), 1.0);

  // March incrementally until the membership predicate flips, then bisect
  // the crossing inside the bracketing step.
  Point cur = x;
  double t = 0.0;
  while (t < prm.horizon * (1.0 - 1e-15)) {
    const double step = std::min(prm.step, prm.horizon - t);
    const Point next = integrate_flow(cur, sgn * step, field, prm);
    if (!domain.membership(next)) {
      double lo = 0.0, hi = step;
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (domain.membership(integrate_flow(cur, sgn * mid, field, prm)))
          lo = mid;
        else
          hi = mid;
      }
      const double local = 0.5 * (lo + hi);
      return ExitTime{t + local, false, integrate_flow(cur, sgn * local, field, prm)};
    }
    cur = next;
    t += step;
  }
  return ExitTime{prm.horizon, true, cur};
}

ExitTimes exit_times(const Point& x, const DomainSpec& domain, const VectorFieldSpec& field,
                     const FlowParams& prm) {
  return ExitTimes{exit_time(x, Direction::backward, domain, field, prm),
                   exit_time(x, Direction::forward, domain, field, prm)};
}

namespace {

// Jacobian of the field by central differences.
std::array<Point, 2> field_jacobian(const VectorFieldSpec& field, const Point& x, int dim) {
  std::array<Point, 2> cols{Point{0.0, 0.0}, Point{0.0, 0.0}};
  const double h = 1e-6 * std::max(1.0, norm2(x));
  for (int j = 0; j < dim; ++j) {
    Point xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    cols[j] = (1.0 / (2.0 * h)) * (field.eval(xp) - field.eval(xm));
  }
  return cols;
}

}  // namespace

double check_measure_invariance(const VectorFieldSpec& field, const Box& cell, double t,
                                int n_samples, const FlowParams& prm) {
  if (cell.volume() <= 0.0) throw ArgumentError("measure-invariance check needs a cell of positive volume");
  if (n_samples < 1) throw ArgumentError("measure-invariance check needs at least one sample");

  const int dim = cell.dim;
  const int n_steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) / prm.step - 1e-12)));
  const double h = t / n_steps;

  // det dPhi/dx at each sample: propagate J' = DF(Phi) J alongside the flow
  // with the same fourth-order stepping.
  double det_sum = 0.0;
  const int per_axis = std::max(1, static_cast<int>(std::round(std::pow(n_samples, 1.0 / dim))));
  int used = 0;
  std::vector<Point> lattice;
  if (dim == 1) {
    for (int i = 0; i < per_axis; ++i)
      lattice.push_back({cell.lo[0] + (i + 0.5) / per_axis * (cell.hi[0] - cell.lo[0]), 0.0});
  } else {
    for (int i = 0; i < per_axis; ++i)
      for (int j = 0; j < per_axis; ++j)
        lattice.push_back({cell.lo[0] + (i + 0.5) / per_axis * (cell.hi[0] - cell.lo[0]),
                           cell.lo[1] + (j + 0.5) / per_axis * (cell.hi[1] - cell.lo[1])});
  }

  for (const Point& x0 : lattice) {
    Point x = x0;
    // J stored column-major; starts as identity.
    std::array<Point, 2> J{Point{1.0, 0.0}, Point{0.0, 1.0}};
    for (int s = 0; s < n_steps; ++s) {
      const auto rhs = [&](const Point& p, const std::array<Point, 2>& Jc,
                           Point& dx, std::array<Point, 2>& dJ) {
        dx = field.eval(p);
        const auto A = field_jacobian(field, p, dim);
        for (int c = 0; c < 2; ++c) {
          dJ[c][0] = A[0][0] * Jc[c][0] + A[1][0] * Jc[c][1];
          dJ[c][1] = A[0][1] * Jc[c][0] + A[1][1] * Jc[c][1];
        }
      };
      Point k1x, k2x, k3x, k4x;
      std::array<Point, 2> k1J, k2J, k3J, k4J;
      rhs(x, J, k1x, k1J);
      std::array<Point, 2> J2{J[0] + (h / 2) * k1J[0], J[1] + (h / 2) * k1J[1]};
      rhs(x + (h / 2) * k1x, J2, k2x, k2J);
      std::array<Point, 2> J3{J[0] + (h / 2) * k2J[0], J[1] + (h / 2) * k2J[1]};
      rhs(x + (h / 2) * k2x, J3, k3x, k3J);
      std::array<Point, 2> J4{J[0] + h * k3J[0], J[1] + h * k3J[1]};
      rhs(x + h * k3x, J4, k4x, k4J);
      x = x + (h / 6) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
      for (int c = 0; c < 2; ++c)
        J[c] = J[c] + (h / 6) * (k1J[c] + 2.0 * k2J[c] + 2.0 * k3J[c] + k4J[c]);
    }
    const double det = dim == 1 ? J[0][0] : J[0][0] * J[1][1] - J[1][0] * J[0][1];
    det_sum += det;
    ++used;
  }
  return std::abs(det_sum / used - 1.0);
}

}  // namespace charflow
