#include "charflow/char_grid.hpp"

#include <algorithm>
#include <cmath>

namespace charflow {

GridFunction::GridFunction(GridPtr grid, double p) : grid_(std::move(grid)), p_(p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw ArgumentError("exponent p must lie in (1, inf)");
  v_.assign(grid_->n_nodes(), 0.0);
}

GridFunction::GridFunction(GridPtr grid, double p, std::vector<double> values)
    : grid_(std::move(grid)), p_(p), v_(std::move(values)) {
  if (!(p > 1.0) || !std::isfinite(p)) throw ArgumentError("exponent p must lie in (1, inf)");
  if (v_.size() != grid_->n_nodes()) throw ArgumentError("value array does not match grid shape");
}

GridFunction GridFunction::from_function(GridPtr grid, double p,
                                         const std::function<double(const Point&)>& fn) {
  GridFunction f(grid, p);
  const auto& g = *f.grid();
  for (std::size_t i = 0; i < g.n_characteristics(); ++i) {
    auto vals = f.char_values(i);
    for (std::size_t j = 0; j < vals.size(); ++j) vals[j] = fn(g.node(i, j));
  }
  return f;
}

GridFunction& GridFunction::operator+=(const GridFunction& o) {
  if (o.grid_ != grid_) throw ArgumentError("grid mismatch in GridFunction arithmetic");
  for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
  return *this;
}
GridFunction& GridFunction::operator-=(const GridFunction& o) {
  if (o.grid_ != grid_) throw ArgumentError("grid mismatch in GridFunction arithmetic");
  for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
  return *this;
}
GridFunction& GridFunction::operator*=(double s) {
  for (double& v : v_) v *= s;
  return *this;
}
GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(double s, GridFunction a) { return a *= s; }

namespace {

// Forward stay time from a seed that may itself sit on the boundary: step
// once to get strictly inside, then march like exit_time.
ExitTime forward_length(const Point& seed, const DomainSpec& domain, const VectorFieldSpec& field,
                        const FlowParams& prm) {
  const double tol = prm.bisect_tol_rel * std::max(domain.bounding_box.diameter(), 1.0);
  Point cur = integrate_flow(seed, prm.step, field, prm);
  if (!domain.membership(cur))
    throw ConfigError("seed does not enter the domain within one integrator step");
  double t = prm.step;
  while (t < prm.horizon * (1.0 - 1e-15)) {
    const double step = std::min(prm.step, prm.horizon - t);
    const Point next = integrate_flow(cur, step, field, prm);
    if (!domain.membership(next)) {
      double lo = 0.0, hi = step;
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (domain.membership(integrate_flow(cur, mid, field, prm)))
          lo = mid;
        else
          hi = mid;
      }
      const double local = 0.5 * (lo + hi);
      return ExitTime{t + local, false, integrate_flow(cur, local, field, prm)};
    }
    cur = next;
    t += step;
  }
  return ExitTime{prm.horizon, true, cur};
}

}  // namespace

GridPtr build_grid(const GridBuildInput& in, double ds, double horizon) {
  if (!(ds > 0.0)) throw ArgumentError("grid step ds must be positive");
  if (horizon < ds) throw ArgumentError("horizon must be at least one grid step");
  if (in.seeds.empty()) throw ConfigError("scenario produced no characteristics (empty domain?)");

  FlowParams prm;
  prm.step = ds / 4.0;
  prm.horizon = horizon;

  std::vector<Characteristic> chars;
  std::vector<Point> nodes;
  for (const Seed& s : in.seeds) {
    if (!(s.weight > 0.0)) throw ConfigError("characteristic weights must be strictly positive");
    Characteristic c;
    c.inlet = s.at;
    c.weight = s.weight;
    c.interior_loop = s.interior;
    if (s.interior && s.loop_period > 0.0) {
      // Closed orbit: shrink the step so an integer number of cells tiles it.
      const long m = std::max<long>(2, std::lround(s.loop_period / ds));
      c.ds = s.loop_period / static_cast<double>(m);
      c.length = s.loop_period;
      c.n_nodes = static_cast<std::size_t>(m);  // node m would repeat node 0
      c.end_gap = 0.0;
      c.horizon_capped = false;
    } else if (s.interior) {
      // Unknown period: window the orbit at the horizon.
      const long m = std::lround(horizon / ds);
      c.ds = ds;
      c.length = m * ds;
      c.n_nodes = static_cast<std::size_t>(m);
      c.end_gap = 0.0;
      c.horizon_capped = true;
    } else {
      const ExitTime fwd = forward_length(s.at, in.domain, in.field, prm);
      c.ds = ds;
      c.length = fwd.value;
      c.horizon_capped = fwd.capped;
      c.exit_point = fwd.footpoint;
      // Cell count, tolerant of bisection noise around exact multiples.
      double cells_f = c.length / ds;
      long cells = static_cast<long>(std::floor(cells_f + 1e-6));
      if (cells < 1) cells = 1;
      c.n_nodes = static_cast<std::size_t>(cells) + 1;
      c.end_gap = std::max(0.0, c.length - static_cast<double>(cells) * ds);
      if (c.end_gap < 1e-9 * ds) c.end_gap = 0.0;
    }
    c.offset = nodes.size();
    // Node positions by stepping the flow once per cell.
    Point x = s.at;
    nodes.push_back(x);
    for (std::size_t j = 1; j < c.n_nodes; ++j) {
      x = integrate_flow(x, c.ds, in.field, prm);
      nodes.push_back(x);
    }
    chars.push_back(c);
  }
  return std::make_shared<CharacteristicGrid>(std::move(chars), std::move(nodes), ds, horizon);
}

TraceVector zero_trace(const GridPtr& grid, Side side, double p) {
  TraceVector t;
  t.side = side;
  t.grid = grid;
  t.p = p;
  const auto& idx = side == Side::incoming ? grid->incoming_chars() : grid->outgoing_chars();
  for (std::size_t i : idx) {
    const auto& c = grid->ch(i);
    t.char_index.push_back(i);
    t.weights.push_back(c.weight);
    if (side == Side::incoming)
      t.stay_times.push_back(c.horizon_capped ? kInf : c.length);  // tau_plus at the inlet
    else
      t.stay_times.push_back(c.length);  // tau_minus at the exit
    t.values.push_back(0.0);
  }
  return t;
}

namespace {

// Extrapolated value at the exact exit point (linear from the last cell).
double exit_value(const CharacteristicGrid& g, std::size_t i, std::span<const double> v) {
  const auto& c = g.ch(i);
  const std::size_t m = c.n_nodes - 1;
  if (c.end_gap <= 0.0 || c.n_nodes < 2) return v[m];
  return v[m] + c.end_gap / c.ds * (v[m] - v[m - 1]);
}

// Integral of u along characteristic i: trapezoid over the uniform nodes plus
// the partial end cell (loops: periodic rectangle rule).
double char_integral(const CharacteristicGrid& g, std::size_t i, std::span<const double> u) {
  const auto& c = g.ch(i);
  if (c.interior_loop) {
    double s = 0.0;
    for (double x : u) s += x;
    return c.ds * s;
  }
  if (c.n_nodes == 1) return c.length * u[0];
  double s = 0.5 * (u[0] + u[c.n_nodes - 1]);
  for (std::size_t j = 1; j + 1 < c.n_nodes; ++j) s += u[j];
  s *= c.ds;
  if (c.end_gap > 0.0) {
    const std::size_t m = c.n_nodes - 1;
    const double u_exit = u[m] + c.end_gap / c.ds * (u[m] - u[m - 1]);
    s += 0.5 * c.end_gap * (u[m] + u_exit);
  }
  return s;
}

template <typename NodeFn>
double weighted_reduce(const CharacteristicGrid& g, const GridFunction& f, NodeFn&& node_fn) {
  const std::size_t n = g.n_characteristics();
  std::vector<double> partial(n, 0.0);
  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> buf;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto vals = f.char_values(i);
      buf.resize(vals.size());
      for (std::size_t j = 0; j < vals.size(); ++j) buf[j] = node_fn(vals[j]);
      partial[i] = g.ch(i).weight * char_integral(g, i, buf);
    }
  });
  double total = 0.0;
  for (double x : partial) total += x;
  return total;
}

}  // namespace

double lp_norm(const GridFunction& f) {
  const double p = f.p();
  const double s = weighted_reduce(*f.grid(), f, [p](double v) { return std::pow(std::abs(v), p); });
  return std::pow(s, 1.0 / p);
}

double integral(const GridFunction& u) {
  return weighted_reduce(*u.grid(), u, [](double v) { return v; });
}

GridFunction apply_generator(const GridFunction& f) {
  const auto& g = *f.grid();
  GridFunction out(f.grid(), f.p());
  parallel_for(g.n_characteristics(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& c = g.ch(i);
      const auto v = f.char_values(i);
      auto d = out.char_values(i);
      const std::size_t m = c.n_nodes;
      const double ds = c.ds;
      if (c.interior_loop) {
        for (std::size_t j = 0; j < m; ++j) {
          const double vp = v[(j + 1) % m];
          const double vm = v[(j + m - 1) % m];
          d[j] = -(vp - vm) / (2.0 * ds);
        }
        continue;
      }
      if (m < 2) throw GridError("generator needs at least two nodes per characteristic");
      if (m == 2) {
        const double slope = (v[1] - v[0]) / ds;
        d[0] = d[1] = -slope;
        continue;
      }
      d[0] = -(-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * ds);
      for (std::size_t j = 1; j + 1 < m; ++j) d[j] = -(v[j + 1] - v[j - 1]) / (2.0 * ds);
      d[m - 1] = -(3.0 * v[m - 1] - 4.0 * v[m - 2] + v[m - 3]) / (2.0 * ds);
    }
  });
  return out;
}

TraceVector trace(const GridFunction& f, Side side) {
  const auto& g = *f.grid();
  TraceVector t = zero_trace(f.grid(), side, f.p());
  if (t.size() == 0) throw GridError("grid has no boundary nodes on the requested side");
  for (std::size_t k = 0; k < t.size(); ++k) {
    const std::size_t i = t.char_index[k];
    const auto v = f.char_values(i);
    t.values[k] = side == Side::incoming ? v[0] : exit_value(g, i, v);
  }
  return t;
}

double trace_norm(const TraceVector& t, TraceSpace space) {
  const double p = t.p;
  double s = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    double w = t.weights[k];
    const double tau = std::min(t.stay_times[k], 1.0);  // capped times enter as infinity
    if (space == TraceSpace::Y) w *= tau;
    if (space == TraceSpace::Ytilde) w *= std::pow(tau, 1.0 - p);
    s += w * std::pow(std::abs(t.values[k]), p);
  }
  return std::pow(s, 1.0 / p);
}

namespace {

// Bump rho_n(s) = 30 n (ns)^2 (1-ns)^2 on [0, 1/n]; unit mass.
double bump(double s, int n) {
  const double u = n * s;
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return 30.0 * n * u * u * (1.0 - u) * (1.0 - u);
}

// Exact integral of rho_n(s) * (linear in s) over [a, b] by 3-point Gauss
// (the integrand is a quintic polynomial there).
double bump_cell(double a, double b, double va, double vb, int n) {
  static const double xi[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
  static const double wq[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const double h = 0.5 * (b - a), mid = 0.5 * (a + b);
  double acc = 0.0;
  for (int q = 0; q < 3; ++q) {
    const double s = mid + h * xi[q];
    const double theta = (s - a) / (b - a);
    acc += wq[q] * bump(s, n) * ((1.0 - theta) * va + theta * vb);
  }
  return acc * h;
}

}  // namespace

GridFunction mollify(const GridFunction& f, int n) {
  if (n < 1) throw ArgumentError("mollifier index must be positive");
  const auto& g = *f.grid();
  const double support = 1.0 / n;
  for (const auto& c : g.characteristics())
    if (support < c.ds * (1.0 - 1e-12))
      throw GridError("mollifier support 1/n is below the grid resolution");

  GridFunction out(f.grid(), f.p());
  parallel_for(g.n_characteristics(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& c = g.ch(i);
      const auto v = f.char_values(i);
      auto o = out.char_values(i);
      const long m = static_cast<long>(c.n_nodes);
      for (long j = 0; j < m; ++j) {
        // int_0^{min(tau_minus, 1/n)} rho_n(s) f(arc j*ds - s) ds, split at
        // the grid cells so the piecewise-linear integrand is exact; on
        // loops tau_minus is infinite and the arc wraps.
        const double tau_m = c.interior_loop ? kInf : j * c.ds;
        const double upper = std::min(support, tau_m);
        if (upper <= 0.0) {
          o[j] = 0.0;
          continue;
        }
        double acc = 0.0;
        double a = 0.0;
        long k = j;  // cell between backward nodes k-1 and k
        while (upper - a > 1e-15 * support) {
          const double b = std::min(upper, static_cast<double>(j - k + 1) * c.ds);
          double va, vb;  // values at nodes k and k-1
          if (c.interior_loop) {
            const long kw = ((k % m) + m) % m;
            const long km1w = (((k - 1) % m) + m) % m;
            va = v[kw];
            vb = v[km1w];
          } else {
            va = v[k];
            vb = v[k > 0 ? k - 1 : 0];
          }
          // arc(s) = j*ds - s; within the cell theta = arc/ds - (k-1),
          // theta = 1 at node k and 0 at node k-1
          const double ta = static_cast<double>(j - k + 1) - a / c.ds;
          const double tb = static_cast<double>(j - k + 1) - b / c.ds;
          const double fa = vb + ta * (va - vb);
          const double fb = vb + tb * (va - vb);
          acc += bump_cell(a, b, fa, fb, n);
          a = b;
          --k;
        }
        o[j] = acc;
      }
    }
  });
  return out;
}

GridFunction lift_outgoing_trace(const TraceVector& h) {
  if (h.side != Side::outgoing) throw ArgumentError("lift expects an outgoing trace");
  const auto& g = *h.grid;
  GridFunction f(h.grid, h.p);
  // Zero away from characteristics with a genuine exit; three branches by
  // finiteness of the stay times.
  for (std::size_t k = 0; k < h.size(); ++k) {
    const std::size_t i = h.char_index[k];
    const auto& c = g.ch(i);
    auto vals = f.char_values(i);
    for (std::size_t j = 0; j < c.n_nodes; ++j) {
      const double tau_m = g.tau_minus(i, j);
      const double tau_p = g.tau_plus(i, j);
      if (std::isinf(tau_p)) {
        vals[j] = 0.0;
      } else if (std::isinf(tau_m)) {
        vals[j] = h.values[k] * std::exp(-tau_p);
      } else {
        const double denom = tau_m + tau_p;
        vals[j] = denom > 0.0 ? h.values[k] * tau_m * std::exp(-tau_p) / denom : 0.0;
      }
    }
  }
  return f;
}

namespace {

// M_lambda applied to an incoming trace: push each inlet value to the exit of
// the same characteristic with exponential decay over the transit time.
TraceVector push_m_lambda(const TraceVector& u, double lambda) {
  const auto& g = *u.grid;
  TraceVector out = zero_trace(u.grid, Side::outgoing, u.p);
  std::vector<double> by_char(g.n_characteristics(), 0.0);
  for (std::size_t k = 0; k < u.size(); ++k) {
    const std::size_t i = u.char_index[k];
    const auto& c = g.ch(i);
    if (c.interior_loop || c.horizon_capped) continue;
    by_char[i] = u.values[k] * std::exp(-lambda * c.length);
  }
  for (std::size_t k = 0; k < out.size(); ++k) out.values[k] = by_char[out.char_index[k]];
  return out;
}

double ytilde_norm_diff(const TraceVector& a, const TraceVector& b) {
  TraceVector d = a;
  for (std::size_t k = 0; k < d.size(); ++k) d.values[k] -= b.values[k];
  return trace_norm(d, TraceSpace::Ytilde);
}

}  // namespace

double compatibility_defect(const TraceVector& psi_plus, const TraceVector& psi_minus,
                            double lambda) {
  if (!(lambda > 0.0)) throw ArgumentError("lambda must be positive");
  if (psi_plus.side != Side::outgoing || psi_minus.side != Side::incoming)
    throw ArgumentError("compatibility defect expects (outgoing, incoming) traces");
  return ytilde_norm_diff(psi_plus, push_m_lambda(psi_minus, lambda));
}

double pair_space_norm(const TraceVector& psi_plus, const TraceVector& psi_minus) {
  const double p = psi_plus.p;
  const double a = trace_norm(psi_plus, TraceSpace::Y);
  const double b = trace_norm(psi_minus, TraceSpace::Y);
  const double c = ytilde_norm_diff(psi_plus, push_m_lambda(psi_minus, 1.0));
  return std::pow(std::pow(a, p) + std::pow(b, p) + std::pow(c, p), 1.0 / p);
}

}  // namespace charflow
