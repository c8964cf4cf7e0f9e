#include "charflow/semigroup.hpp"

#include <algorithm>
#include <cmath>

namespace charflow {

TimeGrid time_grid(const CharacteristicGrid& g, double t) {
  return TimeGrid{g.ds(), exact_steps(t, g.ds())};
}

std::size_t exact_steps(double t, double dt) {
  if (t < 0.0) throw ArgumentError("evolution time must be nonnegative");
  const double k = t / dt;
  const double kr = std::round(k);
  if (std::abs(k - kr) > 1e-9 * std::max(1.0, k))
    throw ArgumentError("exact-shift mode needs t to be a multiple of the grid step");
  return static_cast<std::size_t>(kr);
}

namespace {

std::size_t loop_shift(const Characteristic& c, double t) {
  const double k = t / c.ds;
  return static_cast<std::size_t>(std::llround(k)) % c.n_nodes;
}

// In-place single marching step: shift every characteristic one cell.
// Boundary characteristics free the inlet slot (set to zero here; the caller
// injects); loops rotate.
void shift_once(GridFunction& f) {
  const auto& g = *f.grid();
  parallel_for(g.n_characteristics(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      auto v = f.char_values(i);
      const auto& c = g.ch(i);
      if (c.interior_loop) {
        const double last = v[c.n_nodes - 1];
        for (std::size_t j = c.n_nodes - 1; j >= 1; --j) v[j] = v[j - 1];
        v[0] = last;
      } else {
        for (std::size_t j = c.n_nodes - 1; j >= 1; --j) v[j] = v[j - 1];
        v[0] = 0.0;
      }
    }
  });
}

// Outgoing trace values of the current marching state.
std::vector<double> outgoing_values(const GridFunction& f) {
  const auto& g = *f.grid();
  std::vector<double> out;
  out.reserve(g.outgoing_chars().size());
  for (std::size_t i : g.outgoing_chars()) {
    const auto v = f.char_values(i);
    const auto& c = g.ch(i);
    const std::size_t m = c.n_nodes - 1;
    double val = v[m];
    if (c.end_gap > 0.0 && c.n_nodes >= 2) val += c.end_gap / c.ds * (v[m] - v[m - 1]);
    out.push_back(val);
  }
  return out;
}

std::vector<double> apply_H(const BoundaryOperator& H, const GridPtr& grid, double p,
                            const std::vector<double>& outgoing) {
  TraceVector t = zero_trace(grid, Side::outgoing, p);
  t.values = outgoing;
  return H.apply(t).values;
}

}  // namespace

GridFunction evolve_free(const GridFunction& f, double t) {
  const auto& g = *f.grid();
  const std::size_t k = exact_steps(t, g.ds());
  if (k == 0) return f;
  GridFunction out(f.grid(), f.p());
  parallel_for(g.n_characteristics(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& c = g.ch(i);
      const auto src = f.char_values(i);
      auto dst = out.char_values(i);
      if (c.interior_loop) {
        const std::size_t sh = loop_shift(c, t);
        for (std::size_t j = 0; j < c.n_nodes; ++j)
          dst[j] = src[(j + c.n_nodes - sh) % c.n_nodes];
      } else {
        // strict front: arc j = k is the boundary case t = tau_minus and
        // stays zero, matching the open indicator of the free semigroup
        for (std::size_t j = 0; j < c.n_nodes; ++j) dst[j] = j >= k + 1 ? src[j - k] : 0.0;
      }
    }
  });
  return out;
}

GridFunction evolve_free_interp(const GridFunction& f, double t) {
  if (t < 0.0) throw ArgumentError("evolution time must be nonnegative");
  const auto& g = *f.grid();
  GridFunction out(f.grid(), f.p());
  parallel_for(g.n_characteristics(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& c = g.ch(i);
      const auto src = f.char_values(i);
      auto dst = out.char_values(i);
      for (std::size_t j = 0; j < c.n_nodes; ++j) {
        double arc = j * c.ds - t;
        if (c.interior_loop) {
          const double period = c.length;
          arc = std::fmod(std::fmod(arc, period) + period, period);
          const double cell = arc / c.ds;
          const std::size_t k0 = static_cast<std::size_t>(cell) % c.n_nodes;
          const std::size_t k1 = (k0 + 1) % c.n_nodes;
          const double th = cell - std::floor(cell);
          dst[j] = (1.0 - th) * src[k0] + th * src[k1];
        } else if (arc < 0.0) {
          dst[j] = 0.0;
        } else {
          const double cell = arc / c.ds;
          std::size_t k0 = static_cast<std::size_t>(cell);
          if (k0 >= c.n_nodes - 1) k0 = c.n_nodes - 2;
          const double th = cell - k0;
          dst[j] = (1.0 - th) * src[k0] + th * src[k0 + 1];
        }
      }
    }
  });
  return out;
}

GridFunction evolve_full(const GridFunction& f, double t, const BoundaryOperator& H) {
  const auto& g = *f.grid();
  const TimeGrid tg = time_grid(g, t);
  GridFunction state = f;
  const auto& in_chars = g.incoming_chars();
  for (std::size_t s = 0; s < tg.steps; ++s) {
    shift_once(state);
    const std::vector<double> inj = apply_H(H, f.grid(), f.p(), outgoing_values(state));
    for (std::size_t k = 0; k < in_chars.size(); ++k) state.char_values(in_chars[k])[0] = inj[k];
  }
  return state;
}

namespace {

// Trace history tower: hist[k][c] = outgoing values of the k-th iterate at
// step time c*dt. Level 0 reads the shifted initial data directly; level k
// extrapolates H(hist[k-1]) values re-entering the flow.
struct Tower {
  std::vector<std::vector<std::vector<double>>> hist;    // [level][step][out node]
  std::vector<std::vector<std::vector<double>>> h_hist;  // H applied per level/step
};

Tower build_tower(int levels, std::size_t steps, const GridFunction& f, const BoundaryOperator& H) {
  const auto& g = *f.grid();
  const auto& out_chars = g.outgoing_chars();
  const std::size_t n_out = out_chars.size();

  // incoming node position per characteristic (for re-entry lookups)
  std::vector<std::size_t> in_pos(g.n_characteristics(), SIZE_MAX);
  for (std::size_t k = 0; k < g.incoming_chars().size(); ++k) in_pos[g.incoming_chars()[k]] = k;

  Tower tw;
  tw.hist.resize(levels + 1);
  tw.h_hist.resize(levels + 1);

  // level 0
  tw.hist[0].assign(steps + 1, std::vector<double>(n_out, 0.0));
  for (std::size_t c = 0; c <= steps; ++c) {
    for (std::size_t k = 0; k < n_out; ++k) {
      const auto& ch = g.ch(out_chars[k]);
      const auto v = f.char_values(out_chars[k]);
      const std::size_t m = ch.n_nodes - 1;
      const auto sample = [&](std::size_t node) -> double {
        return node >= c + 1 ? v[node - c] : 0.0;  // strict front
      };
      double val = sample(m);
      if (ch.end_gap > 0.0 && m >= 1) val += ch.end_gap / ch.ds * (sample(m) - sample(m - 1));
      tw.hist[0][c][k] = val;
    }
  }

  for (int lev = 0; lev < levels; ++lev) {
    auto& Hh = tw.h_hist[lev];
    Hh.assign(steps + 1, {});
    for (std::size_t c = 0; c <= steps; ++c) {
      TraceVector tr = zero_trace(f.grid(), Side::outgoing, f.p());
      tr.values = tw.hist[lev][c];
      Hh[c] = H.apply(tr).values;
    }
    // next level traces: the value at exit node m of iterate lev+1 at step c
    // was injected m steps earlier
    auto& next = tw.hist[lev + 1];
    next.assign(steps + 1, std::vector<double>(n_out, 0.0));
    for (std::size_t c = 0; c <= steps; ++c) {
      for (std::size_t k = 0; k < n_out; ++k) {
        const std::size_t ci = out_chars[k];
        const auto& ch = g.ch(ci);
        const std::size_t m = ch.n_nodes - 1;
        const std::size_t ip = in_pos[ci];
        const auto sample = [&](std::size_t node) -> double {
          // value of iterate lev+1 at (ci, node) at step c
          if (node > c) return 0.0;
          return Hh[c - node][ip];
        };
        double val = sample(m);
        if (ch.end_gap > 0.0 && m >= 1) val += ch.end_gap / ch.ds * (sample(m) - sample(m - 1));
        next[c][k] = val;
      }
    }
  }
  // H of the last level (used by assembly of iterate `levels`)
  auto& Hh = tw.h_hist[levels];
  Hh.assign(steps + 1, {});
  for (std::size_t c = 0; c <= steps; ++c) {
    TraceVector tr = zero_trace(f.grid(), Side::outgoing, f.p());
    tr.values = tw.hist[levels][c];
    Hh[c] = H.apply(tr).values;
  }
  return tw;
}

// Assemble iterate k (k >= 1) at time steps*dt from H(hist[k-1]).
GridFunction assemble_iterate(const Tower& tw, int k, std::size_t steps, const GridFunction& f) {
  const auto& g = *f.grid();
  GridFunction out(f.grid(), f.p());
  std::vector<std::size_t> in_pos(g.n_characteristics(), SIZE_MAX);
  for (std::size_t q = 0; q < g.incoming_chars().size(); ++q) in_pos[g.incoming_chars()[q]] = q;
  const auto& Hh = tw.h_hist[k - 1];
  for (std::size_t i : g.incoming_chars()) {
    const auto& c = g.ch(i);
    auto v = out.char_values(i);
    const std::size_t ip = in_pos[i];
    for (std::size_t j = 0; j < c.n_nodes && j <= steps; ++j) v[j] = Hh[steps - j][ip];
  }
  return out;
}

}  // namespace

GridFunction dyson_iterate(int k, double t, const GridFunction& f, const BoundaryOperator& H) {
  if (k < 0) throw ArgumentError("iterate index must be nonnegative");
  if (k == 0) return evolve_free(f, t);
  const std::size_t steps = exact_steps(t, f.grid()->ds());
  if (steps == 0) return GridFunction(f.grid(), f.p());  // U_k(0) f = 0 for k >= 1
  const Tower tw = build_tower(k - 1, steps, f, H);
  return assemble_iterate(tw, k, steps, f);
}

std::vector<std::vector<double>> dyson_outgoing_history(int k, double t, const GridFunction& f,
                                                        const BoundaryOperator& H) {
  if (k < 0) throw ArgumentError("iterate index must be nonnegative");
  const std::size_t steps = exact_steps(t, f.grid()->ds());
  const Tower tw = build_tower(k, steps, f, H);
  return tw.hist[k];
}

GridFunction series_evolve(const GridFunction& f, double t, const BoundaryOperator& H,
                           std::optional<int> K) {
  const auto& g = *f.grid();
  const std::size_t steps = exact_steps(t, g.ds());
  int levels;
  if (K.has_value()) {
    if (*K < 0) throw ArgumentError("series order must be nonnegative");
    levels = *K;
  } else {
    double delta_min = kInf;
    for (std::size_t i : g.outgoing_chars()) delta_min = std::min(delta_min, g.ch(i).length);
    if (!std::isfinite(delta_min)) return evolve_free(f, t);  // nothing re-enters
    // certify the truncated-norm criterion before relying on the default cutoff
    const TruncationScan scan = truncation_limit(H, g, f.p(), delta_min, 10);
    if (scan.c_estimate >= 1.0)
      throw CriterionError("truncated boundary norms do not certify series convergence",
                           scan.c_estimate);
    const double k_needed = std::ceil(t / delta_min) + 1.0;
    levels = static_cast<int>(std::min<double>(k_needed, static_cast<double>(steps) + 1.0));
  }
  if (levels == 0 || steps == 0) return evolve_free(f, t);

  const Tower tw = build_tower(levels - 1, steps, f, H);
  GridFunction acc = evolve_free(f, t);
  for (int k = 1; k <= levels; ++k) acc += assemble_iterate(tw, k, steps, f);
  return acc;
}

GridFunction evolve_laplace(const GridFunction& f, const BoundaryOperator& H, double lambda,
                            double T) {
  if (!(lambda > 0.0)) throw ArgumentError("lambda must be positive");
  const auto& g = *f.grid();
  const TimeGrid tg = time_grid(g, T);
  GridFunction state = f;
  GridFunction acc = f;
  acc *= 0.5;  // trapezoid end weight at t = 0
  const auto& in_chars = g.incoming_chars();
  for (std::size_t s = 1; s <= tg.steps; ++s) {
    shift_once(state);
    const std::vector<double> inj = apply_H(H, f.grid(), f.p(), outgoing_values(state));
    for (std::size_t k = 0; k < in_chars.size(); ++k) state.char_values(in_chars[k])[0] = inj[k];
    const double w = (s == tg.steps ? 0.5 : 1.0) * std::exp(-lambda * s * tg.dt);
    GridFunction term = state;
    term *= w;
    acc += term;
  }
  acc *= tg.dt;
  return acc;
}

}  // namespace charflow
