// Transport semigroups in characteristic coordinates: the free (absorbing)
// semigroup as an exact index shift, the boundary iterates that count
// boundary crossings, their series sum, and the direct time-marched
// realization with re-entry through H.
#pragma once

#include <optional>

#include "charflow/boundary_ops.hpp"

namespace charflow {

struct TimeGrid {
  double dt = 0.0;       // equals the grid ds (shift alignment)
  std::size_t steps = 0;
};

// Validated marching layout for evolving to time t in exact-shift mode:
// rejects t < 0 and times that are not multiples of the grid step.
TimeGrid time_grid(const CharacteristicGrid& g, double t);

// Number of dt steps in t; rejects t < 0 and non-multiples (exact-shift mode).
std::size_t exact_steps(double t, double dt);

// Free streaming with absorbing boundary: values shift along each
// characteristic, zero-filled from the inlet; closed loops rotate cyclically.
GridFunction evolve_free(const GridFunction& f, double t);

// Same map for arbitrary t, linear interpolation along the arc.
GridFunction evolve_free_interp(const GridFunction& f, double t);

// Full semigroup by time marching: shift one cell, read the outgoing trace,
// re-inject H(trace) at the inlets, repeat.
GridFunction evolve_full(const GridFunction& f, double t, const BoundaryOperator& H);

// k-th boundary iterate: the part of the solution that has crossed the
// boundary exactly k times. k = 0 is evolve_free; the iterates vanish for
// t = 0 and below the k-th crossing time.
GridFunction dyson_iterate(int k, double t, const GridFunction& f, const BoundaryOperator& H);

// Outgoing traces of the k-th iterate at every step time in [0, t].
std::vector<std::vector<double>> dyson_outgoing_history(int k, double t, const GridFunction& f,
                                                        const BoundaryOperator& H);

// Sum of the iterates up to K. When K is omitted it defaults to
// ceil(t / delta_min) + 1 with delta_min the shortest finite transit time,
// after certifying that the truncated norms stay below one.
GridFunction series_evolve(const GridFunction& f, double t, const BoundaryOperator& H,
                           std::optional<int> K = std::nullopt);

// Trapezoid-in-time Laplace transform int_0^T exp(-lambda t) U_H(t) f dt,
// accumulated over one marching sweep.
GridFunction evolve_laplace(const GridFunction& f, const BoundaryOperator& H, double lambda,
                            double T);

}  // namespace charflow
